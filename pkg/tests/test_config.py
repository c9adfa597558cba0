import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bolab.config import FIELDS, SUBCOMMANDS, fields_for, parse_config, serialize_config
from bolab.errors import ConfigError


def violations(text, sub=None):
    with pytest.raises(ConfigError) as info:
        parse_config(text, sub)
    return info.value.violations


def test_minimal_flow_config_fills_defaults():
    cfg = parse_config("subcommand = flow\nseed = 3\n")
    assert cfg.subcommand == "flow"
    assert cfg["N"] == 8 and cfg["t"] == (1.0,) and cfg["workers"] == 1
    echo = cfg.echo()
    assert "workers" not in echo and "out" not in echo
    assert echo["seed"] == 3


def test_flow_with_state_needs_no_seed():
    cfg = parse_config("subcommand = flow\nstate = s.csv\n")
    assert cfg["seed"] is None


def test_comments_blank_lines_and_lists():
    cfg = parse_config("# experiment\n\nsubcommand = invariance  # trailing\nseed = 1\nt = 0.3, 1.7; -2.5\n")
    assert cfg["t"] == (0.3, 1.7, -2.5)


def test_renorm_with_convergent_square_sum_rejected():
    v = violations("subcommand = renorm\nseed = 1\nalpha_p = 2\n")
    assert len(v) == 1 and v[0].startswith("invariant-violation") and "converges" in v[0]


def test_duplicate_key_reports_both_lines():
    v = violations("subcommand = sample\nseed = 1\nN = 4\n\nN = 5\n")
    assert v == ["duplicate-key: 'N' at line 3 and line 5"]


def test_all_violations_reported_at_once():
    v = violations("subcommand = sample\nbogus = 1\nN = four\nflow = truncated\n")
    kinds = sorted(x.split(":")[0] for x in v)
    assert kinds == ["missing-seed", "type-mismatch", "unknown-key", "unknown-key"]
    assert any("line 3" in x for x in v)


def test_syntax_and_subcommand_errors():
    assert violations("subcommand = flow\njust words\n")[0].startswith("syntax")
    assert violations("seed = 1\n")[0].startswith("missing-subcommand")
    assert violations("subcommand = plot\n")[0].startswith("unknown-subcommand")
    assert "not 'sample'" in violations("subcommand = flow\nseed = 1\n", "sample")[0]


@pytest.mark.parametrize("text,fragment", [
    ("subcommand = invariance\nseed = 1\nsamples = 10\n", "samples >= 1000"),
    ("subcommand = flow\nseed = 1\nt = 1, 2\n", "single flow time"),
    ("subcommand = tailmass\ngrid = 4, 2\n", "strictly increasing"),
    ("subcommand = weakconv\nseed = 1\nN_ref = 8\n", "N_ref"),
    ("subcommand = invariance\nseed = 1\nflow = renormalized\n", "converges"),
    ("subcommand = sample\nseed = 1\namps_rule = explicit\n", "amps_values"),
    ("subcommand = sample\nseed = 1\nN = 3\namps_rule = explicit\namps_values = 1, 2\n", "explicit amplitudes"),
    ("subcommand = invariance\nseed = 1\nfunctionals = F1, F7\n", "F7"),
    ("subcommand = renorm\nseed = 1\nmode = 40\n", "min(grid)"),
    ("subcommand = gibbs\nseed = 1\ncutoff_a = -1\n", "positive"),
    ("subcommand = sample\nseed = 1\nlaw = cauchy\n", "not one of"),
    ("subcommand = sample\nseed = 1\nlaw_scale = nan\n", "not finite"),
])
def test_invalid_configs(text, fragment):
    assert any(fragment in v for v in violations(text))


def test_every_field_documented():
    for f in FIELDS.values():
        assert f.help and f.subcommands
    for sub in SUBCOMMANDS:
        names = [f.flag_for(sub) for f in fields_for(sub)]
        assert len(names) == len(set(names))


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_round_trip_is_a_fixed_point_for_defaults(sub):
    cfg = parse_config(f"subcommand = {sub}\nseed = 11\n")
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**40), st.integers(1, 64), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=4),
       st.sampled_from(["gaussian", "radial_exponential"]), st.floats(0.01, 10.0))
def test_round_trip_is_a_fixed_point(seed, N, times, law, scale):
    text = (f"subcommand = invariance\nseed = {seed}\nN = {N}\nt = {', '.join(repr(t) for t in times)}\n"
            f"law = {law}\nlaw_scale = {scale!r}\nnegative_control = yes\n")
    cfg = parse_config(text)
    assert parse_config(serialize_config(cfg)) == cfg
    assert cfg["t"] == tuple(times)
