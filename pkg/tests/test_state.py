import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bolab.state import (BirkhoffState, h_norm, h_norm_rows, load_state, project, sobolev_weights,
                         state_from_csv, state_from_json, state_to_csv, state_to_json, tail_norm)

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)
states = st.lists(st.tuples(finite, finite), min_size=1, max_size=12).map(
    lambda pairs: BirkhoffState([complex(a, b) for a, b in pairs]))


def test_state_validation():
    with pytest.raises(ValueError):
        BirkhoffState([])
    with pytest.raises(ValueError):
        BirkhoffState([1.0, np.nan])
    z = BirkhoffState([1, 2j])
    assert z.length == 2
    with pytest.raises(ValueError):
        z.coeffs[0] = 5


def test_padding_and_equality():
    z = BirkhoffState([1, 2])
    np.testing.assert_array_equal(z.padded(4), [1, 2, 0, 0])
    np.testing.assert_array_equal(z.padded(1), [1])
    assert z == BirkhoffState([1 + 0j, 2])
    assert z != BirkhoffState([1, 2, 0])


def test_h_norm_examples():
    assert h_norm([3, 4], 0.0) == pytest.approx(5.0)
    # weights n^(2s): 1 + 4 * 2^2 = 17 at s = 1
    assert h_norm([1, 2], 1.0) == pytest.approx(np.sqrt(17.0))
    assert h_norm([0, 1], -1.0) == pytest.approx(0.5)
    assert sobolev_weights(3, 0.0).tolist() == [1.0, 1.0, 1.0]


def test_rows_match_single_norm():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    np.testing.assert_allclose(h_norm_rows(z, 0.3), [h_norm(r, 0.3) for r in z], rtol=1e-14)


def test_projection_and_tail_split_the_norm():
    z = BirkhoffState(np.arange(1, 9) * (1 - 0.5j))
    for N in (1, 3, 8, 20):
        head = h_norm(project(z, N), 0.5)
        assert head ** 2 + tail_norm(z, N, 0.5) ** 2 == pytest.approx(h_norm(z, 0.5) ** 2, rel=1e-13)
    with pytest.raises(ValueError):
        project(z, 0)


@settings(max_examples=60, deadline=None)
@given(states)
def test_csv_round_trip_is_exact(z):
    assert state_from_csv(state_to_csv(z)) == z


@settings(max_examples=60, deadline=None)
@given(states)
def test_json_round_trip_is_exact(z):
    assert state_from_json(state_to_json(z)) == z


def test_csv_header_and_gaps_rejected():
    with pytest.raises(ValueError):
        state_from_csv("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        state_from_csv("n,re,im\n1,0,0\n3,0,0\n")
    with pytest.raises(ValueError):
        state_from_json('{"re": 1}')


def test_load_state_by_content(tmp_path):
    z = BirkhoffState([0.5 - 1j, 2.0])
    (tmp_path / "a.csv").write_text(state_to_csv(z))
    (tmp_path / "b.json").write_text(state_to_json(z))
    assert load_state(tmp_path / "a.csv") == z
    assert load_state(tmp_path / "b.json") == z
