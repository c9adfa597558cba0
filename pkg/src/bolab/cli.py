"""Command-line entry point.

Usage::

    bolab SUBCOMMAND [CONFIG] [--flags]
    bolab run CONFIG [--seed S] [--workers W] [--out PATH] [--format csv|json]

Flags override values from the config file.  Exit status: 0 when every
verdict passes, 1 on usage, configuration or I/O errors, 2 when a
statistical verdict fails.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .config import SUBCOMMANDS, ExperimentConfig, build_config, config_entries, fields_for
from .errors import ConfigError, DegenerateWeightsError
from .flow import FlowSpec, convergence_profile, flow_truncated
from .gibbs import GibbsSpec, gibbs_weighted_statistics
from .harness import functional_by_id, invariance_test, weak_convergence_test
from .measures import classify_sigma, dyadic_grid, log_tail_mass_product, sample_ensemble, sample_state
from .parallel import WorkerPool
from .renorm import RenormContext, phase_convergence_diagnostic
from .report import to_csv, to_json
from .rng import CounterRNG
from .state import as_state, load_state, state_to_csv

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2

_SUMMARIES = {
    "flow": "evolve one state under the truncated flow",
    "sample": "draw an ensemble from the truncated random measure",
    "tailmass": "tail-mass products and the divergence classification",
    "renorm": "variance diagnostics of renormalised phases",
    "invariance": "paired Monte-Carlo invariance test",
    "weakconv": "weak convergence of truncated measures",
    "gibbs": "weighted statistics under the Gibbs-type density",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class RunFailure(Exception):
    """A run-time problem reported to the user with exit status 1."""


# --- runners ---------------------------------------------------------------------------------
# Each returns (payload text, passed, extra outputs {suffix: text}).

def _run_flow(cfg: ExperimentConfig, pool: WorkerPool):
    N = cfg["N"]
    if cfg["state"] is not None:
        try:
            z = load_state(cfg["state"])
        except OSError as exc:
            raise RunFailure(f"cannot read state file {cfg['state']}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise RunFailure(f"bad state file {cfg['state']}: {exc}") from exc
    else:
        z = sample_state(cfg.amps(), cfg.law(), N, cfg["seed"])
    t = cfg["t"][0]
    evolved = flow_truncated(z, FlowSpec(N, t))
    profile = None
    if cfg["profile"] is not None:
        levels = list(cfg["profile"])
        zz = as_state(z)
        if max(levels) > zz.length:
            raise RunFailure(f"profile level {max(levels)} exceeds state length {zz.length}")
        profile = list(zip(levels, convergence_profile(zz, t, cfg["s"], levels)))
    extras = {}
    if cfg["format"] == "json":
        body = {
            "config_echo": cfg.echo(),
            "state": [[v.real, v.imag] for v in evolved.coeffs],
            "profile": None if profile is None else [{"N": n, "distance": d} for n, d in profile],
        }
        return to_json(body), True, extras
    if profile is not None:
        extras[".profile.csv"] = to_csv(["N", "distance"], profile)
    return state_to_csv(evolved), True, extras


def _run_sample(cfg, pool):
    amps, law, N, M = cfg.amps(), cfg.law(), cfg["N"], cfg["samples"]
    ens = sample_ensemble(amps, law, N, M, cfg["seed"], workers=pool, label="sample")
    if cfg["format"] == "csv":
        header = ["sample"] + [f"{part}_{n}" for n in range(1, N + 1) for part in ("re", "im")]
        rows = ([i] + [x for v in row for x in (v.real, v.imag)] for i, row in enumerate(ens))
        return to_csv(header, rows), True, {}
    g = ens / amps.values(N)
    a2 = g.real ** 2 + g.imag ** 2
    grid = dyadic_grid(N)
    body = {
        "law": law.describe(),
        "amps": amps.describe(),
        "N": N,
        "seed": cfg["seed"],
        "moments": {
            "empirical_second": float(a2.mean()),
            "empirical_fourth": float((a2 * a2).mean()),
            "second": law.second_moment,
            "fourth": law.radius_moment(4),
        },
        "sigma": cfg["sigma"],
        "product_values": _products(amps, cfg["sigma"], grid, law),
    }
    return to_json(body), True, {}


def _products(amps, sigma, grid, law):
    out = []
    for n in grid:
        lp = log_tail_mass_product(amps, sigma, n, law)
        out.append({"N": n, "log_product": lp, "product": math.exp(lp)})
    return out


def _run_tailmass(cfg, pool):
    amps, law, N, sigma = cfg.amps(), cfg.law(), cfg["N"], cfg["sigma"]
    grid = list(cfg["grid"]) if cfg["grid"] is not None else dyadic_grid(N)
    try:
        products = _products(amps, sigma, grid, law)
    except ArithmeticError as exc:
        raise RunFailure(str(exc)) from exc
    verdict = classify_sigma(amps, sigma, max(grid)).verdict
    if cfg["format"] == "csv":
        rows = [(p["N"], p["log_product"], p["product"]) for p in products]
        return to_csv(["N", "log_product", "product"], rows), True, {}
    body = {
        "law": law.describe(),
        "amps": amps.describe(),
        "N": N,
        "seed": cfg["seed"],
        "moments": {"second": law.second_moment, "fourth": law.radius_moment(4),
                    "action_variance": law.action_variance},
        "sigma": sigma,
        "classification": verdict,
        "product_values": products,
    }
    return to_json(body), True, {}


def _run_renorm(cfg, pool):
    ctx = RenormContext(cfg.amps(), cfg.law())
    diag = phase_convergence_diagnostic(ctx, list(cfg["mode"]), list(cfg["grid"]), cfg["samples"],
                                        cfg["seed"], workers=pool,
                                        keep_trajectories=cfg["dump_trajectories"])
    rows = [("S",) + _inc_row(i) for i in diag.sum_increments]
    for m, incs in diag.phase_increments.items():
        rows.extend((f"phase_{m}",) + _inc_row(i) for i in incs)
    extras = {}
    if diag.trajectories is not None:
        header = ["sample", "mode"] + [f"N_{g}" for g in diag.grid]
        traj_rows = (
            [i, m] + list(row)
            for m, traj in diag.trajectories.items() for i, row in enumerate(traj)
        )
        extras[".trajectories.csv"] = to_csv(header, traj_rows)
    header = ["series", "N", "N_next", "empirical_var", "predicted_var", "ratio", "std_error"]
    if cfg["format"] == "csv":
        return to_csv(header, rows), diag.passed, extras
    body = {
        "config_echo": cfg.echo(),
        "increments": [dict(zip(header, r)) for r in rows],
        "sums_ok": diag.sums_ok,
        "phases_ok": diag.phases_ok,
        "verdict": "pass" if diag.passed else "fail",
        "seed": cfg["seed"],
    }
    return to_json(body), diag.passed, extras


def _inc_row(i):
    return (i.N, i.N_next, i.empirical_var, i.predicted_var, i.ratio, i.std_error)


def _run_invariance(cfg, pool, started):
    reports = invariance_test(cfg.amps(), cfg.law(), cfg["flow"], cfg["N"], list(cfg["t"]),
                              [functional_by_id(f) for f in cfg["functionals"]], cfg["samples"],
                              cfg["seed"], workers=pool, negative_control=cfg["negative_control"])
    passed = all(r.passed for r in reports)
    keys = ["id", "t", "mean_before", "mean_after", "std_error", "z", "verdict"]
    if cfg["format"] == "csv":
        return to_csv(keys, ([r.as_dict()[k] for k in keys] for r in reports)), passed, {}
    body = {
        "config_echo": cfg.echo(),
        "per_functional": [{k: r.as_dict()[k] for k in keys} for r in reports],
        "seed": cfg["seed"],
        "runtime_ms": _elapsed_ms(started),
    }
    return to_json(body), passed, {}


def _run_weakconv(cfg, pool, started):
    F = functional_by_id(cfg["functional"])
    rep = weak_convergence_test(cfg.amps(), cfg.law(), F, list(cfg["grid"]), cfg["N_ref"], cfg["samples"],
                                cfg["seed"], workers=pool)
    if cfg["format"] == "csv":
        rows = [(g.N, g.estimate, g.std_error, g.z_vs_reference, g.within_band) for g in rep.grid]
        rows.append((cfg["N_ref"], rep.reference, rep.reference_std_error, 0.0, True))
        return to_csv(["N", "estimate", "std_error", "z", "within_band"], rows), rep.passed, {}
    body = {
        "config_echo": cfg.echo(),
        "per_functional": [rep.as_dict()],
        "seed": cfg["seed"],
        "runtime_ms": _elapsed_ms(started),
    }
    return to_json(body), rep.passed, {}


def _run_gibbs(cfg, pool, started):
    spec = GibbsSpec(cfg["N"], cfg["cutoff_a"], cfg["cutoff"], cfg["ramp"])
    rep = gibbs_weighted_statistics(spec, [functional_by_id(f) for f in cfg["functionals"]], cfg["samples"],
                                    cfg["seed"], t=cfg["t"][0], workers=pool)
    rows = [f.as_dict() for f in rep.functionals]
    if cfg["format"] == "csv":
        keys = ["id", "mean_before", "mean_after", "std_error", "z", "mean_std_error", "z_mean", "verdict"]
        return to_csv(keys, ([r[k] for k in keys] for r in rows)), rep.passed, {}
    body = {
        "config_echo": cfg.echo(),
        "ess": rep.ess,
        "retained": rep.retained,
        "per_functional": rows,
        "seed": cfg["seed"],
        "runtime_ms": _elapsed_ms(started),
    }
    return to_json(body), rep.passed, {}


def _elapsed_ms(started: float) -> int:
    return int(round((time.perf_counter() - started) * 1000))


def execute(cfg: ExperimentConfig) -> tuple[str, bool, dict, WorkerPool]:
    """Run a validated config; returns payload, verdict, extra outputs and the pool used."""
    pool = WorkerPool(cfg["workers"])
    started = time.perf_counter()
    sub = cfg.subcommand
    if sub in ("invariance", "weakconv", "gibbs"):
        runner = {"invariance": _run_invariance, "weakconv": _run_weakconv, "gibbs": _run_gibbs}[sub]
        payload, passed, extras = runner(cfg, pool, started)
    else:
        runner = {"flow": _run_flow, "sample": _run_sample, "tailmass": _run_tailmass,
                  "renorm": _run_renorm}[sub]
        payload, passed, extras = runner(cfg, pool)
    return payload, passed, extras, pool


def manifest(cfg: ExperimentConfig, pool: WorkerPool, runtime_ms: int, outputs: list[str]) -> dict:
    seed = cfg.get("seed")
    return {
        "version": __version__,
        "backend": kernels.BACKEND,
        "config_echo": cfg.echo(),
        "workers": cfg["workers"],
        "runtime_ms": runtime_ms,
        "stream_key": None if seed is None else f"{CounterRNG(seed).key:#018x}",
        "substreams": pool.assignments,
        "outputs": outputs,
    }


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise RunFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def run(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    """Execute ``cfg``, write its artifacts and return the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    started = time.perf_counter()
    try:
        payload, passed, extras, pool = execute(cfg)
    except DegenerateWeightsError as exc:
        print(f"bolab {cfg.subcommand}: {exc}", file=stderr)
        return EXIT_VERDICT
    except RunFailure as exc:
        print(f"bolab {cfg.subcommand}: {exc}", file=stderr)
        return EXIT_USAGE
    runtime = _elapsed_ms(started)
    out = cfg["out"]
    try:
        if out is None:
            stdout.write(payload)
            for suffix, text in extras.items():
                stdout.write(f"\n# {suffix.lstrip('.')}\n{text}")
            print(to_json(manifest(cfg, pool, runtime, ["<stdout>"])), end="", file=stderr)
        else:
            path = Path(out)
            _write(path, payload)
            written = [str(path)]
            for suffix, text in extras.items():
                extra = Path(str(path) + suffix)
                _write(extra, text)
                written.append(str(extra))
            _write(Path(str(path) + ".manifest.json"), to_json(manifest(cfg, pool, runtime, written)))
    except RunFailure as exc:
        print(f"bolab {cfg.subcommand}: {exc}", file=stderr)
        return EXIT_USAGE
    if not passed:
        print(f"bolab {cfg.subcommand}: verdict failed", file=stderr)
        return EXIT_VERDICT
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------------------------

def _field_help(f, sub) -> str:
    parts = [f.help, f"[{f.kind}]"]
    if f.choices:
        parts.append("choices: " + ", ".join(f.choices))
    d = f.default_for(sub)
    if d is not None:
        d = ", ".join(str(x) for x in d) if isinstance(d, tuple) else d
        parts.append(f"default: {d}")
    return "; ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bolab", description="Random-data experiments for the Benjamin-Ono flow "
                                               "in Birkhoff coordinates.")
    parser.add_argument("--version", action="version", version=f"bolab {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for sub in SUBCOMMANDS:
        p = subs.add_parser(sub, help=_SUMMARIES[sub], description=_SUMMARIES[sub])
        p.add_argument("config", nargs="?", help="config file of 'key = value' lines")
        for f in fields_for(sub):
            flag = f.flag_for(sub)
            if f.kind == "bool":
                p.add_argument(flag, dest=f.name, action="store_const", const="true",
                               default=argparse.SUPPRESS, help=_field_help(f, sub))
            else:
                p.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, metavar=f.kind.upper(),
                               help=_field_help(f, sub))
    p = subs.add_parser("run", help="run the subcommand named inside a config file")
    p.add_argument("config", help="config file of 'key = value' lines")
    for name in ("seed", "workers", "out", "format"):
        p.add_argument("--" + name, dest=name, default=argparse.SUPPRESS)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    entries = []
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise RunFailure(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
        entries.extend(config_entries(text, source=f"{args.config} line"))
    skip = {"config", "subcommand"}
    for key, value in vars(args).items():
        if key not in skip:
            entries.append((key, str(value), f"override --{key}"))
    sub = None if args.subcommand == "run" else args.subcommand
    return build_config(entries, sub)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"bolab: {v}", file=sys.stderr)
        return EXIT_USAGE
    except RunFailure as exc:
        print(f"bolab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
