"""Monte-Carlo evidence that the product measures are flow invariant.

The invariance check is paired: every functional is evaluated on the same
draws before and after the flow, so the population mean of the difference is
exactly zero under invariance and the sampling noise of the difference is
the only thing the z-score has to beat.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from . import kernels
from .errors import DimensionMismatchError
from .measures import AmplitudeSequence, RadialLaw, _as_rng
from .parallel import as_pool, blocks, rows_per_block
from .renorm import RenormContext, renorm_constant
from .state import as_state

Z_THRESHOLD = 3.0
# paired differences below this (relative) level are floating-point noise, not signal
ROUNDOFF_FLOOR = 1e-12


@dataclass(frozen=True)
class TestFunctional:
    """A bounded continuous functional that reads the first ``arity`` modes."""

    __test__ = False  # not a pytest class

    id: str
    arity: int
    bound: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    centered: bool = False  # mean zero under every rotation-invariant product law

    def rows(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        if z.shape[1] < self.arity:
            z = np.concatenate([z, np.zeros((z.shape[0], self.arity - z.shape[1]), z.dtype)], axis=1)
        return self.evaluator(z[:, : self.arity])

    def __call__(self, z) -> float:
        return float(self.rows(as_state(z).coeffs[None, :])[0])


def _f1(z):
    return np.exp(-np.sum(z.real ** 2 + z.imag ** 2, axis=1))


def _f2(z):
    z1 = z[:, 0]
    return z1.real * np.exp(-(z1.real ** 2 + z1.imag ** 2))


def _f3(z):
    z1, z2 = z[:, 0], z[:, 1]
    num = (z2 * np.conj(z1) ** 2).real
    den = np.maximum(np.abs(z2) * np.abs(z1) ** 2, 1e-12)
    return np.clip(num / den, -1.0, 1.0)


def _f4(z):
    z3 = z[:, 2]
    return np.minimum(1.0, z3.real ** 2 + z3.imag ** 2)


def _f5(z):
    return np.sin(z[:, 0].real + z[:, 1].imag)


def builtin_functionals() -> list[TestFunctional]:
    """The fixed panel: two phase-blind functionals and three that see phases."""
    return [
        TestFunctional("F1", 4, 1.0, _f1),
        TestFunctional("F2", 1, 1.0 / np.sqrt(2.0 * np.e), _f2, centered=True),
        TestFunctional("F3", 2, 1.0, _f3, centered=True),
        TestFunctional("F4", 3, 1.0, _f4),
        TestFunctional("F5", 2, 1.0, _f5, centered=True),
    ]


def functional_by_id(name: str) -> TestFunctional:
    for f in builtin_functionals():
        if f.id == name:
            return f
    raise KeyError(f"unknown functional {name!r}")


def broken_rotation(z: np.ndarray, factor: float = 1.1) -> np.ndarray:
    """Scale every argument by ``factor``; the angle map is not measure preserving."""
    return np.abs(z) * np.exp(1j * factor * np.angle(z))


@dataclass(frozen=True)
class InvarianceReport:
    functional: str
    t: float
    mean_before: float
    mean_after: float
    std_error: float
    z_score: float
    sample_count: int
    seed: int

    @property
    def verdict(self) -> str:
        return "pass" if abs(self.z_score) <= Z_THRESHOLD else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "id": self.functional,
            "t": self.t,
            "mean_before": self.mean_before,
            "mean_after": self.mean_after,
            "std_error": self.std_error,
            "z": self.z_score,
            "verdict": self.verdict,
            "sample_count": self.sample_count,
            "seed": self.seed,
        }


def paired_z(before: np.ndarray, after: np.ndarray, weights: np.ndarray | None = None):
    """Mean difference, its standard error and z-score for paired samples.

    With ``weights`` (normalised), the self-normalised weighted version is used.
    """
    d = after - before
    scale = 1.0 + float(np.mean(np.abs(before)))
    if weights is None:
        mean = float(np.mean(d))
        se = float(np.std(d, ddof=1) / np.sqrt(d.size))
    else:
        mean = float(np.sum(weights * d))
        se = float(np.sqrt(np.sum(weights ** 2 * (d - mean) ** 2)))
    if abs(mean) <= ROUNDOFF_FLOOR * scale:
        return mean, se, 0.0
    return mean, se, mean / se if se > 0 else float(np.sign(mean) * np.inf)


def _flow_shift(flow: str, amps, law, N) -> float:
    if flow == "truncated":
        return 0.0
    if flow == "renormalized":
        return 2.0 * renorm_constant(RenormContext(amps, law), N)
    raise ValueError(f"unknown flow {flow!r}; use 'truncated' or 'renormalized'")


def invariance_test(amps: AmplitudeSequence, law: RadialLaw, flow: str, N: int, t,
                    functionals: Sequence[TestFunctional] | None = None, M_samples: int = 100_000,
                    rng=0, workers=1, negative_control: bool = False) -> list[InvarianceReport]:
    """Paired before/after-flow comparison of functional means.

    ``t`` may be a single time or a sequence; all times reuse the same draws.
    Reports are ordered by time, then functional.
    """
    if M_samples < 1000:
        raise ValueError("invariance test needs at least 1000 samples")
    if amps.rule == "explicit" and len(amps.explicit_values) < N:
        raise DimensionMismatchError(f"sampler provides {len(amps.explicit_values)} modes, flow needs N={N}")
    functionals = list(functionals) if functionals is not None else builtin_functionals()
    times = [float(t)] if np.isscalar(t) else [float(x) for x in t]
    rng = _as_rng(rng)
    a = amps.values(N)
    shift = _flow_shift(flow, amps, law, N)
    n_out = min(N, max(f.arity for f in functionals))

    def work(start, count):
        # modes past the functionals' arity only enter through their actions
        z = kernels.sample_block(rng.key, start, count, a[:n_out], law.code, law.scale)
        tail = None
        if N > n_out:
            tail_abs2 = kernels.abs2_block(rng.key, start, count, a[n_out:], law.code, law.scale, n_out)
            tail = np.cumsum(tail_abs2[:, ::-1], axis=1)[:, -1]
        before = np.stack([f.rows(z) for f in functionals])
        after = []
        for tt in times:
            zt = kernels.flow_rows(z, tt, n_out, shift, tail)
            if negative_control:
                zt = broken_rotation(zt)
            after.append(np.stack([f.rows(zt) for f in functionals]))
        return before, np.stack(after)

    parts = blocks(int(M_samples), rows_per_block(N))
    out = as_pool(workers).map_blocks(work, parts, "invariance")
    before = np.concatenate([o[0] for o in out], axis=1)
    after = np.concatenate([o[1] for o in out], axis=2)

    reports = []
    for ti, tt in enumerate(times):
        for fi, f in enumerate(functionals):
            mean_d, se, z = paired_z(before[fi], after[ti, fi])
            reports.append(InvarianceReport(f.id, tt, float(np.mean(before[fi])), float(np.mean(after[ti, fi])),
                                            se, z, int(M_samples), rng.seed))
    return reports


# --- two-sample tests ------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoSampleResult:
    statistic: str
    distance: float
    p_value: float


def _real_features(ens: np.ndarray, coords: int) -> np.ndarray:
    ens = np.atleast_2d(ens)
    x = np.empty((ens.shape[0], 2 * ens.shape[1]))
    x[:, 0::2] = ens.real
    x[:, 1::2] = ens.imag
    return x[:, :coords]


def energy_distance(x: np.ndarray, y: np.ndarray) -> float:
    """V-statistic energy distance ``2 E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    dxy = cdist(x, y).mean()
    dxx = cdist(x, x).mean()
    dyy = cdist(y, y).mean()
    return float(2.0 * dxy - dxx - dyy)


def _energy_permutation_pvalue(x, y, observed, permutations, gen) -> float:
    pooled = np.concatenate([x, y])
    n, m = len(x), len(y)
    d = cdist(pooled, pooled)
    row = d.sum(axis=1)
    total = row.sum()
    base = np.zeros(n + m)
    base[:n] = 1.0
    labels = np.tile(base, (permutations, 1))
    labels = gen.permuted(labels, axis=1)
    sxx = np.einsum("ij,ij->i", labels @ d, labels)
    sx = labels @ row
    sxy = sx - sxx
    syy = total - 2.0 * sx + sxx
    perm = 2.0 * sxy / (n * m) - sxx / n ** 2 - syy / m ** 2
    # tolerance guards ties against summation-order noise
    exceed = np.count_nonzero(perm >= observed - 1e-12 * max(abs(observed), 1.0))
    return float((1 + exceed) / (1 + permutations))


def two_sample_test(ens_a: np.ndarray, ens_b: np.ndarray, statistic: str = "energy_distance",
                    permutations: int = 1000, rng=0, coords: int = 8) -> TwoSampleResult:
    """Compare two ensembles (arrays of shape (samples, modes)) of the same truncation."""
    ens_a = np.atleast_2d(ens_a)
    ens_b = np.atleast_2d(ens_b)
    if ens_a.shape[1] != ens_b.shape[1]:
        raise DimensionMismatchError("ensembles must share the truncation level")
    if statistic == "energy_distance":
        x = _real_features(ens_a, coords)
        y = _real_features(ens_b, coords)
        dist = energy_distance(x, y)
        p = _energy_permutation_pvalue(x, y, dist, permutations, _as_rng(rng).numpy_generator())
        return TwoSampleResult(statistic, dist, p)
    if statistic == "per_marginal_KS":
        x = _real_features(ens_a, 2 * ens_a.shape[1])
        y = _real_features(ens_b, 2 * ens_b.shape[1])
        res = [stats.ks_2samp(x[:, j], y[:, j]) for j in range(x.shape[1])]
        dist = max(float(r.statistic) for r in res)
        p = min(1.0, x.shape[1] * min(float(r.pvalue) for r in res))
        return TwoSampleResult(statistic, dist, p)
    raise ValueError(f"unknown statistic {statistic!r}")


# --- weak convergence --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridEstimate:
    N: int
    estimate: float
    std_error: float
    z_vs_reference: float

    @property
    def within_band(self) -> bool:
        return abs(self.z_vs_reference) <= Z_THRESHOLD


@dataclass(frozen=True)
class WeakConvergenceReport:
    functional: str
    arity: int
    grid: tuple
    reference: float
    reference_std_error: float
    reference_repeat_z: float
    samples: int
    seed: int

    @property
    def stable_from(self) -> int | None:
        """Smallest grid level from which every later estimate sits in the 3-sigma band."""
        first = None
        for g in reversed(self.grid):
            if not g.within_band:
                break
            first = g.N
        return first

    @property
    def exact_from_arity(self) -> bool:
        """Estimates at every ``N >= arity`` coincide bit for bit (same draws, same modes)."""
        vals = [g.estimate for g in self.grid if g.N >= self.arity]
        return all(v == vals[0] for v in vals)

    @property
    def passed(self) -> bool:
        tail_ok = all(g.within_band for g in self.grid if g.N >= self.arity)
        return self.stable_from is not None and tail_ok and abs(self.reference_repeat_z) <= Z_THRESHOLD

    def as_dict(self) -> dict:
        return {
            "id": self.functional,
            "arity": self.arity,
            "estimates": [
                {"N": g.N, "estimate": g.estimate, "std_error": g.std_error, "z": g.z_vs_reference}
                for g in self.grid
            ],
            "reference": self.reference,
            "reference_std_error": self.reference_std_error,
            "reference_repeat_z": self.reference_repeat_z,
            "stable_from": self.stable_from,
            "verdict": "pass" if self.passed else "fail",
        }


def _functional_mean(F, amps, law, N, M, rng, pool, label):
    # modes past the functional's arity never influence F, so they are not drawn
    n_draw = min(N, F.arity)
    a = amps.values(n_draw)
    parts = blocks(int(M), rows_per_block(n_draw))
    vals = np.concatenate(pool.map_blocks(
        lambda s0, c: F.rows(kernels.sample_block(rng.key, s0, c, a, law.code, law.scale)), parts, label))
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(vals.size))


def weak_convergence_test(amps, law, F: TestFunctional, N_grid, N_ref: int, M_samples: int, rng,
                          workers=1) -> WeakConvergenceReport:
    """Truncated-measure means of ``F`` along ``N_grid`` against a large-``N`` reference."""
    rng = _as_rng(rng)
    pool = as_pool(workers)
    grid = sorted(int(n) for n in N_grid)
    if N_ref <= max(grid):
        raise ValueError("N_ref must exceed every grid level")
    ref, ref_se = _functional_mean(F, amps, law, N_ref, M_samples, rng.spawn(1), pool, "weakconv-ref")
    rep, rep_se = _functional_mean(F, amps, law, N_ref, M_samples, rng.spawn(2), pool, "weakconv-ref2")
    entries = []
    for N in grid:
        est, se = _functional_mean(F, amps, law, N, M_samples, rng, pool, f"weakconv-{N}")
        entries.append(GridEstimate(N, est, se, float((est - ref) / np.hypot(se, ref_se))))
    return WeakConvergenceReport(F.id, F.arity, tuple(entries), ref, ref_se,
                                 float((rep - ref) / np.hypot(rep_se, ref_se)), int(M_samples), rng.seed)
