"""Renormalised phases for amplitudes with divergent square sum.

When ``sum |a_n|^2 = inf`` the truncated frequencies ``beta_{N,n}`` drift like
``-2 n c_N`` with ``c_N = sum_{k<=N} |a_k|^2``.  Adding ``2 n c_N`` back leaves

    n^2 - 2 sum_{k<=n} (k - n) |z_k|^2 - 2 n S_N,   S_N = sum_{k<=N} (|z_k|^2 - |a_k|^2),

and ``S_N`` is a sum of independent centred terms with summable variances
``C |a_k|^4``, ``C = Var |g|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .measures import AmplitudeSequence, RadialLaw, _as_rng
from .parallel import as_pool, blocks, rows_per_block
from .state import BirkhoffState, as_state, h_norm_rows


def renorm_violations(amps: AmplitudeSequence, law: RadialLaw) -> list[str]:
    """Reasons why ``(amps, law)`` cannot drive the renormalised flow (empty if fine)."""
    out = []
    d2 = amps.series_diverges(2.0)
    d4 = amps.series_diverges(4.0)
    if d2 is None or d4 is None:
        out.append("explicit amplitudes: divergence of sum |a_n|^2 cannot be certified")
    else:
        if not d2:
            out.append(f"sum |a_n|^2 converges for {amps.describe()}; renormalisation needs it to diverge")
        if d4:
            out.append(f"sum |a_n|^4 diverges for {amps.describe()}; it must be finite")
    if abs(law.second_moment - 1.0) > 1e-12:
        out.append(f"law second moment is {law.second_moment!r}, must be 1")
    if not np.isfinite(law.radius_moment(4)):
        out.append("law fourth moment must be finite")
    return out


@dataclass(frozen=True)
class RenormContext:
    amps: AmplitudeSequence = field(default_factory=lambda: AmplitudeSequence.power(0.5))
    law: RadialLaw = field(default_factory=RadialLaw.gaussian)

    def __post_init__(self):
        problems = renorm_violations(self.amps, self.law)
        if problems:
            raise ValueError("; ".join(problems))


def renorm_constant(ctx: RenormContext, N: int) -> float:
    """``c_N = sum_{k<=N} |a_k|^2``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a = ctx.amps.values(N)
    return float(np.sum(a * a))


def _abs2(c):
    return c.real * c.real + c.imag * c.imag


def _check_length(z: BirkhoffState, N: int):
    if not 1 <= N <= z.length:
        raise ValueError(f"N={N} must lie in 1..{z.length}")


def centered_sum(z, ctx: RenormContext, N: int) -> float:
    """``S_N = sum_{k<=N} (|z_k|^2 - |a_k|^2)``."""
    z = as_state(z)
    _check_length(z, N)
    a = ctx.amps.values(N)
    return float(np.sum(_abs2(z.coeffs[:N]) - a * a))


def _head(abs2_first: np.ndarray, n: int) -> np.ndarray:
    """``n^2 - 2 sum_{k<=n} (k - n) |z_k|^2`` along the last axis."""
    k = np.arange(1, n + 1, dtype=np.float64)
    return n * n - 2.0 * (abs2_first[..., :n] @ (k - n))


def limit_phase(z, ctx: RenormContext, n: int, N: int) -> float:
    """Renormalised frequency ``beta_{N,n}(pi_N z) + 2 n c_N`` of mode ``n``."""
    z = as_state(z)
    _check_length(z, N)
    if not 1 <= n <= N:
        raise ValueError(f"mode n={n} must lie in 1..N={N}")
    return float(_head(_abs2(z.coeffs), n) - 2.0 * n * centered_sum(z, ctx, N))


def renorm_flow(z, ctx: RenormContext, N: int, t: float) -> BirkhoffState:
    """``e^{2 i t n c_N}`` times the truncated flow, mode by mode."""
    z = as_state(z)
    _check_length(z, N)
    shift = 2.0 * renorm_constant(ctx, N)
    return BirkhoffState(kernels.flow_rows(z.coeffs[None, :N], t, shift=shift)[0])


def renorm_flow_rows(z: np.ndarray, ctx: RenormContext, t: float, n_out=None) -> np.ndarray:
    """Ensemble version of :func:`renorm_flow` at ``N = z.shape[1]``."""
    shift = 2.0 * renorm_constant(ctx, z.shape[1])
    return kernels.flow_rows(z, t, n_out, shift)


# --- convergence diagnostics -------------------------------------------------------------

@dataclass
class Increment:
    N: int
    N_next: int
    empirical_var: float
    predicted_var: float
    std_error: float

    @property
    def ratio(self) -> float:
        return self.empirical_var / self.predicted_var

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "N_next": self.N_next,
            "empirical_var": self.empirical_var,
            "predicted_var": self.predicted_var,
            "ratio": self.ratio,
            "std_error": self.std_error,
        }


@dataclass
class PhaseDiagnostic:
    modes: tuple
    grid: tuple
    samples: int
    sum_increments: list          # Var(S_N' - S_N) against C sum |a_k|^4
    phase_increments: dict        # mode -> list of Increment, scaled by (2n)^2
    trajectories: dict | None     # mode -> (samples, len(grid)) array, if kept
    sum_tolerance: float = 0.10
    phase_tolerance: float = 0.15

    @property
    def sums_ok(self) -> bool:
        return all(abs(i.ratio - 1.0) <= self.sum_tolerance for i in self.sum_increments)

    @property
    def phases_ok(self) -> bool:
        return all(abs(i.ratio - 1.0) <= self.phase_tolerance
                   for incs in self.phase_increments.values() for i in incs)

    @property
    def passed(self) -> bool:
        return self.sums_ok and self.phases_ok


def _variance_and_se(x: np.ndarray) -> tuple[float, float]:
    m = x.size
    d = x - np.mean(x)
    var = float(np.sum(d * d) / (m - 1))
    m4 = float(np.mean(d ** 4))
    return var, float(np.sqrt(max(m4 - var * var, 0.0) / m))


def phase_convergence_diagnostic(ctx: RenormContext, n, N_grid, M_samples: int, rng, workers=1,
                                 keep_trajectories: bool = False) -> PhaseDiagnostic:
    """Cauchy behaviour of the renormalised phases along an increasing ``N`` grid.

    ``n`` may be a single mode or a sequence of modes; all share the same draws.
    """
    modes = (int(n),) if np.isscalar(n) else tuple(int(m) for m in n)
    grid = np.asarray(N_grid, dtype=np.int64)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("N_grid must be strictly increasing with at least two points")
    if min(modes) < 1 or max(modes) > grid[0]:
        raise ValueError("modes must lie in 1..min(N_grid)")
    rng = _as_rng(rng)
    n_max = int(grid[-1])
    a = ctx.amps.values(n_max)
    law = ctx.law
    head_len = max(modes)

    def work(start, count):
        sums = kernels.centered_sums_block(rng.key, start, count, a, law.code, law.scale, grid)
        first = kernels.abs2_block(rng.key, start, count, a[:head_len], law.code, law.scale)
        return sums, first

    parts = blocks(int(M_samples), rows_per_block(n_max))
    out = as_pool(workers).map_blocks(work, parts, "renorm")
    sums = np.concatenate([o[0] for o in out])
    first = np.concatenate([o[1] for o in out])

    a4 = a ** 4
    cum4 = np.concatenate([[0.0], np.cumsum(a4)])
    C = law.action_variance
    sum_incs = []
    for j in range(grid.size - 1):
        lo, hi = int(grid[j]), int(grid[j + 1])
        var, se = _variance_and_se(sums[:, j + 1] - sums[:, j])
        sum_incs.append(Increment(lo, hi, var, C * (cum4[hi] - cum4[lo]), se))

    phase_incs = {}
    trajectories = {} if keep_trajectories else None
    for m in modes:
        traj = _head(first, m)[:, None] - 2.0 * m * sums
        incs = []
        for j in range(grid.size - 1):
            lo, hi = int(grid[j]), int(grid[j + 1])
            var, se = _variance_and_se(traj[:, j + 1] - traj[:, j])
            incs.append(Increment(lo, hi, var, (2.0 * m) ** 2 * C * (cum4[hi] - cum4[lo]), se))
        phase_incs[m] = incs
        if keep_trajectories:
            trajectories[m] = traj
    return PhaseDiagnostic(modes, tuple(int(g) for g in grid), int(M_samples), sum_incs, phase_incs,
                           trajectories)


def renorm_cauchy_profile(ctx: RenormContext, t: float, N_grid, M_samples: int, rng, s: float = -1.0,
                          workers=1) -> list[float]:
    """Mean squared ``h^s`` distance between renormalised flows at consecutive grid levels."""
    grid = [int(g) for g in N_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("N_grid must be strictly increasing with at least two points")
    rng = _as_rng(rng)
    n_max = grid[-1]
    a = ctx.amps.values(n_max)
    law = ctx.law

    def work(start, count):
        z = kernels.sample_block(rng.key, start, count, a, law.code, law.scale)
        levels = []
        for N in grid:
            out = np.zeros_like(z)
            out[:, :N] = renorm_flow_rows(z[:, :N], ctx, t)
            levels.append(out)
        return np.stack([h_norm_rows(hi - lo, s) ** 2 for lo, hi in zip(levels, levels[1:])], axis=1)

    parts = blocks(int(M_samples), max(1, rows_per_block(n_max) // 4))
    d2 = np.concatenate(as_pool(workers).map_blocks(work, parts, "renorm-cauchy"))
    return [float(v) for v in np.mean(d2, axis=0)]
