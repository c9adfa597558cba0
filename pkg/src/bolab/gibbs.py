"""Gibbs-type densities on the truncated phase space and weighted statistics.

The density is ``chi(sum n|z_n|^2 - c_N) * exp(sum_k (sum_{j>=k} |z_j|^2)^2)``.
It depends on the actions only, so the flow leaves it unchanged exactly.
Weights are kept in log space throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import DegenerateWeightsError
from .harness import TestFunctional, builtin_functionals, paired_z, Z_THRESHOLD
from .measures import AmplitudeSequence, RadialLaw, _as_rng
from .parallel import as_pool, blocks, rows_per_block
from .state import as_state


@dataclass(frozen=True)
class GibbsSpec:
    """Truncation, cutoff profile and centring constant of the density.

    ``cutoff`` is ``"hat"`` (``1 - |x|/a`` on ``[-a, a]``) or ``"plateau"``
    (equal to 1 on ``[-a, a]`` and falling linearly to 0 over ``ramp`` on each side).
    ``c_N`` defaults to the harmonic number ``sum_{k<=N} 1/k``.
    """

    N: int
    cutoff_a: float = 0.5
    cutoff: str = "hat"
    ramp: float = 1.0
    c_N_values: tuple | None = field(default=None)

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if not (np.isfinite(self.cutoff_a) and self.cutoff_a > 0):
            raise ValueError("cutoff half-width must be positive and finite")
        if self.cutoff not in ("hat", "plateau"):
            raise ValueError(f"unknown cutoff profile {self.cutoff!r}")
        if not (np.isfinite(self.ramp) and self.ramp > 0):
            raise ValueError("plateau ramp must be positive and finite")
        if self.c_N_values is not None:
            vals = tuple(float(v) for v in self.c_N_values)
            if len(vals) < self.N or not np.all(np.isfinite(vals)):
                raise ValueError(f"explicit c_N list needs {self.N} finite entries")
            object.__setattr__(self, "c_N_values", vals)

    @property
    def c_N(self) -> float:
        if self.c_N_values is not None:
            return self.c_N_values[self.N - 1]
        return float(np.sum(1.0 / np.arange(1, self.N + 1)))

    def chi(self, x):
        x = np.abs(np.asarray(x, dtype=np.float64))
        if self.cutoff == "hat":
            return np.maximum(0.0, 1.0 - x / self.cutoff_a)
        return np.clip(1.0 - (x - self.cutoff_a) / self.ramp, 0.0, 1.0)


@dataclass(frozen=True)
class GibbsWeight:
    log_weight: float
    cutoff_value: float

    @property
    def excluded(self) -> bool:
        return self.cutoff_value == 0.0

    @property
    def log_density(self) -> float:
        return -np.inf if self.excluded else float(np.log(self.cutoff_value) + self.log_weight)


def gibbs_terms_rows(z: np.ndarray, spec: GibbsSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cutoff argument, cutoff value and log weight for each row of ``z``."""
    z = np.atleast_2d(z)
    if z.shape[1] < spec.N:
        raise ValueError(f"states need at least {spec.N} modes, got {z.shape[1]}")
    a = z[:, : spec.N].real ** 2 + z[:, : spec.N].imag ** 2
    n = np.arange(1, spec.N + 1, dtype=np.float64)
    arg = a @ n - spec.c_N
    suffix = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
    return arg, spec.chi(arg), np.sum(suffix * suffix, axis=1)


def gibbs_log_density(z, spec: GibbsSpec) -> GibbsWeight:
    """Cutoff value and log of the exponential factor for a single state."""
    _, chi, lw = gibbs_terms_rows(as_state(z).coeffs[None, :], spec)
    return GibbsWeight(float(lw[0]), float(chi[0]))


@dataclass(frozen=True)
class GibbsFunctionalReport:
    functional: str
    weighted_mean: float
    mean_std_error: float
    z_mean: float | None          # against 0; only for functionals centred by rotation
    weighted_mean_after: float
    diff_std_error: float
    z_paired: float

    @property
    def verdict(self) -> str:
        ok = abs(self.z_paired) <= Z_THRESHOLD
        if self.z_mean is not None:
            ok = ok and abs(self.z_mean) <= Z_THRESHOLD
        return "pass" if ok else "fail"

    def as_dict(self) -> dict:
        return {
            "id": self.functional,
            "mean_before": self.weighted_mean,
            "mean_after": self.weighted_mean_after,
            "std_error": self.diff_std_error,
            "z": self.z_paired,
            "mean_std_error": self.mean_std_error,
            "z_mean": self.z_mean,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class GibbsReport:
    N: int
    t: float
    samples: int
    retained: int
    ess: float
    seed: int
    functionals: tuple

    @property
    def passed(self) -> bool:
        return all(f.verdict == "pass" for f in self.functionals)


def gibbs_weighted_statistics(spec: GibbsSpec, functionals: Sequence[TestFunctional] | None = None,
                              M_samples: int = 100_000, rng=0, t: float = 1.0,
                              amps: AmplitudeSequence | None = None, law: RadialLaw | None = None,
                              workers=1, min_ess: float = 50.0) -> GibbsReport:
    """Self-normalised importance estimates of weighted means before and after the flow."""
    if M_samples < 10_000:
        raise ValueError("weighted statistics need at least 10^4 samples")
    functionals = list(functionals) if functionals is not None else builtin_functionals()
    amps = amps if amps is not None else AmplitudeSequence.power(1.0)
    law = law if law is not None else RadialLaw.gaussian()
    rng = _as_rng(rng)
    N = spec.N
    a = amps.values(N)
    n_out = min(N, max(f.arity for f in functionals))

    def work(start, count):
        z = kernels.sample_block(rng.key, start, count, a, law.code, law.scale)
        _, chi, lw = gibbs_terms_rows(z, spec)
        zt = kernels.flow_rows(z, t, n_out)
        before = np.stack([f.rows(z) for f in functionals])
        after = np.stack([f.rows(zt) for f in functionals])
        return chi, lw, before, after

    out = as_pool(workers).map_blocks(work, blocks(int(M_samples), rows_per_block(N)), "gibbs")
    chi = np.concatenate([o[0] for o in out])
    lw = np.concatenate([o[1] for o in out])
    before = np.concatenate([o[2] for o in out], axis=1)
    after = np.concatenate([o[3] for o in out], axis=1)

    keep = chi > 0
    if not np.any(keep):
        raise DegenerateWeightsError(0.0, min_ess)
    logw = np.full(chi.shape, -np.inf)
    logw[keep] = np.log(chi[keep]) + lw[keep]
    w = np.exp(logw - logsumexp(logw))
    ess = float(1.0 / np.sum(w * w))
    if ess < min_ess:
        raise DegenerateWeightsError(ess, min_ess)

    reports = []
    for fi, f in enumerate(functionals):
        fb, fa = before[fi], after[fi]
        mean = float(np.sum(w * fb))
        mean_se = float(np.sqrt(np.sum(w * w * (fb - mean) ** 2)))
        z_mean = mean / mean_se if (f.centered and mean_se > 0) else None
        _, se, z = paired_z(fb, fa, w)
        reports.append(GibbsFunctionalReport(f.id, mean, mean_se, z_mean, float(np.sum(w * fa)), se, z))
    return GibbsReport(N, float(t), int(M_samples), int(np.count_nonzero(keep)), ess, rng.seed, tuple(reports))
