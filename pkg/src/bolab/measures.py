"""Radial laws, amplitude sequences and the product measures built from them.

A draw from the truncated measure is ``(a_1 g_1, ..., a_N g_N)`` with the
``g_n`` independent and distributed by a rotation-invariant law on the plane.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import kernels
from .errors import QuadratureError
from .parallel import as_pool, blocks, rows_per_block
from .rng import CounterRNG
from .state import BirkhoffState, as_state, h_norm_rows, sobolev_weights, tail_norm

LAW_FAMILIES = ("gaussian", "radial_exponential")
AMPLITUDE_RULES = ("power_log", "power", "explicit")


@dataclass(frozen=True)
class RadialLaw:
    """Rotation-invariant law on the complex plane with full support.

    ``gaussian``: density ``exp(-|z|^2 / c^2) / (pi c^2)``.
    ``radial_exponential``: density ``exp(-|z| / c) / (2 pi c^2)``; the radius
    is Gamma(2)-distributed.  ``c`` is ``scale``.
    """

    family: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in LAW_FAMILIES:
            raise ValueError(f"unknown radial law {self.family!r}; choose from {LAW_FAMILIES}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("law scale must be positive and finite")

    @classmethod
    def gaussian(cls, scale: float = 1.0) -> "RadialLaw":
        return cls("gaussian", scale)

    @classmethod
    def radial_exponential(cls, scale: float | None = None) -> "RadialLaw":
        """Radial exponential law; by default scaled to unit second moment."""
        return cls("radial_exponential", 1.0 / math.sqrt(6.0) if scale is None else scale)

    @classmethod
    def unit(cls, family: str) -> "RadialLaw":
        """The member of ``family`` with ``E|g|^2 = 1``."""
        return cls.gaussian() if family == "gaussian" else cls.radial_exponential()

    @property
    def code(self) -> int:
        return kernels.GAUSSIAN if self.family == "gaussian" else kernels.RADIAL_EXPONENTIAL

    def radius_moment(self, k: float) -> float:
        """``E |g|^k``."""
        if self.family == "gaussian":
            return self.scale ** k * math.gamma(1.0 + k / 2.0)
        return self.scale ** k * math.gamma(2.0 + k)

    @property
    def second_moment(self) -> float:
        return self.radius_moment(2)

    @property
    def fourth_moment(self) -> float:
        """``int (x^4 + y^4) f``; equals ``3/4 E|g|^4`` for a radial law."""
        return 0.75 * self.radius_moment(4)

    @property
    def action_variance(self) -> float:
        """``Var |g|^2 = E|g|^4 - (E|g|^2)^2``."""
        return self.radius_moment(4) - self.second_moment ** 2

    def density(self, x, y):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        c = self.scale
        if self.family == "gaussian":
            return np.exp(-r2 / c ** 2) / (np.pi * c ** 2)
        return np.exp(-np.sqrt(r2) / c) / (2.0 * np.pi * c ** 2)

    def radius_pdf(self, r):
        r = np.asarray(r, dtype=np.float64)
        c = self.scale
        if self.family == "gaussian":
            return 2.0 * r / c ** 2 * np.exp(-(r / c) ** 2)
        return r / c ** 2 * np.exp(-r / c)

    def radius_cdf(self, r):
        r = np.asarray(r, dtype=np.float64)
        c = self.scale
        if self.family == "gaussian":
            return -np.expm1(-(r / c) ** 2)
        return 1.0 - np.exp(-r / c) * (1.0 + r / c)

    def disk_mass(self, radius: float = 1.0) -> float:
        """Probability that ``|g| <= radius``; lies strictly in (0, 1)."""
        return float(self.radius_cdf(radius))

    def describe(self) -> dict:
        return {"family": self.family, "scale": self.scale}


@dataclass(frozen=True)
class AmplitudeSequence:
    """Deterministic nonzero amplitudes ``a_n``.

    ``power_log``: ``n^-p / log(n+1)^q``; ``power``: ``n^-p``;
    ``explicit``: a finite list of values.
    """

    rule: str = "power"
    p: float = 1.0
    q: float = 0.0
    explicit_values: tuple = field(default=())

    def __post_init__(self):
        if self.rule not in AMPLITUDE_RULES:
            raise ValueError(f"unknown amplitude rule {self.rule!r}; choose from {AMPLITUDE_RULES}")
        if self.rule == "explicit":
            vals = np.asarray(self.explicit_values, dtype=np.float64)
            if vals.size == 0 or np.any(vals == 0) or not np.all(np.isfinite(vals)):
                raise ValueError("explicit amplitudes must be finite and nonzero")
            object.__setattr__(self, "explicit_values", tuple(float(v) for v in vals))
        elif not (np.isfinite(self.p) and np.isfinite(self.q)):
            raise ValueError("amplitude exponents must be finite")
        if self.rule == "power" and self.q != 0:
            raise ValueError("the power rule takes no log exponent")

    @classmethod
    def power(cls, p: float) -> "AmplitudeSequence":
        return cls("power", p, 0.0)

    @classmethod
    def power_log(cls, p: float, q: float = 1.0) -> "AmplitudeSequence":
        return cls("power_log", p, q)

    @classmethod
    def explicit(cls, values) -> "AmplitudeSequence":
        return cls("explicit", 0.0, 0.0, tuple(values))

    def values(self, N: int) -> np.ndarray:
        n = np.arange(1, N + 1, dtype=np.float64)
        if self.rule == "explicit":
            if N > len(self.explicit_values):
                raise ValueError(f"only {len(self.explicit_values)} explicit amplitudes, {N} requested")
            return np.array(self.explicit_values[:N])
        out = np.exp(-self.p * np.log(n))
        if self.rule == "power_log" and self.q != 0:
            out = out / np.log(n + 1.0) ** self.q
        return out

    def series_diverges(self, power: float, sigma: float = 0.0) -> bool | None:
        """Whether ``sum_n |a_n|^power n^(2 sigma)`` diverges; None if undecidable."""
        if self.rule == "explicit":
            return None
        e = 2.0 * sigma - power * self.p
        r = power * self.q
        if abs(e + 1.0) <= 1e-12:
            return r <= 1.0
        return e > -1.0

    def describe(self) -> dict:
        if self.rule == "explicit":
            return {"rule": "explicit", "values": list(self.explicit_values)}
        return {"rule": self.rule, "p": self.p, "q": self.q}


# --- sampling ---------------------------------------------------------------------

def _as_rng(rng) -> CounterRNG:
    return rng if isinstance(rng, CounterRNG) else CounterRNG(int(rng))


def sample_radial(law: RadialLaw, rng, size: int | None = None, start: int = 0):
    """Draws of ``g`` for sample indices ``start, start+1, ...`` (first mode of each row).

    Returns a complex scalar when ``size`` is None.
    """
    rng = _as_rng(rng)
    count = 1 if size is None else int(size)
    pool = as_pool(1)
    parts = blocks(count, rows_per_block(1))
    out = pool.map_blocks(
        lambda s0, c: kernels.sample_block(rng.key, start + s0, c, np.ones(1), law.code, law.scale)[:, 0],
        parts,
    )
    g = np.concatenate(out) if out else np.empty(0, dtype=np.complex128)
    return complex(g[0]) if size is None else g


def sample_ensemble(amps: AmplitudeSequence, law: RadialLaw, N: int, M: int, rng, start: int = 0,
                    workers=1, label: str = "ensemble") -> np.ndarray:
    """``M`` independent draws from the mode-``N`` measure, shape ``(M, N)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = _as_rng(rng)
    a = amps.values(N)
    parts = blocks(int(M), rows_per_block(N))
    out = as_pool(workers).map_blocks(
        lambda s0, c: kernels.sample_block(rng.key, start + s0, c, a, law.code, law.scale), parts, label
    )
    return np.concatenate(out) if out else np.empty((0, N), dtype=np.complex128)


def sample_state(amps: AmplitudeSequence, law: RadialLaw, N: int, rng, index: int = 0) -> BirkhoffState:
    """One draw from the mode-``N`` measure (sample ``index`` of the stream)."""
    return BirkhoffState(sample_ensemble(amps, law, N, 1, rng, start=index)[0])


# --- tail-mass product ----------------------------------------------------------------

def _quad_factor(law: RadialLaw, a: float, rtol: float = 1e-10) -> float:
    """``E exp(-a |g|^2)`` by adaptive quadrature of the radius density."""
    if a == 0.0:
        return 1.0
    scales = sorted({1.0 / math.sqrt(a), law.scale})
    edges = [0.0]
    for sc in scales:
        for m in (0.5, 2.0, 8.0):
            edges.append(m * sc)
    edges = sorted(set(edges))

    def f(r):
        return math.exp(-a * r * r) * float(law.radius_pdf(r))

    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        # convergence is judged below from the returned error estimates
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges, edges[1:] + [np.inf]):
            v, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
            total += v
            err += e
    if not np.isfinite(total) or total <= 0 or err > rtol * total:
        raise QuadratureError(f"radial integral for a={a:g} not converged (estimate {total:g}, error {err:g})")
    return total


def tail_mass_factors(amps: AmplitudeSequence, sigma: float, N: int, law: RadialLaw,
                      method: str = "auto") -> np.ndarray:
    """Factors ``E exp(-|a_n|^2 n^(2 sigma) |g|^2)`` for ``n = 1..N``.

    ``method``: ``closed`` (Gaussian only), ``quad``, or ``auto``.
    """
    if N == 0:
        return np.empty(0)
    coef = amps.values(N) ** 2 * sobolev_weights(N, sigma)
    if method == "auto":
        method = "closed" if law.family == "gaussian" else "quad"
    if method == "closed":
        if law.family != "gaussian":
            raise ValueError("closed-form factors exist only for the Gaussian law")
        return 1.0 / (1.0 + coef * law.scale ** 2)
    if method == "quad":
        return np.array([_quad_factor(law, float(c)) for c in coef])
    raise ValueError(f"unknown method {method!r}")


def log_tail_mass_product(amps, sigma, N, law, method="auto") -> float:
    if N == 0:
        return 0.0
    if (method == "auto" and law.family == "gaussian") or method == "closed":
        if law.family != "gaussian":
            raise ValueError("closed-form factors exist only for the Gaussian law")
        coef = amps.values(N) ** 2 * sobolev_weights(N, sigma) * law.scale ** 2
        return float(-np.sum(np.log1p(coef)))
    return float(np.sum(np.log(tail_mass_factors(amps, sigma, N, law, method))))


def tail_mass_product(amps: AmplitudeSequence, sigma: float, N: int, law: RadialLaw,
                      method: str = "auto") -> float:
    """``E exp(-||pi_N z||^2_{h^sigma})`` under the product measure, as a product over modes."""
    return math.exp(log_tail_mass_product(amps, sigma, N, law, method))


def tail_mass_profile(amps, sigma, N_list, law, method="auto") -> list[float]:
    """Products at each ``N`` of ``N_list``; one pass over ``max(N_list)`` factors."""
    N_list = [int(n) for n in N_list]
    if not N_list:
        return []
    n_max = max(N_list)
    if law.family == "gaussian" and method in ("auto", "closed"):
        coef = amps.values(n_max) ** 2 * sobolev_weights(n_max, sigma) * law.scale ** 2
        logs = -np.cumsum(np.log1p(coef))
    else:
        logs = np.cumsum(np.log(tail_mass_factors(amps, sigma, n_max, law, method)))
    return [1.0 if n == 0 else float(np.exp(logs[n - 1])) for n in N_list]


# --- series classification --------------------------------------------------------------

@dataclass(frozen=True)
class SigmaClassification:
    verdict: str  # "diverges" | "converges" | "undecided"
    grid: tuple
    partial_sums: tuple


def dyadic_grid(N_max: int) -> list[int]:
    grid = []
    n = 1
    while n < N_max:
        grid.append(n)
        n *= 2
    grid.append(int(N_max))
    return grid


def classify_sigma(amps: AmplitudeSequence, sigma: float, N_max: int) -> SigmaClassification:
    """Decide whether ``sum |a_n|^2 n^(2 sigma)`` diverges and report dyadic partial sums."""
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    grid = dyadic_grid(N_max)
    if amps.rule == "explicit":
        N_max = min(N_max, len(amps.explicit_values))
        grid = [g for g in grid if g <= N_max]
    terms = amps.values(N_max) ** 2 * sobolev_weights(N_max, sigma)
    partial = np.cumsum(terms)
    flag = amps.series_diverges(2.0, sigma)
    verdict = "undecided" if flag is None else ("diverges" if flag else "converges")
    return SigmaClassification(verdict, tuple(grid), tuple(float(partial[g - 1]) for g in grid))


# --- ball probabilities -------------------------------------------------------------------

@dataclass(frozen=True)
class BallEstimate:
    estimate: float
    lower: float
    upper: float
    hits: int
    samples: int
    flag: str | None = None  # "increase N" when the center's tail already exceeds eps


def ball_probability(amps, law, center, eps: float, s: float, N: int, M_samples: int, rng,
                     workers=1) -> BallEstimate:
    """Monte-Carlo ``P(||z - center||_{h^s} < eps)`` under the mode-``N`` measure, Wilson 95% CI."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    center = as_state(center)
    length = max(N, center.length)
    c = center.padded(length)
    rng = _as_rng(rng)
    a = amps.values(N)
    parts = blocks(int(M_samples), rows_per_block(length))

    def count_hits(start, count):
        z = np.zeros((count, length), dtype=np.complex128)
        z[:, :N] = kernels.sample_block(rng.key, start, count, a, law.code, law.scale)
        return int(np.count_nonzero(h_norm_rows(z - c[None, :], s) < eps))

    hits = sum(as_pool(workers).map_blocks(count_hits, parts, "ball"))
    ci = stats.binomtest(hits, int(M_samples)).proportion_ci(confidence_level=0.95, method="wilson")
    flag = "increase N" if tail_norm(center, N, s) >= eps else None
    return BallEstimate(hits / M_samples, float(ci.low), float(ci.high), hits, int(M_samples), flag)
