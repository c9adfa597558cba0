"""Exact Benjamin-Ono flow in Birkhoff coordinates and its truncations.

Each mode rotates at a frequency fixed by the conserved actions ``|z_k|^2``:

    beta_{N,n}(z) = n^2 - 2 sum_{k<=N} min(n, k) |z_k|^2.

The sum is evaluated in O(N) as ``sum_{k<=n} k|z_k|^2 + n sum_{k>n} |z_k|^2``,
which has only nonnegative terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateStepError
from .state import BirkhoffState, as_state, h_norm


@dataclass(frozen=True)
class FlowSpec:
    N: int
    t: float

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError(f"truncation level must be >= 1, got {self.N}")
        if not np.isfinite(self.t):
            raise ValueError("flow time must be finite")


def _abs2(c: np.ndarray) -> np.ndarray:
    return c.real * c.real + c.imag * c.imag


def phase_vector(z, N: int) -> np.ndarray:
    """Frequencies ``beta_{N,n}`` of the mode-``N`` truncated flow, ``n = 1..N``."""
    if N < 1:
        raise ValueError(f"truncation level must be >= 1, got {N}")
    a = _abs2(as_state(z).padded(N))
    n = np.arange(1, N + 1, dtype=np.float64)
    weighted = np.cumsum(n * a)
    suffix = np.cumsum(a[::-1])[::-1]
    tail = np.append(suffix[1:], 0.0)
    return n * n - 2.0 * (weighted + n * tail)


def phase_vector_naive(z, N: int) -> np.ndarray:
    """O(N^2) double loop for the same frequencies; kept as an oracle."""
    a = _abs2(as_state(z).padded(N))
    beta = np.empty(N)
    for n in range(1, N + 1):
        acc = 0.0
        for k in range(1, N + 1):
            acc += min(n, k) * a[k - 1]
        beta[n - 1] = n * n - 2.0 * acc
    return beta


def flow_truncated(z, spec: FlowSpec) -> BirkhoffState:
    """Apply the truncated flow to ``project(z, N)``.

    The output has length ``N``; modes missing from ``z`` stay zero.
    """
    c = as_state(z).padded(spec.N)
    return BirkhoffState(kernels.flow_rows(c[None, :], spec.t)[0])


def flow_full(z, t: float) -> BirkhoffState:
    """Untruncated flow; exact for a finitely supported state."""
    z = as_state(z)
    return flow_truncated(z, FlowSpec(z.length, t))


def hamiltonian(z, N: int) -> float:
    """``-1/2 sum k^2 A_k + 1/2 sum_k (sum_{j>=k} A_j)^2`` with ``A_k = |z_k|^2``."""
    if N < 1:
        raise ValueError(f"truncation level must be >= 1, got {N}")
    a = _abs2(as_state(z).padded(N))
    k = np.arange(1, N + 1, dtype=np.float64)
    suffix = np.cumsum(a[::-1])[::-1]
    return float(-0.5 * np.sum(k * k * a) + 0.5 * np.sum(suffix * suffix))


def hamiltonian_gradient(z, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(dH/dxi_n, dH/deta_n)`` for ``z_n = xi_n + i eta_n``."""
    c = as_state(z).padded(N)
    beta = phase_vector(c, N)
    return -beta * c.real, -beta * c.imag


def vector_field(z, N: int) -> BirkhoffState:
    """Right-hand side ``i beta_{N,n}(z) z_n`` of the truncated system."""
    c = as_state(z).padded(N)
    return BirkhoffState(1j * phase_vector(c, N) * c)


def _real_coords(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, c.imag])


def _from_real(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def flow_jacobian(z, spec: FlowSpec, fd_step: float) -> np.ndarray:
    """Central-difference Jacobian of ``(xi, eta) -> flow_truncated`` (2N x 2N).

    Each column is divided by the step actually realised in floating point,
    so at ``t = 0`` the matrix is exactly the identity.
    """
    if not fd_step > 0:
        raise DegenerateStepError(f"finite-difference step must be positive, got {fd_step}")
    x0 = _real_coords(as_state(z).padded(spec.N))
    dim = x0.size
    jac = np.empty((dim, dim))
    for j in range(dim):
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += fd_step
        xm[j] -= fd_step
        if xp[j] == xm[j]:
            raise DegenerateStepError(f"step {fd_step:g} vanishes against coordinate {x0[j]:g}")
        fp = _real_coords(flow_truncated(_from_real(xp), spec).coeffs)
        fm = _real_coords(flow_truncated(_from_real(xm), spec).coeffs)
        jac[:, j] = (fp - fm) / (xp[j] - xm[j])
    return jac


def flow_jacobian_det(z, spec: FlowSpec, fd_step: float = 1e-6, max_modes: int = 8) -> float:
    """Determinant of the finite-difference flow Jacobian (LU, partial pivoting)."""
    if spec.N > max_modes:
        raise ValueError(f"Jacobian check limited to N <= {max_modes}, got {spec.N}")
    jac = flow_jacobian(z, spec, fd_step)
    if not np.all(np.isfinite(jac)):
        raise DegenerateStepError(f"finite-difference step {fd_step:g} produced a non-finite Jacobian")
    sign, logdet = np.linalg.slogdet(jac)
    if sign == 0 or not np.isfinite(logdet) or logdet < np.log(1e-8):
        raise DegenerateStepError("finite-difference Jacobian is numerically singular")
    return float(sign * np.exp(logdet))


def convergence_profile(z, t: float, s: float, N_list) -> list[float]:
    """``||flow_full(z, t) - flow_truncated(z, N, t)||_{h^s}`` for each ``N``."""
    z = as_state(z)
    if s < 0:
        raise ValueError("convergence profile is defined for s >= 0")
    full = flow_full(z, t).coeffs
    out = []
    for N in N_list:
        if not 1 <= N <= z.length:
            raise ValueError(f"N={N} outside 1..{z.length}")
        trunc = flow_truncated(z, FlowSpec(N, t)).padded(z.length)
        out.append(h_norm(full - trunc, s))
    return out


__all__ = [
    "FlowSpec",
    "phase_vector",
    "phase_vector_naive",
    "flow_truncated",
    "flow_full",
    "hamiltonian",
    "hamiltonian_gradient",
    "vector_field",
    "flow_jacobian",
    "flow_jacobian_det",
    "convergence_profile",
]
