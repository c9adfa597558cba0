"""Finite Birkhoff-coordinate states and the weighted sequence norms.

A state ``(z_1, ..., z_M)`` stands for the infinite sequence with ``z_n = 0``
for ``n > M``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class BirkhoffState:
    """Coefficients ``z_n``, ``n = 1..M``, zero-extended beyond ``M``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size < 1:
            raise ValueError("a state needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("state coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def length(self) -> int:
        return self.coeffs.size

    def __len__(self) -> int:
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return self.coeffs if dtype is None else self.coeffs.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BirkhoffState):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self) -> str:
        return f"BirkhoffState(length={self.length}, coeffs={self.coeffs!r})"

    def padded(self, length: int) -> np.ndarray:
        """Coefficients zero-extended (or cut) to exactly ``length`` entries."""
        out = np.zeros(length, dtype=np.complex128)
        m = min(length, self.length)
        out[:m] = self.coeffs[:m]
        return out


def as_state(z) -> BirkhoffState:
    return z if isinstance(z, BirkhoffState) else BirkhoffState(z)


def sobolev_weights(length: int, s: float) -> np.ndarray:
    """``n^(2s)`` for ``n = 1..length`` via ``exp(2 s log n)``; exactly 1 at ``n = 1``."""
    n = np.arange(1, length + 1, dtype=np.float64)
    return np.exp(2.0 * float(s) * np.log(n))


def h_norm(z, s: float) -> float:
    """Weighted norm ``(sum_n n^(2s) |z_n|^2)^(1/2)``."""
    c = as_state(z).coeffs
    abs2 = c.real * c.real + c.imag * c.imag
    return float(np.sqrt(np.sum(sobolev_weights(c.size, s) * abs2)))


def h_norm_rows(z: np.ndarray, s: float) -> np.ndarray:
    """Row-wise :func:`h_norm` for an ensemble array of shape (samples, modes)."""
    z = np.atleast_2d(z)
    abs2 = z.real * z.real + z.imag * z.imag
    return np.sqrt(abs2 @ sobolev_weights(z.shape[1], s))


def project(z, N: int) -> BirkhoffState:
    """Orthogonal projection onto the first ``N`` modes."""
    if N < 1:
        raise ValueError(f"projection level must be >= 1, got {N}")
    c = as_state(z).coeffs
    return BirkhoffState(c[: min(N, c.size)])


def tail_norm(z, N: int, s: float) -> float:
    """Norm of the part of ``z`` living on modes ``n > N``."""
    if N < 1:
        raise ValueError(f"projection level must be >= 1, got {N}")
    c = as_state(z).coeffs
    if N >= c.size:
        return 0.0
    w = sobolev_weights(c.size, s)[N:]
    t = c[N:]
    return float(np.sqrt(np.sum(w * (t.real * t.real + t.imag * t.imag))))


# --- serialization -------------------------------------------------------------

def fmt(x: float) -> str:
    """Decimal encoding with 17 significant digits (round-trips every double)."""
    return format(float(x), ".17g")


def state_to_csv(z) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "re", "im"])
    for n, v in enumerate(as_state(z).coeffs, start=1):
        w.writerow([n, fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def state_from_csv(text: str) -> BirkhoffState:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("state CSV has no rows")
    if set(rows[0]) != {"n", "re", "im"}:
        raise ValueError("state CSV must have columns n,re,im")
    idx = [int(r["n"]) for r in rows]
    if sorted(idx) != list(range(1, len(idx) + 1)):
        raise ValueError("state CSV indices must be 1..M without gaps")
    c = np.zeros(len(idx), dtype=np.complex128)
    for n, r in zip(idx, rows):
        c[n - 1] = complex(float(r["re"]), float(r["im"]))
    return BirkhoffState(c)


def state_to_json(z) -> str:
    pairs = ", ".join(f"[{fmt(v.real)}, {fmt(v.imag)}]" for v in as_state(z).coeffs)
    return f"[{pairs}]"


def state_from_json(text: str) -> BirkhoffState:
    data = json.loads(text)
    if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
        raise ValueError("state JSON must be an array of [re, im] pairs")
    return BirkhoffState([complex(float(a), float(b)) for a, b in data])


def load_state(path) -> BirkhoffState:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        return state_from_json(text)
    return state_from_csv(text)
