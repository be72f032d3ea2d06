"""Transportation maps between pmfs, earth mover distance, and the map
surgery used by the finite-n theory: perturbing a map to a nearby row
marginal without increasing distortion, and quantizing a map to rational
entries with denominator n.
"""
from __future__ import annotations

import io
from typing import Iterable

import numpy as np

from .lp import simplex_solve
from .pmf import Pmf

__all__ = [
    "CostMatrix",
    "TransportMap",
    "row_marginal",
    "col_marginal",
    "map_distortion",
    "map_distance",
    "is_admissible",
    "emd",
    "perturb_map",
    "quantize_map",
]

_MASS_TOL = 1e-10


class CostMatrix:
    """Per-symbol distortion d(i, j) >= 0 with zero diagonal, symmetric.

    Symmetry is required by the security-margin symmetry argument; the
    triangle inequality is *not* required — `is_metric()` reports whether it
    holds so downstream output can flag non-metric costs.
    """

    __slots__ = ("_d",)

    def __init__(self, d: Iterable[Iterable[float]]):
        m = np.asarray(d, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError("cost matrix must be square")
        if np.any(np.isnan(m)) or np.any(np.isinf(m)):
            raise ValueError("cost entries must be finite")
        if np.any(m < 0):
            raise ValueError("cost entries must be >= 0")
        if np.any(np.diagonal(m) != 0.0):
            raise ValueError("cost diagonal must be 0")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
            raise ValueError("cost matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "_d", m)

    @property
    def d(self) -> np.ndarray:
        return self._d

    @property
    def k(self) -> int:
        return self._d.shape[0]

    def __setattr__(self, name, value):
        raise AttributeError("CostMatrix is immutable")

    def is_metric(self) -> bool:
        """True when d also satisfies the triangle inequality."""
        d = self._d
        for k in range(self.k):
            if np.any(d > d[:, k:k + 1] + d[k:k + 1, :] + 1e-12):
                return False
        return True

    @classmethod
    def absolute(cls, k: int) -> "CostMatrix":
        """The default cost d(i, j) = |i - j|."""
        idx = np.arange(k)
        return cls(np.abs(idx[:, None] - idx[None, :]).astype(float))

    @classmethod
    def from_csv(cls, text: str) -> "CostMatrix":
        rows = []
        for line in io.StringIO(text):
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
        return cls(rows)

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(v) for v in row) for row in self._d.tolist()) + "\n"


class TransportMap:
    """A joint mass-movement matrix S(i, j) >= 0 with total mass 1."""

    __slots__ = ("_s",)

    def __init__(self, s: Iterable[Iterable[float]]):
        m = np.asarray(s, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transport map must be a square matrix")
        if np.any(m < -_MASS_TOL):
            raise ValueError("transport entries must be >= 0")
        m = np.maximum(m, 0.0)
        if abs(m.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"transport mass must be 1 within {_MASS_TOL}, got {m.sum()!r}")
        m.flags.writeable = False
        object.__setattr__(self, "_s", m)

    @property
    def s(self) -> np.ndarray:
        return self._s

    @property
    def k(self) -> int:
        return self._s.shape[0]

    def __setattr__(self, name, value):
        raise AttributeError("TransportMap is immutable")

    def __repr__(self) -> str:
        return f"TransportMap({self._s.tolist()})"

    @classmethod
    def diagonal(cls, p: Pmf) -> "TransportMap":
        return cls(np.diag(p.probs))


def row_marginal(S: TransportMap) -> Pmf:
    """The source pmf S_Y (what the map transports from)."""
    return Pmf(S.s.sum(axis=1))


def col_marginal(S: TransportMap) -> Pmf:
    """The attacked pmf S_Z (what the map transports to)."""
    return Pmf(S.s.sum(axis=0))


def map_distortion(S: TransportMap, cost: CostMatrix) -> float:
    if S.k != cost.k:
        raise ValueError(f"dimension mismatch: map {S.k}, cost {cost.k}")
    return float(np.sum(S.s * cost.d))


def map_distance(S1: TransportMap, S2: TransportMap) -> float:
    """Entrywise L1 distance between maps (the d_s of the perturbation lemma)."""
    if S1.k != S2.k:
        raise ValueError("dimension mismatch")
    return float(np.abs(S1.s - S2.s).sum())


def is_admissible(S: TransportMap, P: Pmf, L: float, cost: CostMatrix) -> bool:
    """Row marginal equals P (within 1e-9) and distortion <= L (within 1e-12)."""
    if S.k != P.k or S.k != cost.k:
        raise ValueError("dimension mismatch")
    if float(np.abs(S.s.sum(axis=1) - P.probs).max()) > 1e-9:
        return False
    return map_distortion(S, cost) <= L + 1e-12


def emd(P: Pmf, V: Pmf, cost: CostMatrix) -> tuple[float, TransportMap]:
    """Earth mover distance: min <S, d> over maps with row marginal P and
    column marginal V. Solved exactly by the in-repo simplex (deterministic
    Bland pivoting); returns (value, optimal map).
    """
    k = P.k
    if V.k != k or cost.k != k:
        raise ValueError(f"dimension mismatch: {P.k}, {V.k}, cost {cost.k}")
    # variables S_ij flattened row-major; constraints: K row sums, K col sums
    A = np.zeros((2 * k, k * k))
    b = np.concatenate([P.probs, V.probs])
    for i in range(k):
        A[i, i * k:(i + 1) * k] = 1.0
        A[k + i, i::k] = 1.0
    x, val = simplex_solve(cost.d.ravel(), A, b)
    s = x.reshape(k, k)
    # clean up simplex round-off so the map validates
    s = np.maximum(s, 0.0)
    s /= s.sum()
    return max(val, 0.0), TransportMap(s)


def perturb_map(S_PV: TransportMap, P_prime: Pmf, cost: CostMatrix) -> TransportMap:
    """Rebuild a map around a new row marginal without increasing distortion.

    Rows that must shrink lose their most expensive mass first (ties broken
    toward lower column index); rows that must grow gain mass on the diagonal
    at zero cost. Consequently:

      * row marginal of the result is exactly P_prime,
      * entrywise distance to the input is at most l1(P, P_prime),
      * distortion does not increase,
      * the column marginal moves by at most l1(P, P_prime) in L1.
    """
    k = S_PV.k
    if P_prime.k != k or cost.k != k:
        raise ValueError("dimension mismatch")
    s = S_PV.s.copy()
    p = s.sum(axis=1)
    tau = p - P_prime.probs
    for i in range(k):
        t = tau[i]
        if t <= 0.0:
            s[i, i] += -t
        else:
            # remove t of mass, most expensive destinations first
            order = np.lexsort((np.arange(k), -cost.d[i]))
            for j in order:
                if t <= 0.0:
                    break
                take = min(s[i, j], t)
                s[i, j] -= take
                t -= take
    return TransportMap(s)


def _largest_remainder(values: np.ndarray, total: int) -> np.ndarray:
    """Round nonnegative reals to integers with the given sum; ties to lower index."""
    base = np.floor(values).astype(np.int64)
    deficit = int(total - base.sum())
    if deficit > 0:
        rem = values - base
        order = np.lexsort((np.arange(values.size), -rem))
        base[order[:deficit]] += 1
    elif deficit < 0:
        # possible only through float round-off; shave from the largest entries
        order = np.lexsort((np.arange(values.size), -base))
        for j in order[: -deficit]:
            base[j] -= 1
    return base


def quantize_map(S: TransportMap, n: int) -> TransportMap:
    """Round a map to entries with denominator n, keeping row sums n-types.

    Two-stage largest-remainder rounding: the row sums are rounded to a type
    with denominator n first, then each row is rounded to match its quantized
    sum. Entrywise error stays below 2K^2/n and the distortion increase below
    (max cost) * K^2 / n; an already n-quantized map is returned unchanged.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = S.k
    scaled = S.s * n
    row_counts = _largest_remainder(scaled.sum(axis=1), n)
    q = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        q[i] = _largest_remainder(scaled[i], int(row_counts[i]))
    return TransportMap(q / n)
