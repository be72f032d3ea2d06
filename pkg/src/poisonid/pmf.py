"""Probability mass functions over finite alphabets, empirical types, and divergences.

All logarithms are base 2 and every exponent in the library is reported in bits.
The conventions 0*log(0/q) = 0 and p*log(p/0) = +inf (for p > 0) are applied
throughout, so KL divergences are extended reals and never raise.
"""
from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Pmf",
    "EmpiricalType",
    "empirical_type",
    "kl_divergence",
    "l1_distance",
    "h_c",
    "delta_n",
]

# Constructors renormalize anything whose mass is within this distance of 1...
_RENORM_TOL = 1e-9
# ...and the stored vector is then required to sum to 1 within this.
_SUM_TOL = 1e-12


class Pmf:
    """An immutable pmf over the alphabet {0, ..., K-1}.

    Entries must be nonnegative and sum to 1. Inputs whose total mass is
    within 1e-9 of 1 are renormalized; anything farther off is rejected.
    """

    __slots__ = ("_p",)

    def __init__(self, probs: Iterable[float]):
        p = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs,
                       dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("a pmf must be a nonempty 1-d vector")
        if np.any(np.isnan(p)) or np.any(np.isinf(p)):
            raise ValueError("pmf entries must be finite")
        if np.any(p < -_SUM_TOL):
            raise ValueError(f"pmf entries must be >= 0, got min {p.min()}")
        p = np.maximum(p, 0.0)
        s = p.sum()
        if abs(s - 1.0) > _RENORM_TOL:
            raise ValueError(f"pmf mass must be 1 within {_RENORM_TOL}, got {s!r}")
        if s != 1.0:
            p = p / s
        p.flags.writeable = False
        object.__setattr__(self, "_p", p)

    @property
    def probs(self) -> np.ndarray:
        return self._p

    @property
    def k(self) -> int:
        return self._p.size

    def __len__(self) -> int:
        return self._p.size

    def __getitem__(self, i) -> float:
        return float(self._p[i])

    def __iter__(self):
        return iter(self._p.tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self._p, other._p)

    def __hash__(self) -> int:
        return hash(self._p.tobytes())

    def __repr__(self) -> str:
        return f"Pmf({self._p.tolist()})"

    def __setattr__(self, name, value):
        raise AttributeError("Pmf is immutable")

    def to_json(self) -> str:
        return json.dumps({"probs": self._p.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        d = json.loads(text)
        if not isinstance(d, dict) or "probs" not in d:
            raise ValueError('expected {"probs": [...]}')
        return cls(d["probs"])

    @classmethod
    def uniform(cls, k: int) -> "Pmf":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def bernoulli(cls, p: float) -> "Pmf":
        """bern(p) -> (1-p, p): index 1 carries probability p."""
        return cls([1.0 - p, p])


class EmpiricalType:
    """Counts of each symbol in a length-n sequence; the type is counts/n."""

    __slots__ = ("_counts", "_n")

    def __init__(self, counts: Iterable[int], n: int):
        c = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("counts must be a nonempty 1-d vector")
        if not np.issubdtype(c.dtype, np.integer):
            ci = c.astype(np.int64)
            if not np.array_equal(ci, c):
                raise ValueError("counts must be integers")
            c = ci
        else:
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        n = int(n)
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if int(c.sum()) != n:
            raise ValueError(f"counts sum to {int(c.sum())}, expected n = {n}")
        c.flags.writeable = False
        object.__setattr__(self, "_counts", c)
        object.__setattr__(self, "_n", n)

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def n(self) -> int:
        return self._n

    @property
    def k(self) -> int:
        return self._counts.size

    def pmf(self) -> Pmf:
        return Pmf(self._counts / self._n)

    def __eq__(self, other) -> bool:
        return (isinstance(other, EmpiricalType) and self._n == other._n
                and np.array_equal(self._counts, other._counts))

    def __hash__(self) -> int:
        return hash((self._n, self._counts.tobytes()))

    def __repr__(self) -> str:
        return f"EmpiricalType({self._counts.tolist()}, n={self._n})"

    def __setattr__(self, name, value):
        raise AttributeError("EmpiricalType is immutable")

    def to_json(self) -> str:
        return json.dumps({"counts": self._counts.tolist(), "n": self._n})

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalType":
        d = json.loads(text)
        if not isinstance(d, dict) or "counts" not in d or "n" not in d:
            raise ValueError('expected {"counts": [...], "n": N}')
        return cls(d["counts"], d["n"])


def empirical_type(sequence: Sequence[int], alphabet_size: int) -> EmpiricalType:
    """Count symbol occurrences: counts[a] = #{i : x_i = a}, denominator = len."""
    seq = np.asarray(sequence)
    if seq.size == 0:
        raise ValueError("empty sequence has no type")
    if not np.issubdtype(seq.dtype, np.integer):
        si = seq.astype(np.int64)
        if not np.array_equal(si, seq):
            raise ValueError("sequence entries must be integer symbol indices")
        seq = si
    if seq.min() < 0 or seq.max() >= alphabet_size:
        raise ValueError(
            f"symbol out of alphabet [0, {alphabet_size}): "
            f"range [{seq.min()}, {seq.max()}]")
    counts = np.bincount(seq, minlength=alphabet_size)
    return EmpiricalType(counts, int(seq.size))


def _check_same_alphabet(p: np.ndarray, q: np.ndarray):
    if p.shape != q.shape:
        raise ValueError(f"alphabet sizes differ: {p.size} vs {q.size}")


def kl_divergence(P: Pmf, Q: Pmf) -> float:
    """D(P||Q) = sum P(a) log2 P(a)/Q(a), in bits; +inf when Q misses P's support."""
    p, q = P.probs, Q.probs
    _check_same_alphabet(p, q)
    pos = p > 0.0
    if np.any(q[pos] == 0.0):
        return math.inf
    v = float(np.sum(p[pos] * np.log2(p[pos] / q[pos])))
    return max(v, 0.0)


def l1_distance(P: Pmf, Q: Pmf) -> float:
    p, q = P.probs, Q.probs
    _check_same_alphabet(p, q)
    return float(np.abs(p - q).sum())


def h_c(P: Pmf, Pp: Pmf, c: float) -> float:
    """h_c(P, P') = D(P||U) + c D(P'||U) with U = (P + c P')/(1 + c).

    Equals min over pmfs V of D(P||V) + c D(P'||V), hence >= 0 with equality
    iff P = P'.  Always finite: U dominates the supports of both arguments.
    The usual regime is the training/test ratio c = m/n, but any c > 0 is
    accepted.
    """
    v, _ = _h_c_arrays(P.probs, Pp.probs, c)
    return v


def _h_c_arrays(p: np.ndarray, pp: np.ndarray, c: float) -> tuple[float, np.ndarray]:
    """(h_c value, mixture U) for raw arrays; shared by solvers."""
    _check_same_alphabet(p, pp)
    if not c > 0.0:
        raise ValueError(f"c must be > 0, got {c}")
    u = (p + c * pp) / (1.0 + c)
    val = 0.0
    mask = p > 0.0
    val += float(np.sum(p[mask] * np.log2(p[mask] / u[mask])))
    mask = pp > 0.0
    val += c * float(np.sum(pp[mask] * np.log2(pp[mask] / u[mask])))
    return max(val, 0.0), u


def _h_c_batch(p: np.ndarray, pps: np.ndarray, c: float) -> np.ndarray:
    """h_c(p, pps[i]) for a batch of second arguments, shape (m, K) -> (m,)."""
    u = (p[None, :] + c * pps) / (1.0 + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = p[None, :] * np.log2(p[None, :] / u)
        t2 = pps * np.log2(pps / u)
    t1[:, p == 0.0] = 0.0
    t2[pps == 0.0] = 0.0
    return np.maximum(t1.sum(axis=1) + c * t2.sum(axis=1), 0.0)


def delta_n(n: int, cfg) -> float:
    """Finite-n threshold slack: K * log2((n+1) * (m1+1)) / n, m1 = (1-alpha)*n*c.

    This is the union-bound factor over joint test/clean-training type classes,
    (n+1)^K (m1+1)^K, folded into the exponent. Decreases to 0 as n grows.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m1 = (1.0 - cfg.alpha) * n * cfg.c
    return cfg.alphabet_size * math.log2((n + 1.0) * (m1 + 1.0)) / n
