"""Game parameters shared by every layer of the library.

A single immutable config object carries the corruption fraction, the
false-positive exponent threshold, the training/test length ratio, the
distortion budget and the game variant, so that defender, attacker,
analysis and simulation code all read the same knobs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum


class Variant(str, Enum):
    ADDITION = "addition"
    REPLACEMENT = "replacement"


_MODES = ("asymptotic", "finite_n")
_ATTACKS = ("nontargeted", "targeted")


@dataclass(frozen=True)
class GameConfig:
    """All game parameters.

    alpha    fraction of corrupted training samples, in [0, 1)
    lam      false-positive exponent threshold (bits), > 0
    c        training-to-test length ratio m/n, > 0
    L        maximum average per-letter distortion, >= 0
    variant  addition (fake samples appended) or replacement (samples overwritten)
    alphabet_size  K >= 2
    mode     "asymptotic" (threshold lambda) or "finite_n" (threshold lambda - delta_n)
    attack   which attack the simulator mounts under H1
    """

    alpha: float
    lam: float
    c: float
    L: float
    variant: Variant
    alphabet_size: int
    mode: str = "asymptotic"
    attack: str = "nontargeted"

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.c > 0.0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if self.L < 0.0:
            raise ValueError(f"L must be >= 0, got {self.L}")
        if not isinstance(self.variant, Variant):
            object.__setattr__(self, "variant", Variant(self.variant))
        if self.alphabet_size < 2:
            raise ValueError(f"alphabet_size must be >= 2, got {self.alphabet_size}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.attack not in _ATTACKS:
            raise ValueError(f"attack must be one of {_ATTACKS}, got {self.attack!r}")

    # Derived sample counts, m = round(cn), m2 = round(alpha*m), m1 = m - m2.
    # Integrality of cn / alpha*m is deliberately not required.
    def m(self, n: int) -> int:
        return round(self.c * n)

    def m2(self, n: int) -> int:
        return round(self.alpha * self.m(n))

    def m1(self, n: int) -> int:
        return self.m(n) - self.m2(n)

    def with_(self, **kw) -> "GameConfig":
        return replace(self, **kw)

    def to_json(self) -> str:
        d = {
            "alpha": self.alpha,
            "lambda": self.lam,
            "c": self.c,
            "L": self.L,
            "variant": self.variant.value,
            "alphabet_size": self.alphabet_size,
            "mode": self.mode,
            "attack": self.attack,
        }
        return json.dumps(d)

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        known = {
            "alpha", "lambda", "c", "L", "variant", "alphabet_size", "mode", "attack",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GameConfig field(s): {sorted(unknown)}")
        kw = dict(d)
        if "lambda" in kw:
            kw["lam"] = kw.pop("lambda")
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "GameConfig":
        return cls.from_dict(json.loads(text))
