"""Shared numeric primitives: dense float64 vectors, scalar schedules, seeded RNG streams.

Everything downstream (optimizers, problems, trial runner, sweeps) works in
terms of plain 1-D float64 numpy arrays; this module holds the checked
elementwise operations, the schedule evaluator, and the deterministic RNG
contract used to derive independent per-trial streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

ELEMENTWISE_OPS = ("add", "sub", "mul", "div")
MAP_OPS = ("sqrt", "square", "add_scalar", "scale")


class NonFiniteError(ArithmeticError):
    """A numeric operation produced NaN or infinity."""


def ensure_vector(data, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting empty or non-finite input."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one element")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinity")
    return arr


def _check_finite(arr: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{context} produced a non-finite value")
    return arr


def elementwise(a, b, op: str) -> np.ndarray:
    """Coordinate-wise add/sub/mul/div of two equal-length vectors."""
    a = ensure_vector(a, "a")
    b = ensure_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    with np.errstate(over="ignore", invalid="ignore"):
        if op == "add":
            out = a + b
        elif op == "sub":
            out = a - b
        elif op == "mul":
            out = a * b
        elif op == "div":
            if np.any(b == 0.0):
                raise ZeroDivisionError("division by zero element")
            out = a / b
        else:
            raise ValueError(f"unknown op {op!r}, expected one of {ELEMENTWISE_OPS}")
    return _check_finite(out, f"elementwise {op}")


def map_scalar(a, op: str, c: float | None = None) -> np.ndarray:
    """Coordinate-wise sqrt/square, or add_scalar/scale by a constant c."""
    a = ensure_vector(a, "a")
    if op == "sqrt":
        if np.any(a < 0.0):
            raise ValueError("sqrt of negative element")
        out = np.sqrt(a)
    elif op == "square":
        out = a * a
    elif op == "add_scalar":
        if c is None:
            raise ValueError("add_scalar requires c")
        out = a + c
    elif op == "scale":
        if c is None:
            raise ValueError("scale requires c")
        out = a * c
    else:
        raise ValueError(f"unknown op {op!r}, expected one of {MAP_OPS}")
    return _check_finite(out, f"map_scalar {op}")


@dataclass(frozen=True)
class VectorNorms:
    l2: float
    linf: float
    min: float
    max: float


def norms(a) -> VectorNorms:
    """l2 and infinity norms plus signed coordinate extremes."""
    a = ensure_vector(a, "a")
    return VectorNorms(
        l2=float(np.sqrt(np.sum(a * a))),
        linf=float(np.max(np.abs(a))),
        min=float(np.min(a)),
        max=float(np.max(a)),
    )


def clamp_box(a, lo: float, hi: float) -> np.ndarray:
    """Euclidean projection onto the box [lo, hi]^d."""
    a = ensure_vector(a, "a")
    if lo > hi:
        raise ValueError(f"clamp bounds out of order: lo={lo} > hi={hi}")
    return np.clip(a, lo, hi)


SCHEDULE_KINDS = ("constant", "inverse_sqrt", "inverse_t")


@dataclass(frozen=True)
class Schedule:
    """Scalar step-indexed schedule.

    constant     -> base
    inverse_sqrt -> base / sqrt(t)
    inverse_t    -> 1 - 1/t   (base unused)
    """

    kind: str
    base: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not math.isfinite(self.base):
            raise ValueError("schedule base must be finite")

    @classmethod
    def constant(cls, base: float) -> "Schedule":
        return cls("constant", base)

    @classmethod
    def inverse_sqrt(cls, base: float) -> "Schedule":
        return cls("inverse_sqrt", base)

    @classmethod
    def inverse_t(cls) -> "Schedule":
        return cls("inverse_t")


def schedule_eval(s: Schedule, t: int) -> float:
    """Evaluate a schedule at step index t >= 1."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if s.kind == "constant":
        return s.base
    if s.kind == "inverse_sqrt":
        return s.base / math.sqrt(t)
    return 1.0 - 1.0 / t


def _splitmix64(x: int) -> int:
    """One round of the splitmix64 mixing function (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(base_seed: int, *indices: int) -> int:
    """Derive a child seed from (base_seed, i1, i2, ...).

    The mixing is a splitmix64 chain, so derived seeds depend only on the
    identity tuple: sweeps and multi-seed runs are order-independent.
    """
    state = _splitmix64(base_seed & _MASK64)
    for idx in indices:
        state = _splitmix64(state ^ (idx & _MASK64))
    return state


class RngStream:
    """Deterministic random stream with reproducible child derivation.

    Backed by the counter-based Philox generator keyed directly by the
    64-bit seed: the same seed replays the identical draw sequence on any
    platform. Child streams come from ``derive`` via :func:`mix_seed`.
    Instances are single-owner; never share one across threads.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def derive(self, *indices: int) -> "RngStream":
        return RngStream(mix_seed(self.seed, *indices))

    def random(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high=high, size=size)

    def choice(self, n: int, size: int, replace: bool = False):
        return self._gen.choice(n, size=size, replace=replace)
