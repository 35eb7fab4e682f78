"""Parameter/experiment boxes and experiment sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^d; ``open_lower[i]`` makes the lower bound strict.

    Bounds may be infinite. Membership of NaN is always false.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    open_lower: tuple[bool, ...] = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValidationError("box bounds have different lengths")
        ol = tuple(bool(v) for v in self.open_lower) or (False,) * len(lo)
        if len(ol) != len(lo):
            raise ValidationError("open_lower length mismatch")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValidationError(f"empty box: lower {lo} > upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "open_lower", ol)

    @classmethod
    def of(cls, lower, upper, open_lower=()) -> "Box":
        return cls(tuple(lower), tuple(upper), tuple(open_lower))

    @classmethod
    def unbounded(cls, d: int) -> "Box":
        return cls((-np.inf,) * d, (np.inf,) * d)

    @classmethod
    def positive(cls, d: int) -> "Box":
        return cls((0.0,) * d, (np.inf,) * d, (True,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def diameter(self) -> float:
        """Diameter in the max-norm (the box metric used for separations)."""
        if self.dim == 0:
            return 0.0
        return float(np.max(self.hi - self.lo))

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim or not np.all(np.isfinite(v)):
            return False
        for x, a, b, strict in zip(v, self.lower, self.upper, self.open_lower):
            if x > b or x < a or (strict and x == a):
                return False
        return True

    def contains_rows(self, rows) -> np.ndarray:
        """Vectorized membership for an (n, d) array; returns a boolean per row."""
        rows = np.asarray(rows, dtype=float).reshape(-1, self.dim)
        lo, hi = self.lo, self.hi
        strict = np.array(self.open_lower, dtype=bool)
        ok = np.all(np.isfinite(rows), axis=1) & np.all(rows <= hi, axis=1) & np.all(rows >= lo, axis=1)
        if strict.any():
            ok &= ~np.any((rows == lo) & strict, axis=1)
        return ok

    def check(self, v, what: str = "point") -> np.ndarray:
        arr = np.asarray(v, dtype=float).reshape(-1)
        if arr.shape[0] != self.dim:
            raise ValidationError(f"{what} has dimension {arr.shape[0]}, expected {self.dim}")
        if not self.contains(arr):
            raise ValidationError(f"{what} {arr.tolist()} outside domain {self.describe()}")
        return arr

    def describe(self) -> str:
        parts = []
        for a, b, s in zip(self.lower, self.upper, self.open_lower):
            parts.append(f"{'(' if s else '['}{a:g}, {b:g}]")
        return " x ".join(parts) if parts else "{}"

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        if not self.bounded:
            raise ValidationError(f"cannot sample uniformly from unbounded box {self.describe()}")
        size = (self.dim,) if n is None else (n, self.dim)
        return self.lo + (self.hi - self.lo) * rng.random(size)

    def sample_log(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Log-uniform draws; coordinates with a nonpositive lower bound fall back to uniform."""
        if not self.bounded:
            raise ValidationError(f"cannot sample from unbounded box {self.describe()}")
        lo, hi = self.lo, self.hi
        size = (self.dim,) if n is None else (n, self.dim)
        u = rng.random(size)
        pos = lo > 0
        out = lo + (hi - lo) * u
        if np.any(pos):
            llo, lhi = np.log(np.where(pos, lo, 1.0)), np.log(np.where(pos, hi, 1.0))
            out = np.where(pos, np.exp(llo + (lhi - llo) * u), out)
        return out

    def grid(self, points: int | Sequence[int]) -> np.ndarray:
        """Tensor grid with ``points`` nodes per axis, endpoints included."""
        if not self.bounded:
            raise ValidationError("grid needs a bounded box")
        if isinstance(points, (int, np.integer)):
            points = [int(points)] * self.dim
        axes = [np.linspace(a, b, k) if k > 1 else np.array([(a + b) / 2])
                for a, b, k in zip(self.lower, self.upper, points)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def to_dict(self) -> dict:
        fin = lambda vals: [v if np.isfinite(v) else None for v in vals]
        return {"lower": fin(self.lower), "upper": fin(self.upper),
                "open_lower": list(self.open_lower)}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        lo = [(-np.inf if v is None else v) for v in d["lower"]]
        hi = [(np.inf if v is None else v) for v in d["upper"]]
        return cls(tuple(lo), tuple(hi), tuple(d.get("open_lower", ())))


def _pairwise_maxnorm(points: np.ndarray) -> float:
    q = points.shape[0]
    if q < 2:
        return np.inf
    diff = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2)
    return float(diff[np.triu_indices(q, 1)].min())


class ExperimentSet:
    """Ordered list of q pairwise distinct experiments (an element of Λ^(q)).

    ``min_separation`` is the minimal max-norm distance between members;
    zero means merely distinct.
    """

    __slots__ = ("_points", "min_separation")

    def __init__(self, points, min_separation: float = 0.0):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError("an experiment set needs at least one experiment")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("experiments must be finite")
        sep = _pairwise_maxnorm(arr)
        if sep <= 0.0 or sep < min_separation:
            raise ValidationError(
                f"experiments not pairwise separated (min distance {sep:g}, need > 0 and >= {min_separation:g})")
        arr.flags.writeable = False
        self._points = arr
        self.min_separation = float(min_separation)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def q(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self.q

    def __iter__(self):
        return iter(self._points)

    def __getitem__(self, i):
        return self._points[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentSet) and np.array_equal(self._points, other._points)

    def __repr__(self) -> str:
        return f"ExperimentSet(q={self.q}, d={self.d})"

    def with_experiment(self, lam) -> "ExperimentSet":
        return ExperimentSet(np.vstack([self._points, np.asarray(lam, float).reshape(1, -1)]),
                             self.min_separation)

    def to_dict(self) -> dict:
        return {"experiments": self._points.tolist(), "min_separation": self.min_separation}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSet":
        return cls(d["experiments"], d.get("min_separation", 0.0))
