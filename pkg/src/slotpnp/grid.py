"""Periodic staggered-grid fields and discrete operators.

The domain is the cube (a, b)^dim covered by n uniform cells per axis with
spacing h = (b - a)/n.  Scalar unknowns live at cell centers
x_i = a + (i + 1/2) h (zero-based index i; the first center sits half a cell
inside the domain).  Staggered quantities (fluxes, mobilities) live at face
midpoints x_{i+1/2}; the face between cells i and i+1 is stored at index i
with periodic wraparound, so every axis carries exactly n faces.

Operators follow the usual staggered calculus:

    diff_forward   cell -> face   (f[i+1] - f[i]) / h
    avg_forward    cell -> face   (f[i+1] + f[i]) / 2
    divergence     face -> cell   sum over axes of backward differences
    gradient       cell -> faces  per-axis diff_forward
    laplacian      divergence(gradient(f)), composed literally so the
                   identity with the operator pair is bitwise
    weighted_laplacian            divergence(D * gradient(f)) for face
                   weights D > 0

Inner products carry the cell volume h^dim; the face-field product averages
the per-face products back to cell centers before summing, which for
periodic fields equals the plain face sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import GridMismatchError

__all__ = [
    "GridSpec",
    "CellField",
    "FaceField",
    "diff_forward",
    "avg_forward",
    "gradient",
    "divergence",
    "laplacian",
    "weighted_laplacian",
    "mean",
    "inner",
    "face_inner",
    "norm",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic Cartesian grid: n cells per axis on (a, b)^dim."""

    dim: int
    n: int
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"need at least 2 cells per axis, got n={self.n}")
        a, b = self.interval
        if not b > a:
            raise ValueError(f"empty interval ({a}, {b})")
        object.__setattr__(self, "interval", (float(a), float(b)))

    @property
    def h(self) -> float:
        a, b = self.interval
        return (b - a) / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def num_cells(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def domain_volume(self) -> float:
        a, b = self.interval
        return (b - a) ** self.dim

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis (all axes are identical)."""
        a, _ = self.interval
        return a + (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, one per axis, each of shape ``self.shape``."""
        axes = (self.axis_centers(),) * self.dim
        return tuple(np.meshgrid(*axes, indexing="ij"))


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float64)
    if out is values:
        out = out.copy()
    out.setflags(write=False)
    return out


class CellField:
    """Scalar values at cell centers with periodic indexing.

    Immutable after construction; all operations return new fields.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != spec.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {spec.shape}")
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "values", _freeze(values))

    def __setattr__(self, name, value):
        raise AttributeError("CellField is immutable")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "CellField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "CellField":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[..., np.ndarray]) -> "CellField":
        """Evaluate ``fn(x, [y, [z]])`` at cell centers."""
        return cls(spec, np.asarray(fn(*spec.meshgrid()), dtype=np.float64))

    def at(self, *index: int) -> float:
        """Value at a (possibly out-of-range) integer index, wrapped periodically."""
        if len(index) != self.spec.dim:
            raise IndexError(f"expected {self.spec.dim} indices, got {len(index)}")
        return float(self.values[tuple(i % self.spec.n for i in index)])

    def __add__(self, other):
        return CellField(self.spec, self.values + _coerce(self, other))

    def __sub__(self, other):
        return CellField(self.spec, self.values - _coerce(self, other))

    def __mul__(self, other):
        return CellField(self.spec, self.values * _coerce(self, other))

    __rmul__ = __mul__

    def __neg__(self):
        return CellField(self.spec, -self.values)

    def __repr__(self):
        return f"CellField(dim={self.spec.dim}, n={self.spec.n})"


def _coerce(field: CellField, other) -> np.ndarray | float:
    if isinstance(other, CellField):
        check_same_grid(field, other)
        return other.values
    return float(other)


class FaceField:
    """Per-axis values at staggered face midpoints, periodic in every axis.

    ``components[ax][..., i, ...]`` is the value at face i+1/2 of axis ``ax``.
    """

    __slots__ = ("spec", "components")

    def __init__(self, spec: GridSpec, components: Iterable[np.ndarray]):
        comps = tuple(np.asarray(c, dtype=np.float64) for c in components)
        if len(comps) != spec.dim:
            raise ValueError(f"expected {spec.dim} components, got {len(comps)}")
        for c in comps:
            if c.shape != spec.shape:
                raise ValueError(f"component shape {c.shape} != grid shape {spec.shape}")
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "components", tuple(_freeze(c) for c in comps))

    def __setattr__(self, name, value):
        raise AttributeError("FaceField is immutable")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "FaceField":
        return cls(spec, tuple(np.zeros(spec.shape) for _ in range(spec.dim)))

    def at(self, axis: int, *index: int) -> float:
        """Face value ``index[axis] + 1/2`` along ``axis``, wrapped periodically."""
        _check_axis(self.spec, axis)
        if len(index) != self.spec.dim:
            raise IndexError(f"expected {self.spec.dim} indices, got {len(index)}")
        return float(self.components[axis][tuple(i % self.spec.n for i in index)])

    def __repr__(self):
        return f"FaceField(dim={self.spec.dim}, n={self.spec.n})"


def check_same_grid(a, b) -> None:
    if a.spec != b.spec:
        raise GridMismatchError(f"grid mismatch: {a.spec} vs {b.spec}")


def _check_axis(spec: GridSpec, axis: int) -> None:
    if not 0 <= axis < spec.dim:
        raise ValueError(f"axis {axis} out of range for dim={spec.dim}")


# -- cell -> face operators -------------------------------------------------

def diff_forward(f: CellField, axis: int) -> np.ndarray:
    """Forward difference (f[i+1] - f[i]) / h at face i+1/2 of ``axis``."""
    _check_axis(f.spec, axis)
    v = f.values
    return (np.roll(v, -1, axis=axis) - v) / f.spec.h


def avg_forward(f: CellField, axis: int) -> np.ndarray:
    """Forward average (f[i+1] + f[i]) / 2 at face i+1/2 of ``axis``."""
    _check_axis(f.spec, axis)
    v = f.values
    return (np.roll(v, -1, axis=axis) + v) * 0.5


def gradient(f: CellField) -> FaceField:
    return FaceField(f.spec, tuple(diff_forward(f, ax) for ax in range(f.spec.dim)))


# -- face -> cell operators -------------------------------------------------

def _diff_backward(component: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (component - np.roll(component, 1, axis=axis)) / h


def _avg_backward(component: np.ndarray, axis: int) -> np.ndarray:
    return (component + np.roll(component, 1, axis=axis)) * 0.5


def divergence(F: FaceField) -> CellField:
    """Backward-difference divergence of a face field, cell by cell."""
    h = F.spec.h
    out = _diff_backward(F.components[0], 0, h)
    for ax in range(1, F.spec.dim):
        out = out + _diff_backward(F.components[ax], ax, h)
    return CellField(F.spec, out)


def laplacian(f: CellField) -> CellField:
    return divergence(gradient(f))


def weighted_laplacian(D: FaceField, f: CellField) -> CellField:
    """Divergence of D * gradient(f) for a strictly positive face weight D."""
    check_same_grid(D, f)
    for c in D.components:
        if not np.all(c > 0.0):
            raise ValueError("face weight must be strictly positive on every face")
    grad = gradient(f)
    weighted = FaceField(f.spec, tuple(D.components[ax] * grad.components[ax]
                                       for ax in range(f.spec.dim)))
    return divergence(weighted)


# -- inner products, means, norms -------------------------------------------

def mean(f: CellField) -> float:
    """Domain average: h^dim * sum(f) / |domain|."""
    return float(f.spec.cell_volume * np.sum(f.values) / f.spec.domain_volume)


def inner(f: CellField, g: CellField) -> float:
    check_same_grid(f, g)
    return float(f.spec.cell_volume * np.dot(f.values.ravel(), g.values.ravel()))


def face_inner(F: FaceField, G: FaceField) -> float:
    """Sum over axes of the averaged-product inner products.

    Per axis the product F*G is averaged back to cell centers before the
    volume-weighted sum; with periodic fields this equals the plain face sum.
    """
    check_same_grid(F, G)
    vol = F.spec.cell_volume
    total = 0.0
    for ax in range(F.spec.dim):
        prod = F.components[ax] * G.components[ax]
        total += vol * float(np.sum(_avg_backward(prod, ax)))
    return total


def norm(f: CellField, kind: str = "l2", p: float | None = None) -> float:
    """Grid norm of a cell field.

    ``kind`` is one of ``l2``, ``lp`` (requires ``p`` >= 1), ``linf``,
    ``grad_l2``, ``h1``, ``h2``.
    """
    kind = kind.lower()
    if kind == "l2":
        return math.sqrt(inner(f, f))
    if kind == "lp":
        if p is None or p < 1:
            raise ValueError(f"lp norm requires p >= 1, got {p}")
        vol = f.spec.cell_volume
        return float((vol * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))
    if kind == "linf":
        return float(np.max(np.abs(f.values)))
    if kind == "grad_l2":
        g = gradient(f)
        return math.sqrt(face_inner(g, g))
    if kind == "h1":
        g = gradient(f)
        return math.sqrt(inner(f, f) + face_inner(g, g))
    if kind == "h2":
        g = gradient(f)
        lap = laplacian(f)
        return math.sqrt(inner(f, f) + face_inner(g, g) + inner(lap, lap))
    raise ValueError(f"unknown norm kind '{kind}'")


def face_norm_l2(F: FaceField) -> float:
    """l2 norm of a face field: sqrt of its inner product with itself."""
    return math.sqrt(face_inner(F, F))


def grad_linf(f: CellField) -> float:
    """Maximum absolute face value of the discrete gradient."""
    return max(float(np.max(np.abs(diff_forward(f, ax)))) for ax in range(f.spec.dim))
