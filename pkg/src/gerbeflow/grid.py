"""Structured grids on flat tori and the finite-difference calculus on them.

Two lattices are provided. :class:`Grid` discretizes the periodic torus
``T^n`` and :class:`CylinderGrid` discretizes ``I x T^n`` with an open
``tau`` axis in position 0. Tensor fields store dense component arrays of
shape ``(dim,) * rank + grid.shape``; the packed (independent component)
layout is only used for file IO.

Derivatives use the 4th-order centred stencil

    (f[i-2] - 8 f[i-1] + 8 f[i+1] - f[i+2]) / (12 h)

with periodic wrap, and 4th-order one-sided stencils on the two outer
layers of the open axis.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

__all__ = [
    "GridError",
    "NonFiniteError",
    "Grid",
    "CylinderGrid",
    "Field",
    "ScalarField",
    "OneForm",
    "VectorField",
    "SymTensor2",
    "TwoForm",
    "ThreeForm",
    "FourForm",
    "form_class",
    "packed_indices",
    "alt",
    "partial_derivative",
    "integrate",
    "exterior_derivative",
    "fundamental_period",
]


class GridError(ValueError):
    """Invalid grid, field shape or axis request."""


class NonFiniteError(FloatingPointError):
    """A field received NaN or Inf values."""


# ---------------------------------------------------------------------------
# lattices


def _diff_periodic(a, ax, h):
    a = np.moveaxis(a, ax, 0)
    p = np.concatenate((a[-2:], a, a[:2]))
    out = p[:-4] - p[4:]
    out += 8.0 * (p[3:-1] - p[1:-3])
    out /= 12.0 * h
    return np.moveaxis(out, 0, ax)


# one-sided weights for the first two layers, applied to f[0..4]
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])


def _diff_open(a, ax, h):
    a = np.moveaxis(a, ax, 0)
    out = np.empty_like(a)
    out[2:-2] = a[:-4] - a[4:] + 8.0 * (a[3:-1] - a[1:-3])
    head = a[:5]
    tail = a[-1:-6:-1]
    out[0] = np.tensordot(_EDGE0, head, axes=1)
    out[1] = np.tensordot(_EDGE1, head, axes=1)
    out[-1] = -np.tensordot(_EDGE0, tail, axes=1)
    out[-2] = -np.tensordot(_EDGE1, tail, axes=1)
    out /= 12.0 * h
    return np.moveaxis(out, 0, ax)


class _Lattice:
    """Shared behaviour of the periodic and cylinder lattices."""

    shape: tuple
    spacing: tuple
    periodic: tuple

    @property
    def dim(self) -> int:
        """Number of grid axes, which is also the tensor index range."""
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def diff(self, arr, axis):
        """Derivative of ``arr`` along grid ``axis``; grid axes are trailing."""
        if not 0 <= axis < self.dim:
            raise GridError(f"axis {axis} out of range for a {self.dim}-axis grid")
        arr = np.asarray(arr, dtype=float)
        ax = arr.ndim - self.dim + axis
        if self.periodic[axis]:
            return _diff_periodic(arr, ax, self.spacing[axis])
        return _diff_open(arr, ax, self.spacing[axis])

    def grad(self, arr):
        """All partial derivatives stacked on a new leading axis."""
        return np.stack([self.diff(arr, a) for a in range(self.dim)])

    def zeros(self, rank=0):
        return np.zeros((self.dim,) * rank + self.shape)


class Grid(_Lattice):
    """Uniform periodic grid on the flat torus ``prod_a [0, L_a)``."""

    def __init__(self, shape, lengths):
        shape = tuple(int(s) for s in shape)
        lengths = tuple(float(x) for x in lengths)
        if not 1 <= len(shape) <= 3:
            raise GridError(f"spatial dimension must be 1, 2 or 3, got {len(shape)}")
        if len(lengths) != len(shape):
            raise GridError("shape and lengths must have the same length")
        for a, (N, L) in enumerate(zip(shape, lengths)):
            if N < 8 or N % 2:
                raise GridError(f"axis {a}: point count {N} must be even and >= 8")
            if not (L > 0 and math.isfinite(L)):
                raise GridError(f"axis {a}: length {L} must be positive and finite")
        self.shape = shape
        self.lengths = lengths
        self.spacing = tuple(L / N for N, L in zip(shape, lengths))
        self.periodic = (True,) * len(shape)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axis_coords(self, axis):
        return np.arange(self.shape[axis]) * self.spacing[axis]

    def coords(self):
        """Coordinate arrays, one per axis, each of shape ``grid.shape``."""
        return np.meshgrid(*[self.axis_coords(a) for a in range(self.n)], indexing="ij")

    def refine(self, factor=2):
        return Grid([N * factor for N in self.shape], self.lengths)

    def __eq__(self, other):
        return (isinstance(other, Grid) and not isinstance(other, CylinderGrid)
                and self.shape == other.shape and self.lengths == other.lengths)

    def __hash__(self):
        return hash((self.shape, self.lengths))

    def __repr__(self):
        return f"Grid(shape={self.shape}, lengths={self.lengths})"


class CylinderGrid(_Lattice):
    """Grid on ``[tau0, tau0 + (M-1) dtau] x T^n``, the open axis first."""

    def __init__(self, space: Grid, count: int, step: float, origin: float = 0.0):
        if not isinstance(space, Grid):
            raise GridError("space must be a periodic Grid")
        count = int(count)
        step = float(step)
        if count < 9:
            raise GridError(f"tau axis needs at least 9 samples, got {count}")
        if not (step > 0 and math.isfinite(step)):
            raise GridError(f"tau step must be positive, got {step}")
        self.space = space
        self.count = count
        self.step = step
        self.origin = float(origin)
        self.shape = (count,) + space.shape
        self.spacing = (step,) + space.spacing
        self.periodic = (False,) + space.periodic

    @property
    def n(self) -> int:
        """Dimension of the spatial slice."""
        return self.space.n

    @property
    def taus(self):
        return self.origin + self.step * np.arange(self.count)

    def coords(self):
        axes = [self.taus] + [self.space.axis_coords(a) for a in range(self.n)]
        return np.meshgrid(*axes, indexing="ij")

    def interior(self, margin=4):
        """Slice along tau keeping layers at least ``margin`` from each end."""
        if self.count <= 2 * margin:
            raise GridError(f"{self.count} tau samples leave no interior at margin {margin}")
        return slice(margin, self.count - margin)

    def __eq__(self, other):
        return (isinstance(other, CylinderGrid) and self.space == other.space
                and self.count == other.count and self.step == other.step
                and self.origin == other.origin)

    def __hash__(self):
        return hash((self.space, self.count, self.step, self.origin))

    def __repr__(self):
        return (f"CylinderGrid(space={self.space!r}, count={self.count}, "
                f"step={self.step}, origin={self.origin})")


# ---------------------------------------------------------------------------
# index algebra


def _parity(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def alt(arr, k):
    """Antisymmetrize the first ``k`` axes of ``arr`` (with 1/k! weight)."""
    if k < 2:
        return np.array(arr, dtype=float)
    rest = tuple(range(k, arr.ndim))
    out = np.zeros_like(arr, dtype=float)
    for perm in itertools.permutations(range(k)):
        out += _parity(perm) * np.transpose(arr, perm + rest)
    out /= math.factorial(k)
    return out


def packed_indices(rank, symmetry, dim):
    """Index tuples of the independent components, in file order."""
    if symmetry == "sym":
        return list(itertools.combinations_with_replacement(range(dim), rank))
    if symmetry == "antisym":
        return list(itertools.combinations(range(dim), rank))
    return list(itertools.product(range(dim), repeat=rank))


# ---------------------------------------------------------------------------
# fields


class Field:
    """Immutable tensor field with dense components over a lattice."""

    rank = 0
    symmetry = "none"
    __slots__ = ("grid", "data")

    def __init__(self, grid, data):
        data = np.array(data, dtype=float)
        expected = (grid.dim,) * self.rank + grid.shape
        if data.shape != expected:
            raise GridError(
                f"{type(self).__name__} on {grid!r} needs shape {expected}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{type(self).__name__} contains non-finite values")
        data = self._project(data)
        data.flags.writeable = False
        self.grid = grid
        self.data = data

    def _project(self, data):
        return data

    # construction helpers
    @classmethod
    def zeros(cls, grid):
        return cls(grid, grid.zeros(cls.rank))

    @classmethod
    def from_components(cls, grid, comps):
        """Build from packed components of shape ``(ncomp,) + grid.shape``."""
        idx = packed_indices(cls.rank, cls.symmetry, grid.dim)
        comps = np.asarray(comps, dtype=float)
        if comps.shape != (len(idx),) + grid.shape:
            raise GridError(f"{cls.__name__} needs {len(idx)} packed components")
        data = grid.zeros(cls.rank)
        for c, I in zip(comps, idx):
            if cls.symmetry == "none":
                data[I] = c
                continue
            for perm in itertools.permutations(range(cls.rank)):
                J = tuple(I[p] for p in perm)
                sign = _parity(perm) if cls.symmetry == "antisym" else 1
                data[J] = sign * c
        return cls(grid, data)

    def components(self):
        """Packed independent components, shape ``(ncomp,) + grid.shape``."""
        idx = packed_indices(self.rank, self.symmetry, self.grid.dim)
        if not idx:
            return np.zeros((0,) + self.grid.shape)
        return np.stack([self.data[I] for I in idx])

    def like(self, data):
        return type(self)(self.grid, data)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def _check_peer(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other):
        self._check_peer(other)
        return self.like(self.data + other.data)

    def __sub__(self, other):
        self._check_peer(other)
        return self.like(self.data - other.data)

    def __neg__(self):
        return self.like(-self.data)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridError("fields live on different grids")
            return self.like(self.data * other.data)
        if isinstance(other, Field):
            return NotImplemented
        return self.like(self.data * float(other))

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid!r})"


class ScalarField(Field):
    rank = 0
    __slots__ = ()

    def __mul__(self, other):
        if isinstance(other, Field) and not isinstance(other, ScalarField):
            return other.__mul__(self)
        return Field.__mul__(self, other)

    __rmul__ = __mul__


class VectorField(Field):
    rank = 1
    __slots__ = ()


class SymTensor2(Field):
    rank = 2
    symmetry = "sym"
    __slots__ = ()

    def _project(self, data):
        dev = np.max(np.abs(data - np.swapaxes(data, 0, 1)), initial=0.0)
        if dev > 1e-9 * (1.0 + np.max(np.abs(data), initial=0.0)):
            raise GridError(f"SymTensor2 data is not symmetric (deviation {dev:.3e})")
        if dev == 0.0:
            return data
        return 0.5 * (data + np.swapaxes(data, 0, 1))


class _Form(Field):
    symmetry = "antisym"
    __slots__ = ()

    @property
    def degree(self):
        return self.rank

    def _project(self, data):
        if self.rank < 2:
            return data
        # exactly antisymmetric input is kept bit for bit
        if all(np.array_equal(data, -np.swapaxes(data, a, a + 1)) for a in range(self.rank - 1)):
            return data
        proj = alt(data, self.rank)
        dev = np.max(np.abs(data - proj), initial=0.0)
        if dev > 1e-9 * (1.0 + np.max(np.abs(data), initial=0.0)):
            raise GridError(f"{type(self).__name__} data is not antisymmetric (deviation {dev:.3e})")
        return proj


class OneForm(_Form):
    rank = 1
    symmetry = "none"
    __slots__ = ()


class TwoForm(_Form):
    rank = 2
    __slots__ = ()


class ThreeForm(_Form):
    rank = 3
    __slots__ = ()


class FourForm(_Form):
    rank = 4
    __slots__ = ()


_FORMS = {0: ScalarField, 1: OneForm, 2: TwoForm, 3: ThreeForm, 4: FourForm}


def form_class(k):
    """Field class holding differential forms of degree ``k``."""
    try:
        return _FORMS[k]
    except KeyError:
        raise GridError(f"no form class of degree {k}") from None


def _is_form(f):
    return isinstance(f, (ScalarField, _Form))


# ---------------------------------------------------------------------------
# calculus


def partial_derivative(f: Field, axis: int) -> Field:
    """Componentwise derivative along a grid axis, same field type."""
    return f.like(f.grid.diff(f.data, axis))


def integrate(f: ScalarField) -> float:
    """Rectangle-rule integral, summed axis by axis from the last axis."""
    acc = f.data
    for ax in reversed(range(acc.ndim)):
        acc = np.sum(acc, axis=ax)
    return float(acc) * f.grid.cell_volume


def exterior_derivative(alpha: Field) -> Field:
    """``d alpha = (k+1) Alt(partial (x) alpha)`` for a k-form ``alpha``."""
    if not _is_form(alpha):
        raise GridError(f"{type(alpha).__name__} is not a differential form")
    k = alpha.rank
    if k >= alpha.grid.dim:
        raise GridError(f"d of a {k}-form vanishes identically on a {alpha.grid.dim}-dimensional grid")
    grad = alpha.grid.grad(alpha.data)
    return form_class(k + 1)(alpha.grid, (k + 1) * alt(grad, k + 1))


def fundamental_period(alpha: Field, cycle) -> float:
    """Integral of ``alpha`` over the coordinate torus spanned by ``cycle``.

    ``cycle`` is an ordered tuple of distinct axes; its order fixes the
    orientation. Transverse coordinates are pinned at grid index 0.
    """
    cycle = tuple(int(a) for a in cycle)
    if not _is_form(alpha):
        raise GridError(f"{type(alpha).__name__} is not a differential form")
    if len(cycle) != alpha.rank:
        raise GridError(f"cycle of size {len(cycle)} does not match a {alpha.rank}-form")
    if len(set(cycle)) != len(cycle) or any(not 0 <= a < alpha.grid.dim for a in cycle):
        raise GridError(f"invalid cycle {cycle}")
    comp = alpha.data[cycle] if cycle else alpha.data
    pick = tuple(slice(None) if a in cycle else 0 for a in range(alpha.grid.dim))
    cell = float(np.prod([alpha.grid.spacing[a] for a in cycle]))
    return float(np.sum(comp[pick])) * cell
