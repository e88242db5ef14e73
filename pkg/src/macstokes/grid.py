"""Staggered (MAC) grid geometry and degree-of-freedom bookkeeping.

Layout conventions used throughout the package:

* the domain is [0, nx*h] x [0, ny*h] split into nx*ny square cells,
  cell (i, j) spans [(i-1)h, ih] x [(j-1)h, jh] with i, j starting at 1;
* pressure lives at cell centers ((i-1/2)h, (j-1/2)h), i=1..nx, j=1..ny;
* x-velocity u lives on vertical cell faces, y-velocity v on horizontal
  faces.  When a direction is Dirichlet the wall faces carry prescribed
  values and are not unknowns; when it is periodic the face at coordinate 0
  represents the wrapped face and every cell contributes one face.
* unknowns are numbered left-to-right then bottom-to-top (x fastest),
  and block vectors stack (u, v, p).

Face index conventions (1-based API indices):

* u, Dirichlet in x:  face i sits at x = i*h (between cells i and i+1),
  i = 1..nx-1;
* u, periodic in x:   face i sits at x = (i-1)*h (left face of cell i),
  i = 1..nx;
* v mirrors u with x and y swapped.

The periodic left-face convention is what makes the assembled divergence
equal (-1/h) * [I (x) B_P, B_P (x) I] entrywise, so matrix identities used
by the spectral checks hold exactly rather than merely up to a permutation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryKind(enum.Enum):
    """Boundary-condition variants supported by the discretization."""

    DIRICHLET_ALL = "dirichlet"
    PERIODIC_X_DIRICHLET_Y = "xperiodic"
    PERIODIC_ALL = "periodic"

    @property
    def periodic_x(self) -> bool:
        return self in (BoundaryKind.PERIODIC_X_DIRICHLET_Y, BoundaryKind.PERIODIC_ALL)

    @property
    def periodic_y(self) -> bool:
        return self is BoundaryKind.PERIODIC_ALL

    @classmethod
    def from_name(cls, name: str) -> "BoundaryKind":
        key = name.strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "dirichlet": cls.DIRICHLET_ALL,
            "dirichletall": cls.DIRICHLET_ALL,
            "xperiodic": cls.PERIODIC_X_DIRICHLET_Y,
            "xperiodicydirichlet": cls.PERIODIC_X_DIRICHLET_Y,
            "periodicxdirichlety": cls.PERIODIC_X_DIRICHLET_Y,
            "periodic": cls.PERIODIC_ALL,
            "periodicall": cls.PERIODIC_ALL,
        }
        if key not in aliases:
            raise ValueError(f"unknown boundary kind {name!r}; expected one of "
                             "dirichlet, xperiodic, periodic")
        return aliases[key]


class Field(enum.Enum):
    U = "u"
    V = "v"
    P = "p"


class GridError(ValueError):
    """Invalid grid construction or out-of-range staggered index."""


@dataclass(frozen=True)
class GridSpec:
    """Cell counts, mesh size and boundary kind of a uniform MAC grid."""

    nx: int
    ny: int
    hx: float
    hy: float
    bc: BoundaryKind

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise GridError(f"need nx, ny >= 2, got nx={self.nx}, ny={self.ny}")
        if self.hx <= 0 or self.hy <= 0:
            raise GridError(f"mesh sizes must be positive, got hx={self.hx}, hy={self.hy}")
        if self.hx != self.hy:
            # all operator formulas assume a single square-cell mesh size
            raise GridError(f"square cells required (hx == hy), got hx={self.hx}, hy={self.hy}")

    @property
    def h(self) -> float:
        return self.hx

    @property
    def lx(self) -> float:
        return self.nx * self.hx

    @property
    def ly(self) -> float:
        return self.ny * self.hy

    # staggered array shapes: number of owned faces per direction
    @property
    def n_ux(self) -> int:
        return self.nx if self.bc.periodic_x else self.nx - 1

    @property
    def n_uy(self) -> int:
        return self.ny

    @property
    def n_vx(self) -> int:
        return self.nx

    @property
    def n_vy(self) -> int:
        return self.ny if self.bc.periodic_y else self.ny - 1


def square_spec(n: int, bc: BoundaryKind, h: float = 1.0) -> GridSpec:
    """Shorthand for the common nx = ny case."""
    return GridSpec(nx=n, ny=n, hx=h, hy=h, bc=bc)


@dataclass(frozen=True)
class DofLayout:
    n_u: int
    n_v: int
    n_p: int

    @property
    def total(self) -> int:
        return self.n_u + self.n_v + self.n_p

    @property
    def n_velocity(self) -> int:
        return self.n_u + self.n_v


def dof_counts(spec: GridSpec) -> DofLayout:
    """Unknown counts for (u, v, p) under the spec's boundary kind."""
    return DofLayout(
        n_u=spec.n_ux * spec.n_uy,
        n_v=spec.n_vx * spec.n_vy,
        n_p=spec.nx * spec.ny,
    )


def _field_extent(spec: GridSpec, fld: Field) -> tuple[int, int, bool, bool]:
    """(width, height, wrap_x, wrap_y) of the owned index box for a field."""
    if fld is Field.U:
        return spec.n_ux, spec.n_uy, spec.bc.periodic_x, spec.bc.periodic_y
    if fld is Field.V:
        return spec.n_vx, spec.n_vy, spec.bc.periodic_x, spec.bc.periodic_y
    return spec.nx, spec.ny, spec.bc.periodic_x, spec.bc.periodic_y


def linear_index(spec: GridSpec, fld: Field, i: int, j: int) -> int:
    """0-based lexicographic dof index of the 1-based staggered location (i, j).

    Indices wrap in periodic directions; anything else out of the owned
    range raises GridError.
    """
    width, height, wrap_x, wrap_y = _field_extent(spec, fld)
    if wrap_x:
        i = (i - 1) % width + 1
    if wrap_y:
        j = (j - 1) % height + 1
    if not (1 <= i <= width and 1 <= j <= height):
        raise GridError(
            f"{fld.value}-index (i={i}, j={j}) outside owned range "
            f"1..{width} x 1..{height} for bc={spec.bc.value}"
        )
    return (j - 1) * width + (i - 1)


def owned_indices(spec: GridSpec, fld: Field):
    """Yield all owned (i, j) pairs of a field in lexicographic order."""
    width, height, _, _ = _field_extent(spec, fld)
    for j in range(1, height + 1):
        for i in range(1, width + 1):
            yield i, j


def u_coords(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Physical (x, y) of every u unknown, in dof order."""
    h = spec.h
    if spec.bc.periodic_x:
        xs = (np.arange(1, spec.n_ux + 1) - 1.0) * h
    else:
        xs = np.arange(1, spec.n_ux + 1) * h
    ys = (np.arange(1, spec.n_uy + 1) - 0.5) * h
    X, Y = np.meshgrid(xs, ys)  # row-major: y slowest, matching dof order
    return X.ravel(), Y.ravel()


def v_coords(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Physical (x, y) of every v unknown, in dof order."""
    h = spec.h
    xs = (np.arange(1, spec.n_vx + 1) - 0.5) * h
    if spec.bc.periodic_y:
        ys = (np.arange(1, spec.n_vy + 1) - 1.0) * h
    else:
        ys = np.arange(1, spec.n_vy + 1) * h
    X, Y = np.meshgrid(xs, ys)
    return X.ravel(), Y.ravel()


def p_coords(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Physical (x, y) of every pressure unknown (cell centers), dof order."""
    h = spec.h
    xs = (np.arange(1, spec.nx + 1) - 0.5) * h
    ys = (np.arange(1, spec.ny + 1) - 0.5) * h
    X, Y = np.meshgrid(xs, ys)
    return X.ravel(), Y.ravel()


@dataclass
class BlockVector:
    """A (u, v, p) triple of flat arrays matching a grid's DofLayout."""

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.p = np.asarray(self.p, dtype=float)

    @classmethod
    def zeros(cls, layout: DofLayout) -> "BlockVector":
        return cls(np.zeros(layout.n_u), np.zeros(layout.n_v), np.zeros(layout.n_p))

    @classmethod
    def from_flat(cls, x: np.ndarray, layout: DofLayout) -> "BlockVector":
        x = np.asarray(x, dtype=float)
        if x.shape != (layout.total,):
            raise ValueError(f"flat vector has length {x.shape}, expected ({layout.total},)")
        return cls(
            x[: layout.n_u].copy(),
            x[layout.n_u: layout.n_u + layout.n_v].copy(),
            x[layout.n_u + layout.n_v:].copy(),
        )

    @property
    def velocity(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.v, self.p])

    def layout(self) -> DofLayout:
        return DofLayout(self.u.size, self.v.size, self.p.size)

    def check_layout(self, layout: DofLayout) -> None:
        if self.layout() != layout:
            raise ValueError(f"block vector layout {self.layout()} does not match {layout}")
