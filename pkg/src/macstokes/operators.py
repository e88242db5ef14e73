"""Discrete MAC operators: divergence, gradient, Laplacians, momentum, saddle.

Two independent assembly paths are provided.  The stencil path walks every
unknown and emits its finite-difference row; the Kronecker path builds the
same matrices from 1-D blocks (tridiagonal / bidiagonal / circulant).  They
must agree entrywise and the test suite checks that they do, which catches
index-map mistakes, the usual failure mode in staggered-grid codes.

Sign conventions:

* L and Lc are matrices of the Laplacian itself, so -L and -Lc are the
  positive (semi)definite operators;
* D is the divergence (rows are cells), G the gradient (rows are faces),
  and D == -G^T holds exactly;
* the saddle matrix is M = [[A, G], [-D, 0]] with A = (rho/dt) I - mu L,
  which is symmetric since -D == G^T.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.io
import scipy.sparse as sp

from .grid import BlockVector, BoundaryKind, DofLayout, Field, GridSpec, dof_counts, linear_index


class AssemblyError(ValueError):
    pass


class SingularMomentumWarning(UserWarning):
    """Steady + fully periodic momentum blocks are singular (constant modes)."""


# ---------------------------------------------------------------------------
# 1-D building blocks
# ---------------------------------------------------------------------------

OneDFamily = Literal["dirichlet", "periodic"]


@dataclass(frozen=True)
class OneDBlocks:
    """Integer-entried 1-D matrices underlying the 2-D Kronecker assembly.

    Dirichlet family: T_D (n-1, interior-face Laplacian), T_N (cell Laplacian
    with Neumann closure), T_E = T_N + 2 E_0 (tangential Laplacian with the
    factor-2 ghost reflection), E_0 (corner selector), B_D (n x (n-1)
    difference block with B_D B_D^T = T_N and B_D^T B_D = T_D).

    Periodic family: circulant T_P and B_P with B_P B_P^T = T_P.
    """

    family: OneDFamily
    n: int
    T_D: np.ndarray | None = None
    T_N: np.ndarray | None = None
    T_E: np.ndarray | None = None
    E_0: np.ndarray | None = None
    B_D: np.ndarray | None = None
    T_P: np.ndarray | None = None
    B_P: np.ndarray | None = None


def build_1d_blocks(n: int, family: OneDFamily) -> OneDBlocks:
    if n < 2:
        raise AssemblyError(f"1-D blocks need n >= 2, got n={n}")
    if family == "dirichlet":
        T_D = 2.0 * np.eye(n - 1) - np.eye(n - 1, k=1) - np.eye(n - 1, k=-1)
        T_N = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        T_N[0, 0] = 1.0
        T_N[-1, -1] = 1.0
        E_0 = np.zeros((n, n))
        E_0[0, 0] = 1.0
        E_0[-1, -1] = 1.0
        T_E = T_N + 2.0 * E_0
        B_D = np.zeros((n, n - 1))
        idx = np.arange(n - 1)
        B_D[idx, idx] = -1.0
        B_D[idx + 1, idx] = 1.0
        return OneDBlocks(family, n, T_D=T_D, T_N=T_N, T_E=T_E, E_0=E_0, B_D=B_D)
    if family == "periodic":
        T_P = np.zeros((n, n))
        B_P = np.zeros((n, n))
        for i in range(n):
            T_P[i, i] += 2.0
            T_P[i, (i + 1) % n] += -1.0
            T_P[i, (i - 1) % n] += -1.0  # n=2: both wraps land on the same column
            B_P[i, i] += 1.0
            B_P[i, (i + 1) % n] += -1.0
        return OneDBlocks(family, n, T_P=T_P, B_P=B_P)
    raise AssemblyError(f"unknown 1-D family {family!r}")


# ---------------------------------------------------------------------------
# stencil-path assembly
# ---------------------------------------------------------------------------

def _coo(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_gradient(spec: GridSpec) -> sp.csr_matrix:
    """Discrete pressure gradient G, (n_u + n_v) x n_p, entries +-1/h."""
    lay = dof_counts(spec)
    h = spec.h
    rows, cols, vals = [], [], []

    for j in range(1, spec.n_uy + 1):
        for i in range(1, spec.n_ux + 1):
            r = linear_index(spec, Field.U, i, j)
            if spec.bc.periodic_x:
                # face i sits between cells i-1 and i (wrapped)
                right, left = i, i - 1
            else:
                # face i sits between cells i and i+1
                right, left = i + 1, i
            rows += [r, r]
            cols += [linear_index(spec, Field.P, right, j), linear_index(spec, Field.P, left, j)]
            vals += [1.0 / h, -1.0 / h]

    off = lay.n_u
    for j in range(1, spec.n_vy + 1):
        for i in range(1, spec.n_vx + 1):
            r = off + linear_index(spec, Field.V, i, j)
            if spec.bc.periodic_y:
                top, bottom = j, j - 1
            else:
                top, bottom = j + 1, j
            rows += [r, r]
            cols += [linear_index(spec, Field.P, i, top), linear_index(spec, Field.P, i, bottom)]
            vals += [1.0 / h, -1.0 / h]

    return _coo(rows, cols, vals, (lay.n_velocity, lay.n_p))


def assemble_divergence(spec: GridSpec) -> sp.csr_matrix:
    """Discrete divergence D, n_p x (n_u + n_v); D == -G^T exactly.

    Assembled by walking the cell-centered divergence stencil rather than by
    transposing G, so the adjointness identity stays a real cross-check.
    """
    lay = dof_counts(spec)
    h = spec.h
    rows, cols, vals = [], [], []

    for j in range(1, spec.ny + 1):
        for i in range(1, spec.nx + 1):
            r = linear_index(spec, Field.P, i, j)
            # x-part: (u_right - u_left)/h
            if spec.bc.periodic_x:
                rows += [r, r]
                cols += [linear_index(spec, Field.U, i + 1, j), linear_index(spec, Field.U, i, j)]
                vals += [1.0 / h, -1.0 / h]
            else:
                if i <= spec.nx - 1:  # right face is a dof unless cell touches the east wall
                    rows.append(r)
                    cols.append(linear_index(spec, Field.U, i, j))
                    vals.append(1.0 / h)
                if i >= 2:
                    rows.append(r)
                    cols.append(linear_index(spec, Field.U, i - 1, j))
                    vals.append(-1.0 / h)
            # y-part: (v_top - v_bottom)/h
            if spec.bc.periodic_y:
                rows += [r, r]
                cols += [lay.n_u + linear_index(spec, Field.V, i, j + 1),
                         lay.n_u + linear_index(spec, Field.V, i, j)]
                vals += [1.0 / h, -1.0 / h]
            else:
                if j <= spec.ny - 1:
                    rows.append(r)
                    cols.append(lay.n_u + linear_index(spec, Field.V, i, j))
                    vals.append(1.0 / h)
                if j >= 2:
                    rows.append(r)
                    cols.append(lay.n_u + linear_index(spec, Field.V, i, j - 1))
                    vals.append(-1.0 / h)

    return _coo(rows, cols, vals, (lay.n_p, lay.n_velocity))


def assemble_velocity_laplacian(spec: GridSpec) -> sp.csr_matrix:
    """Vector Laplacian L (negative semidefinite), block-diagonal over (u, v)."""
    lay = dof_counts(spec)
    h2 = spec.h ** 2
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    def one_direction(r, fld, i, j, axis, off):
        """Emit -Laplacian terms of one coordinate direction for dof (i, j)."""
        periodic = spec.bc.periodic_x if axis == "x" else spec.bc.periodic_y
        if fld is Field.U:
            size = spec.n_ux if axis == "x" else spec.n_uy
            normal = axis == "x"
        else:
            size = spec.n_vx if axis == "x" else spec.n_vy
            normal = axis == "y"
        k = i if axis == "x" else j

        def nb(kk):
            return (linear_index(spec, fld, kk, j) if axis == "x"
                    else linear_index(spec, fld, i, kk)) + off

        if periodic:
            add(r, r, 2.0 / h2)
            add(r, nb(k + 1), -1.0 / h2)
            add(r, nb(k - 1), -1.0 / h2)  # duplicates sum at finalize (n=2 wrap)
        elif normal:
            # wall neighbor is an eliminated boundary value: T_D row
            add(r, r, 2.0 / h2)
            if k + 1 <= size:
                add(r, nb(k + 1), -1.0 / h2)
            if k - 1 >= 1:
                add(r, nb(k - 1), -1.0 / h2)
        else:
            # tangential Dirichlet: ghost reflection doubles the wall pull (T_E row)
            diag = 3.0 if (k == 1 or k == size) else 2.0
            add(r, r, diag / h2)
            if k + 1 <= size:
                add(r, nb(k + 1), -1.0 / h2)
            if k - 1 >= 1:
                add(r, nb(k - 1), -1.0 / h2)

    for j in range(1, spec.n_uy + 1):
        for i in range(1, spec.n_ux + 1):
            r = linear_index(spec, Field.U, i, j)
            one_direction(r, Field.U, i, j, "x", 0)
            one_direction(r, Field.U, i, j, "y", 0)
    off = lay.n_u
    for j in range(1, spec.n_vy + 1):
        for i in range(1, spec.n_vx + 1):
            r = off + linear_index(spec, Field.V, i, j)
            one_direction(r, Field.V, i, j, "x", off)
            one_direction(r, Field.V, i, j, "y", off)

    neg_l = _coo(rows, cols, vals, (lay.n_velocity, lay.n_velocity))
    return (-neg_l).tocsr()


def assemble_pressure_laplacian(spec: GridSpec) -> sp.csr_matrix:
    """Cell-centered pressure Laplacian Lc (negative semidefinite), Lc == D G.

    Dirichlet velocity walls induce homogeneous Neumann closure (T_N rows);
    periodic directions wrap.  Assembled by its own stencil so the D G == Lc
    identity is a genuine test.
    """
    lay = dof_counts(spec)
    h2 = spec.h ** 2
    rows, cols, vals = [], [], []

    for j in range(1, spec.ny + 1):
        for i in range(1, spec.nx + 1):
            r = linear_index(spec, Field.P, i, j)
            diag = 0.0
            for axis in ("x", "y"):
                periodic = spec.bc.periodic_x if axis == "x" else spec.bc.periodic_y
                size = spec.nx if axis == "x" else spec.ny
                k = i if axis == "x" else j
                for kk in (k - 1, k + 1):
                    if periodic or 1 <= kk <= size:
                        c = (linear_index(spec, Field.P, kk, j) if axis == "x"
                             else linear_index(spec, Field.P, i, kk))
                        rows.append(r)
                        cols.append(c)
                        vals.append(-1.0 / h2)
                        diag += 1.0 / h2  # Neumann: diagonal counts existing neighbors
            rows.append(r)
            cols.append(r)
            vals.append(diag)

    neg_lc = _coo(rows, cols, vals, (lay.n_p, lay.n_p))
    return (-neg_lc).tocsr()


# ---------------------------------------------------------------------------
# Kronecker-path assembly (independent cross-check of the stencil path)
# ---------------------------------------------------------------------------

def _spk(a: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(a)


def _one_d(spec: GridSpec, axis: str) -> OneDBlocks:
    periodic = spec.bc.periodic_x if axis == "x" else spec.bc.periodic_y
    n = spec.nx if axis == "x" else spec.ny
    return build_1d_blocks(n, "periodic" if periodic else "dirichlet")


def kron_divergence(spec: GridSpec) -> sp.csr_matrix:
    """D via -D = (1/h) [I (x) B_x, B_y (x) I]."""
    bx = _one_d(spec, "x")
    by = _one_d(spec, "y")
    Bx = bx.B_P if bx.family == "periodic" else bx.B_D
    By = by.B_P if by.family == "periodic" else by.B_D
    neg_d = sp.hstack([
        sp.kron(sp.eye(spec.n_uy), _spk(Bx)),
        sp.kron(_spk(By), sp.eye(spec.n_vx)),
    ]) / spec.h
    return (-neg_d).tocsr()


def kron_gradient(spec: GridSpec) -> sp.csr_matrix:
    return (-kron_divergence(spec).T).tocsr()


def kron_velocity_laplacian(spec: GridSpec) -> sp.csr_matrix:
    bx = _one_d(spec, "x")
    by = _one_d(spec, "y")
    # u: normal operator along x, tangential along y;  v mirrored
    u_norm_x = bx.T_P if bx.family == "periodic" else bx.T_D
    u_tan_y = by.T_P if by.family == "periodic" else by.T_E
    v_tan_x = bx.T_P if bx.family == "periodic" else bx.T_E
    v_norm_y = by.T_P if by.family == "periodic" else by.T_D
    neg_lu = sp.kron(sp.eye(spec.n_uy), _spk(u_norm_x)) + sp.kron(_spk(u_tan_y), sp.eye(spec.n_ux))
    neg_lv = sp.kron(sp.eye(spec.n_vy), _spk(v_tan_x)) + sp.kron(_spk(v_norm_y), sp.eye(spec.n_vx))
    neg_l = sp.block_diag([neg_lu, neg_lv]) / spec.h ** 2
    return (-neg_l).tocsr()


def kron_pressure_laplacian(spec: GridSpec) -> sp.csr_matrix:
    bx = _one_d(spec, "x")
    by = _one_d(spec, "y")
    tx = bx.T_P if bx.family == "periodic" else bx.T_N
    ty = by.T_P if by.family == "periodic" else by.T_N
    neg_lc = (sp.kron(sp.eye(spec.ny), _spk(tx)) + sp.kron(_spk(ty), sp.eye(spec.nx))) / spec.h ** 2
    return (-neg_lc).tocsr()


# ---------------------------------------------------------------------------
# momentum block, full saddle operator, commutator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemParams:
    """Physical parameters of one saddle solve.

    steady=True drops the rho/dt reaction term entirely (A = -mu L).
    mu = 0 with steady=False gives the mixed elliptic degenerate case A = (rho/dt) I.
    """

    rho: float
    mu: float
    dt: float = 1.0
    steady: bool = False

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.steady:
            if self.mu == 0:
                raise ValueError("steady mode needs mu > 0 (A = -mu L)")
        else:
            if self.dt <= 0:
                raise ValueError(f"unsteady mode needs dt > 0, got {self.dt}")
            if self.rho < 0:
                raise ValueError(f"rho must be >= 0, got {self.rho}")

    @property
    def rho_over_dt(self) -> float:
        return 0.0 if self.steady else self.rho / self.dt


def steady_params(mu: float = 1.0) -> ProblemParams:
    return ProblemParams(rho=0.0, mu=mu, dt=1.0, steady=True)


def scaled_unsteady_params(eps2: float) -> ProblemParams:
    """Rescaled unsteady system A = I - eps2 * L (eps2 = mu dt / rho)."""
    if eps2 < 0:
        raise ValueError(f"eps2 must be >= 0, got {eps2}")
    return ProblemParams(rho=1.0, mu=eps2, dt=1.0, steady=False)


def momentum_is_singular(spec: GridSpec, params: ProblemParams) -> bool:
    """True when A has the constant-velocity null space (steady + fully periodic,
    or the degenerate mu = 0 case with rho/dt = 0 which is rejected upstream)."""
    if params.steady and spec.bc is BoundaryKind.PERIODIC_ALL:
        return True
    if not params.steady and params.rho == 0 and spec.bc is BoundaryKind.PERIODIC_ALL:
        return True
    return False


def assemble_momentum(spec: GridSpec, params: ProblemParams,
                      L: sp.csr_matrix | None = None) -> sp.csr_matrix:
    """A = (rho/dt) I - mu L (or -mu L when steady)."""
    if L is None:
        L = assemble_velocity_laplacian(spec)
    n = L.shape[0]
    A = (params.rho_over_dt * sp.eye(n) - params.mu * L).tocsr()
    if momentum_is_singular(spec, params):
        warnings.warn(
            "momentum block is singular for steady fully periodic boundaries "
            "(constant-velocity null space); use a null-space aware factorization",
            SingularMomentumWarning, stacklevel=2)
    A.sort_indices()
    return A


@dataclass
class StokesOperators:
    """Assembled blocks of one discrete Stokes problem."""

    spec: GridSpec
    params: ProblemParams
    L: sp.csr_matrix
    G: sp.csr_matrix
    D: sp.csr_matrix
    Lc: sp.csr_matrix
    A: sp.csr_matrix

    @property
    def layout(self) -> DofLayout:
        return dof_counts(self.spec)

    @property
    def momentum_singular(self) -> bool:
        return momentum_is_singular(self.spec, self.params)


def build_stokes_operators(spec: GridSpec, params: ProblemParams) -> StokesOperators:
    L = assemble_velocity_laplacian(spec)
    with warnings.catch_warnings():
        if momentum_is_singular(spec, params):
            warnings.simplefilter("ignore", SingularMomentumWarning)
        A = assemble_momentum(spec, params, L=L)
    if momentum_is_singular(spec, params):
        warnings.warn("momentum block is singular (steady fully periodic); "
                      "factorize with the constant-velocity null space declared",
                      SingularMomentumWarning, stacklevel=2)
    return StokesOperators(
        spec=spec,
        params=params,
        L=L,
        G=assemble_gradient(spec),
        D=assemble_divergence(spec),
        Lc=assemble_pressure_laplacian(spec),
        A=A,
    )


class SaddleOperator:
    """Block operator M = [[A, G], [-D, 0]] supporting matvec on flat and
    block vectors; dense/sparse materialization is on demand only."""

    def __init__(self, ops: StokesOperators):
        self.ops = ops
        self.layout = ops.layout

    @property
    def shape(self) -> tuple[int, int]:
        n = self.layout.total
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        lay = self.layout
        uv = x[: lay.n_velocity]
        p = x[lay.n_velocity:]
        top = self.ops.A @ uv + self.ops.G @ p
        bottom = -(self.ops.D @ uv)
        return np.concatenate([top, bottom])

    def matvec_block(self, x: BlockVector) -> BlockVector:
        out = self.matvec(x.to_flat())
        return BlockVector.from_flat(out, self.layout)

    def to_sparse(self) -> sp.csr_matrix:
        lay = self.layout
        return sp.bmat([
            [self.ops.A, self.ops.G],
            [-self.ops.D, sp.csr_matrix((lay.n_p, lay.n_p))],
        ]).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def assemble_saddle(spec: GridSpec, params: ProblemParams) -> SaddleOperator:
    return SaddleOperator(build_stokes_operators(spec, params))


def commutator_matrix(spec: GridSpec, params: ProblemParams | None = None) -> sp.csr_matrix:
    """(A - G G*) G = (A + G D) G, the boundary-induced commutation defect.

    Defaults to the steady unit-viscosity case A = -L.  Zero for fully
    periodic boundaries; for Dirichlet boundaries it is supported on the
    near-wall stencil rows only.
    """
    if params is None:
        params = steady_params(mu=1.0)
    ops = build_stokes_operators(spec, params)
    return ((ops.A + ops.G @ ops.D) @ ops.G).tocsr()


def commutator_closed_form(spec: GridSpec) -> sp.csr_matrix:
    """(2/h^3) [E_0 (x) B_D^T ; B_D^T (x) E_0] for the all-Dirichlet square grid."""
    if spec.bc is not BoundaryKind.DIRICHLET_ALL:
        raise AssemblyError("closed form applies to all-Dirichlet boundaries only")
    if spec.nx != spec.ny:
        raise AssemblyError("closed form applies to square grids (nx == ny)")
    b = build_1d_blocks(spec.nx, "dirichlet")
    top = sp.kron(_spk(b.E_0), _spk(b.B_D.T))
    bottom = sp.kron(_spk(b.B_D.T), _spk(b.E_0))
    return (2.0 / spec.h ** 3) * sp.vstack([top, bottom]).tocsr()


def export_matrix_market(matrix, path) -> None:
    """Write a matrix in MatrixMarket coordinate format (1-based indices)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))
