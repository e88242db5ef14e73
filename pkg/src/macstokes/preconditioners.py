"""Projection-method and triangular block preconditioners for the saddle system.

Every preconditioner is a linear map on block vectors built from factorized
operators.  The binding definitions are block factorizations; the streaming
sequences below expand them once and are checked against dense products of
the factors in the test suite, which removes any sign ambiguity.

Application rules (r = (r_u, r_p), w = A^-1 r_u, s = -D w - r_p,
phi = (-Lc)^-1 s via the mean-consistent Poisson solve):

* p1       pressure-correction projection:
             u = w - G phi,  p = (rho/dt) phi + mu s
* p1exact  projection with the exact Schur complement S = -D A^-1 G:
             u = w - G phi,  p = S^-1 s
* p2       lower triangular:  u = w,  p = -Sinv(D w + r_p)
* p3       upper triangular:  p = -Sinv(r_p),  u = A^-1 (r_u - G p)
* p4       modified pressure correction:
             u = w - G phi,  p = (rho/dt) phi + mu (-Lc)^-1 (D L G phi)

with Sinv(x) = (rho/dt) (-Lc)^-1 x + mu x, the spectrally equivalent
approximation of the inverse Schur complement (Sinv = mu I when steady).
Every (-Lc)^-1 goes through the mean-projected Poisson solve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .grid import BlockVector, BoundaryKind, DofLayout, GridSpec
from .linalg import DenseSpdFactorization, SpdFactorization, poisson_solve, spd_factorize
from .operators import ProblemParams, StokesOperators, build_stokes_operators

P1EXACT_PRESSURE_CAP = 4096  # dense Schur formation is desk-scale only


class PrecondKind(enum.Enum):
    NONE = "none"
    P1 = "p1"
    P1_EXACT = "p1exact"
    P2 = "p2"
    P3 = "p3"
    P4 = "p4"

    @classmethod
    def from_name(cls, name: str) -> "PrecondKind":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown preconditioner {name!r}; expected one of "
                         + ", ".join(k.value for k in cls))


def momentum_nullspace(ops: StokesOperators) -> np.ndarray | None:
    """Constant-per-component velocity null space of the singular steady
    periodic momentum block, None otherwise."""
    if not ops.momentum_singular:
        return None
    lay = ops.layout
    basis = np.zeros((lay.n_velocity, 2))
    basis[: lay.n_u, 0] = 1.0
    basis[lay.n_u:, 1] = 1.0
    return basis


@dataclass
class PreconditionerContext:
    """Factorized operators shared by the application rules."""

    ops: StokesOperators
    A_fac: SpdFactorization
    Lc_fac: SpdFactorization
    S_dense_fac: DenseSpdFactorization | None = None

    @property
    def spec(self) -> GridSpec:
        return self.ops.spec

    @property
    def params(self) -> ProblemParams:
        return self.ops.params

    @property
    def layout(self) -> DofLayout:
        return self.ops.layout

    def sinv(self, x: np.ndarray) -> np.ndarray:
        """Approximate inverse Schur complement (rho/dt)(-Lc)^-1 + mu I."""
        p = self.params
        if p.rho_over_dt == 0.0:
            return p.mu * x
        return p.rho_over_dt * poisson_solve(self.Lc_fac, x) + p.mu * x


def build_context(ops: StokesOperators, need_exact_schur: bool = False) -> PreconditionerContext:
    A_fac = spd_factorize(ops.A, regularize_nullspace=ops.momentum_singular,
                          nullspace=momentum_nullspace(ops))
    Lc_fac = spd_factorize(-ops.Lc, regularize_nullspace=True)
    s_fac = None
    if need_exact_schur:
        n_p = ops.layout.n_p
        if n_p > P1EXACT_PRESSURE_CAP:
            raise ValueError(
                f"exact Schur preconditioner capped at n_p <= {P1EXACT_PRESSURE_CAP}, got {n_p}")
        S = schur_complement_dense_from_context(ops, A_fac)
        s_fac = DenseSpdFactorization(S, nullspace=np.ones((n_p, 1)))
    return PreconditionerContext(ops=ops, A_fac=A_fac, Lc_fac=Lc_fac, S_dense_fac=s_fac)


def schur_complement_dense_from_context(ops: StokesOperators,
                                        A_fac: SpdFactorization) -> np.ndarray:
    """S = -D A^-1 G formed densely column by column (symmetrized)."""
    G = ops.G.toarray()
    X = A_fac.solve_many(G)
    S = -(ops.D @ X)
    return 0.5 * (S + S.T)


# ---------------------------------------------------------------------------
# application rules
# ---------------------------------------------------------------------------

def _split(ctx: PreconditionerContext, r: BlockVector) -> tuple[np.ndarray, np.ndarray]:
    r.check_layout(ctx.layout)
    return r.velocity, r.p


def _pack(ctx: PreconditionerContext, uv: np.ndarray, p: np.ndarray) -> BlockVector:
    lay = ctx.layout
    return BlockVector(uv[: lay.n_u], uv[lay.n_u:], p)


def _projection_step(ctx: PreconditionerContext, r: BlockVector):
    """Shared head of p1/p1exact/p4: w, s, phi.  The singular steady periodic
    momentum block is applied through the projected pseudo-inverse."""
    r_uv, r_p = _split(ctx, r)
    w = ctx.A_fac.solve_projected(r_uv)
    s = -(ctx.ops.D @ w) - r_p
    phi = poisson_solve(ctx.Lc_fac, s)
    return w, s, phi


def apply_p1(ctx: PreconditionerContext, r: BlockVector) -> BlockVector:
    w, s, phi = _projection_step(ctx, r)
    u_out = w - ctx.ops.G @ phi
    p_out = ctx.params.rho_over_dt * phi + ctx.params.mu * s
    return _pack(ctx, u_out, p_out)


def apply_p1_exact(ctx: PreconditionerContext, r: BlockVector) -> BlockVector:
    if ctx.S_dense_fac is None:
        raise ValueError("context was built without the dense Schur factorization")
    w, s, phi = _projection_step(ctx, r)
    u_out = w - ctx.ops.G @ phi
    p_out = ctx.S_dense_fac.solve(s)
    return _pack(ctx, u_out, p_out)


def apply_p2(ctx: PreconditionerContext, r: BlockVector) -> BlockVector:
    r_uv, r_p = _split(ctx, r)
    w = ctx.A_fac.solve_projected(r_uv)
    p_out = -ctx.sinv(ctx.ops.D @ w + r_p)
    return _pack(ctx, w, p_out)


def apply_p3(ctx: PreconditionerContext, r: BlockVector) -> BlockVector:
    r_uv, r_p = _split(ctx, r)
    p_out = -ctx.sinv(r_p)
    u_out = ctx.A_fac.solve_projected(r_uv - ctx.ops.G @ p_out)
    return _pack(ctx, u_out, p_out)


def apply_p4(ctx: PreconditionerContext, r: BlockVector) -> BlockVector:
    w, s, phi = _projection_step(ctx, r)
    u_out = w - ctx.ops.G @ phi
    correction = ctx.ops.D @ (ctx.ops.L @ (ctx.ops.G @ phi))
    p_out = ctx.params.rho_over_dt * phi + ctx.params.mu * poisson_solve(ctx.Lc_fac, correction)
    return _pack(ctx, u_out, p_out)


_APPLY = {
    PrecondKind.P1: apply_p1,
    PrecondKind.P1_EXACT: apply_p1_exact,
    PrecondKind.P2: apply_p2,
    PrecondKind.P3: apply_p3,
    PrecondKind.P4: apply_p4,
}


class Preconditioner:
    """Tagged application rule over a factorized operator set."""

    def __init__(self, kind: PrecondKind, ctx: PreconditionerContext | None):
        if kind is not PrecondKind.NONE and ctx is None:
            raise ValueError(f"{kind.value} needs a PreconditionerContext")
        self.kind = kind
        self.ctx = ctx

    def apply_block(self, r: BlockVector) -> BlockVector:
        if self.kind is PrecondKind.NONE:
            return BlockVector(r.u.copy(), r.v.copy(), r.p.copy())
        return _APPLY[self.kind](self.ctx, r)

    def apply_flat(self, x: np.ndarray) -> np.ndarray:
        if self.kind is PrecondKind.NONE:
            return np.array(x, dtype=float, copy=True)
        lay = self.ctx.layout
        return self.apply_block(BlockVector.from_flat(x, lay)).to_flat()

    __call__ = apply_flat


def build_preconditioner(spec: GridSpec, params: ProblemParams, kind: PrecondKind,
                         ops: StokesOperators | None = None,
                         ctx: PreconditionerContext | None = None) -> Preconditioner:
    """Assemble/factorize as needed and return the ready-to-apply preconditioner."""
    if kind is PrecondKind.NONE:
        return Preconditioner(kind, None)
    if ctx is None:
        if ops is None:
            ops = build_stokes_operators(spec, params)
        ctx = build_context(ops, need_exact_schur=(kind is PrecondKind.P1_EXACT))
    elif kind is PrecondKind.P1_EXACT and ctx.S_dense_fac is None:
        ctx = build_context(ctx.ops, need_exact_schur=True)
    return Preconditioner(kind, ctx)


def dense_apply_matrix(precond: Preconditioner, n: int | None = None) -> np.ndarray:
    """Materialize the preconditioner as a dense matrix by applying it to
    the identity columns (desk scale)."""
    if precond.kind is PrecondKind.NONE:
        if n is None:
            raise ValueError("dense identity needs an explicit size")
        return np.eye(n)
    total = precond.ctx.layout.total
    cols = np.zeros((total, total))
    e = np.zeros(total)
    for j in range(total):
        e[:] = 0.0
        e[j] = 1.0
        cols[:, j] = precond.apply_flat(e)
    return cols
