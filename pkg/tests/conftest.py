"""Shared helpers: random block probes and the dense factor-product oracle.

The oracle builds each preconditioner as an explicit dense product of its
defining block factors, using projected inverses for the singular blocks.
It shares nothing with the streaming application code, so agreement between
the two pins down every sign and ordering choice.
"""

import numpy as np
import pytest

from macstokes import BlockVector, BoundaryKind
from macstokes.operators import StokesOperators
from macstokes.preconditioners import PrecondKind, momentum_nullspace

ALL_BCS = list(BoundaryKind)


def random_probe(layout, rng, mean_zero_p=True):
    """Random block vector; the pressure part is projected to mean zero by
    default since the analysis pressure space excludes the constant mode."""
    r = BlockVector(
        rng.standard_normal(layout.n_u),
        rng.standard_normal(layout.n_v),
        rng.standard_normal(layout.n_p),
    )
    if mean_zero_p:
        r.p -= r.p.mean()
    return r


def compatible_rhs(ops: StokesOperators, rng) -> np.ndarray:
    """Random right-hand side orthogonal to the saddle matrix null space."""
    lay = ops.layout
    b = rng.standard_normal(lay.total)
    b[lay.n_velocity:] -= b[lay.n_velocity:].mean()
    if ops.momentum_singular:
        b[: lay.n_u] -= b[: lay.n_u].mean()
        b[lay.n_u: lay.n_velocity] -= b[lay.n_u: lay.n_velocity].mean()
    return b


def projected_inverse(mat: np.ndarray, nullspace: np.ndarray | None) -> np.ndarray:
    """Dense inverse; with a null space, the regularized inverse sandwiched
    between projectors (the dense mirror of the package's solve convention)."""
    if nullspace is None:
        return np.linalg.inv(mat)
    q, _ = np.linalg.qr(nullspace.reshape(mat.shape[0], -1))
    proj = np.eye(mat.shape[0]) - q @ q.T
    return proj @ np.linalg.inv(mat + q @ q.T) @ proj


def dense_oracle_blocks(ops: StokesOperators):
    """Dense A^-1, (-Lc)^-1, Sinv and S^-1 with the projection conventions."""
    lay = ops.layout
    a = ops.A.toarray()
    a_inv = projected_inverse(a, momentum_nullspace(ops))
    e_p = np.ones((lay.n_p, 1))
    neg_lc_inv = projected_inverse(-ops.Lc.toarray(), e_p)
    rho_dt = ops.params.rho_over_dt
    sinv = rho_dt * neg_lc_inv + ops.params.mu * np.eye(lay.n_p)
    s_dense = -(ops.D.toarray() @ a_inv @ ops.G.toarray())
    s_exact_inv = projected_inverse(0.5 * (s_dense + s_dense.T), e_p)
    return a_inv, neg_lc_inv, sinv, s_exact_inv


def dense_factor_product(ops: StokesOperators, kind: PrecondKind) -> np.ndarray:
    """The defining block factorization of each preconditioner, multiplied out."""
    lay = ops.layout
    nv, npr = lay.n_velocity, lay.n_p
    G = ops.G.toarray()
    D = ops.D.toarray()
    L = ops.L.toarray()
    a_inv, neg_lc_inv, sinv, s_exact_inv = dense_oracle_blocks(ops)
    I_v, I_p = np.eye(nv), np.eye(npr)
    rho_dt = ops.params.rho_over_dt
    mu = ops.params.mu

    def blk(b11, b12, b21, b22):
        return np.block([[b11, b12], [b21, b22]])

    lc_inv = -neg_lc_inv
    a_step = blk(a_inv, np.zeros((nv, npr)), np.zeros((npr, nv)), I_p)
    resid_step = blk(I_v, np.zeros((nv, npr)), -D, -I_p)

    if kind is PrecondKind.P1:
        head = blk(I_v, G @ lc_inv, np.zeros((npr, nv)), sinv)
        return head @ resid_step @ a_step
    if kind is PrecondKind.P1_EXACT:
        head = blk(I_v, G @ lc_inv, np.zeros((npr, nv)), s_exact_inv)
        return head @ resid_step @ a_step
    if kind is PrecondKind.P2:
        scale = blk(I_v, np.zeros((nv, npr)), np.zeros((npr, nv)), -sinv)
        lower = blk(I_v, np.zeros((nv, npr)), D, I_p)
        return scale @ lower @ a_step
    if kind is PrecondKind.P3:
        upper = blk(I_v, -G, np.zeros((npr, nv)), I_p)
        scale = blk(I_v, np.zeros((nv, npr)), np.zeros((npr, nv)), -sinv)
        return a_step @ upper @ scale
    if kind is PrecondKind.P4:
        head = blk(I_v, -G, np.zeros((npr, nv)),
                   rho_dt * I_p + mu * neg_lc_inv @ D @ L @ G)
        mid = blk(I_v, np.zeros((nv, npr)), np.zeros((npr, nv)), neg_lc_inv)
        return head @ mid @ resid_step @ a_step
    raise ValueError(kind)
