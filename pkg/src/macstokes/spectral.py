"""Spectral analysis of the Schur complement and the preconditioned systems.

This module forms S = -D A^-1 G densely, counts its non-unitary eigenvalues,
estimates the inf-sup constant from the smallest nonzero eigenvalue, and
checks the structure of the preconditioned operators.

Counting conventions, fixed by the tabulated reference values this package
reproduces: ``n_nonunitary`` counts every eigenvalue with |lambda - 1| >
unit_tol INCLUDING the zero eigenvalue of the constant-pressure mode (for the
all-Dirichlet square grid this equals 4(n-1): the commutator rank 4n-5 plus
one).  ``n_nonunitary_nonzero`` excludes the zeros.  Counts are also reported
over a small tolerance ladder so plateau stability can be asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import BoundaryKind, GridSpec, dof_counts
from .io_utils import write_csv, write_json
from .linalg import dense_eigenvalues, poisson_solve
from .operators import (
    ProblemParams,
    StokesOperators,
    build_stokes_operators,
    commutator_matrix,
    scaled_unsteady_params,
    steady_params,
)
from .preconditioners import (
    PrecondKind,
    Preconditioner,
    build_context,
    build_preconditioner,
    schur_complement_dense_from_context,
)

SCHUR_PRESSURE_CAP = 4096
TOL_LADDER = (1e-6, 1e-8, 1e-10)


@dataclass
class SpectralReport:
    """Eigenvalue statistics of one (approximately) preconditioned Schur operator."""

    eigenvalues: np.ndarray
    dof_total: int
    unit_tol: float
    zero_tol: float
    n_zero: int
    n_unit: int
    n_nonunitary: int            # all eigenvalues with |lam - 1| > tol, zeros included
    n_nonunitary_nonzero: int    # same, restricted to nonzero eigenvalues
    lambda_min_nonzero: float
    lambda_max: float
    beta_est: float
    counts_by_tol: dict = field(default_factory=dict)
    eps2: float | None = None

    def to_dict(self) -> dict:
        return {
            "dof_total": self.dof_total,
            "unit_tol": self.unit_tol,
            "zero_tol": self.zero_tol,
            "n_zero": self.n_zero,
            "n_unit": self.n_unit,
            "n_nonunitary": self.n_nonunitary,
            "n_nonunitary_nonzero": self.n_nonunitary_nonzero,
            "lambda_min_nonzero": self.lambda_min_nonzero,
            "lambda_max": self.lambda_max,
            "beta_est": self.beta_est,
            "counts_by_tol": {f"{t:g}": list(c) for t, c in self.counts_by_tol.items()},
            "eps2": self.eps2,
            "n_eigenvalues": int(self.eigenvalues.size),
        }


def _real_eigenvalues(mat: np.ndarray, imag_tol: float = 1e-8) -> np.ndarray:
    eigs = dense_eigenvalues(mat)
    scale = max(1.0, np.abs(eigs).max()) if eigs.size else 1.0
    max_imag = np.abs(eigs.imag).max() if eigs.size else 0.0
    if max_imag > imag_tol * scale:
        raise ValueError(f"eigenvalues are not numerically real (max imag {max_imag:.3e})")
    return np.sort(eigs.real)


def make_report(eigenvalues: np.ndarray, dof_total: int, unit_tol: float = 1e-8,
                zero_tol_rel: float = 1e-10, eps2: float | None = None) -> SpectralReport:
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    lam_max = float(lam.max())
    zero_tol = zero_tol_rel * max(lam_max, 1.0)

    def counts(ut: float) -> tuple[int, int, int]:
        is_zero = np.abs(lam) <= zero_tol
        non_unit = np.abs(lam - 1.0) > ut * np.maximum(1.0, np.abs(lam))
        n_zero = int(is_zero.sum())
        n_nonunit = int(non_unit.sum())
        n_nonunit_nz = int((non_unit & ~is_zero).sum())
        return n_zero, n_nonunit, n_nonunit_nz

    n_zero, n_nonunit, n_nonunit_nz = counts(unit_tol)
    nonzero = lam[np.abs(lam) > zero_tol]
    lam_min_nz = float(nonzero.min()) if nonzero.size else float("nan")
    return SpectralReport(
        eigenvalues=lam,
        dof_total=dof_total,
        unit_tol=unit_tol,
        zero_tol=zero_tol,
        n_zero=n_zero,
        n_unit=int(lam.size) - n_nonunit,
        n_nonunitary=n_nonunit,
        n_nonunitary_nonzero=n_nonunit_nz,
        lambda_min_nonzero=lam_min_nz,
        lambda_max=lam_max,
        beta_est=float(np.sqrt(lam_min_nz)) if nonzero.size else float("nan"),
        counts_by_tol={t: counts(t) for t in TOL_LADDER},
        eps2=eps2,
    )


def schur_complement_dense(spec: GridSpec, params: ProblemParams,
                           ops: StokesOperators | None = None) -> np.ndarray:
    """S = -D A^-1 G as a dense symmetric matrix (desk scale)."""
    n_p = dof_counts(spec).n_p
    if n_p > SCHUR_PRESSURE_CAP:
        raise ValueError(f"dense Schur formation capped at n_p <= {SCHUR_PRESSURE_CAP}, got {n_p}")
    if ops is None:
        ops = build_stokes_operators(spec, params)
    ctx = build_context(ops)
    return schur_complement_dense_from_context(ops, ctx.A_fac)


def sinv_s_dense(spec: GridSpec, params: ProblemParams,
                 ops: StokesOperators | None = None) -> np.ndarray:
    """The approximately preconditioned Schur operator
    [ (rho/dt) (-Lc)^-1 + mu I ] S, formed columnwise."""
    if ops is None:
        ops = build_stokes_operators(spec, params)
    ctx = build_context(ops)
    S = schur_complement_dense_from_context(ops, ctx.A_fac)
    if params.rho_over_dt == 0.0:
        return params.mu * S
    cols = np.column_stack([poisson_solve(ctx.Lc_fac, S[:, j]) for j in range(S.shape[1])])
    return params.rho_over_dt * cols + params.mu * S


def analyze_steady(spec: GridSpec, unit_tol: float = 1e-8,
                   zero_tol_rel: float = 1e-10) -> SpectralReport:
    """Spectrum of the steady Schur complement (mu = 1, A = -L)."""
    params = steady_params(mu=1.0)
    S = schur_complement_dense(spec, params)
    lam = _real_eigenvalues(S)
    return make_report(lam, dof_counts(spec).total, unit_tol, zero_tol_rel)


def verify_unsteady_bounds(spec: GridSpec, eps2_list) -> list[SpectralReport]:
    """Spectra of the rescaled preconditioned Schur operator for each eps2."""
    reports = []
    for eps2 in eps2_list:
        params = scaled_unsteady_params(float(eps2))
        mat = sinv_s_dense(spec, params)
        lam = _real_eigenvalues(mat)
        reports.append(make_report(lam, dof_counts(spec).total, eps2=float(eps2)))
    return reports


def sigma_route_lambdas(spec: GridSpec, eps2: float,
                        zero_tol: float = 1e-10) -> np.ndarray:
    """Cross-check route for the unsteady spectrum via the generalized
    eigenvalue problem M z = sigma diag(A, -Sinv^-1) z and lam = sigma (1 - sigma).

    Each nonzero lam of the preconditioned Schur operator appears twice (both
    quadratic roots); use only on small grids.
    """
    params = scaled_unsteady_params(eps2)
    ops = build_stokes_operators(spec, params)
    ctx = build_context(ops)
    lay = ops.layout
    if lay.total > 600:
        raise ValueError("sigma-route cross-check is for small grids only")

    # dense Sinv, then invert it to get the weight block
    eye_p = np.eye(lay.n_p)
    sinv = np.column_stack([poisson_solve(ctx.Lc_fac, eye_p[:, j]) for j in range(lay.n_p)])
    sinv = params.rho_over_dt * sinv + params.mu * eye_p
    s_weight = np.linalg.inv(sinv)

    from .operators import SaddleOperator

    m_dense = SaddleOperator(ops).to_dense()
    b_dense = np.zeros_like(m_dense)
    nv = lay.n_velocity
    b_dense[:nv, :nv] = ops.A.toarray()
    b_dense[nv:, nv:] = -s_weight
    sigma = sla.eig(m_dense, b_dense, right=False)
    lam = sigma * (1.0 - sigma)
    lam = lam[np.abs(lam) > zero_tol]
    if lam.size and np.abs(lam.imag).max() > 1e-7 * max(1.0, np.abs(lam).max()):
        raise ValueError("sigma-route produced non-real lambda values")
    return np.sort(lam.real)


def verify_commutator_rank(spec: GridSpec, tol_rel: float = 1e-8) -> int:
    """Numerical rank of the commutation defect (A - G G*) G, steady mu = 1."""
    c = commutator_matrix(spec).toarray()
    s = sla.svdvals(c)
    smax = float(s.max()) if s.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.sum(s > tol_rel * smax))


def spectra_agree(lam_a: np.ndarray, lam_b: np.ndarray, tol: float = 1e-8,
                  unit_cluster_tol: float = 1e-6) -> tuple[bool, float]:
    """Multiset comparison of two preconditioned-system spectra.

    The unit eigenvalue of these operators is defective (Jordan blocks of
    size two), so dense eigensolvers scatter its copies in a cluster of
    radius about sqrt(machine eps); no implementation can pin those copies
    to 1e-8 individually.  The comparison therefore collapses the cluster
    around 1 to its count and compares the remaining well-conditioned
    eigenvalues entrywise after sorting.

    Returns (agree, max difference over the non-cluster part).
    """
    lam_a = np.asarray(lam_a, dtype=complex)
    lam_b = np.asarray(lam_b, dtype=complex)
    if lam_a.size != lam_b.size:
        return False, float("inf")
    in_a = np.abs(lam_a - 1.0) <= unit_cluster_tol
    in_b = np.abs(lam_b - 1.0) <= unit_cluster_tol
    if in_a.sum() != in_b.sum():
        return False, float("inf")
    rest_a = np.sort_complex(lam_a[~in_a])
    rest_b = np.sort_complex(lam_b[~in_b])
    diff = float(np.abs(rest_a - rest_b).max()) if rest_a.size else 0.0
    return diff <= tol, diff


@dataclass
class StructureReport:
    kind: PrecondKind
    eigenvalues: np.ndarray
    block21_max: float
    n_unit: int
    n_zero: int
    projector_defect: float | None = None  # max ||D (I - G Lc^-1 D) w|| / ||w||


def preconditioned_dense(precond: Preconditioner, m_dense: np.ndarray) -> np.ndarray:
    """P^-1 M materialized columnwise through the streaming application rule."""
    n = m_dense.shape[0]
    out = np.zeros((n, n))
    for j in range(n):
        out[:, j] = precond.apply_flat(m_dense[:, j])
    return out


def verify_preconditioned_structure(spec: GridSpec, params: ProblemParams,
                                    kind: PrecondKind, n_probes: int = 5,
                                    seed: int = 0) -> StructureReport:
    from .operators import SaddleOperator

    ops = build_stokes_operators(spec, params)
    lay = ops.layout
    if lay.total > 2000:
        raise ValueError("structure verification is desk-scale only")
    precond = build_preconditioner(spec, params, kind, ops=ops)
    t = preconditioned_dense(precond, SaddleOperator(ops).to_dense())

    nv = lay.n_velocity
    block21 = float(np.abs(t[nv:, :nv]).max())
    eigs = dense_eigenvalues(t)
    n_unit = int(np.sum(np.abs(eigs - 1.0) <= 1e-8 * np.maximum(1.0, np.abs(eigs))))
    n_zero = int(np.sum(np.abs(eigs) <= 1e-8))

    defect = None
    if kind in (PrecondKind.P1, PrecondKind.P1_EXACT):
        # the velocity projector I - G Lc^-1 D must land in the discretely
        # divergence-free space
        rng = np.random.default_rng(seed)
        ctx = precond.ctx
        worst = 0.0
        for _ in range(n_probes):
            w = rng.standard_normal(nv)
            proj = w + ops.G @ poisson_solve(ctx.Lc_fac, ops.D @ w)
            worst = max(worst, np.linalg.norm(ops.D @ proj) / np.linalg.norm(w))
        defect = float(worst)

    return StructureReport(
        kind=kind,
        eigenvalues=eigs,
        block21_max=block21,
        n_unit=n_unit,
        n_zero=n_zero,
        projector_defect=defect,
    )


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def eigenvalues_to_csv(path, eigenvalues: np.ndarray) -> None:
    eigs = np.asarray(eigenvalues)
    rows = [[float(np.real(e)), float(np.imag(e))] for e in eigs]
    write_csv(path, ["re", "im"], rows)


def report_to_json(path, report: SpectralReport | list[SpectralReport], extra: dict | None = None) -> None:
    if isinstance(report, SpectralReport):
        payload: dict = report.to_dict()
    else:
        payload = {"reports": [r.to_dict() for r in report]}
    if extra:
        payload.update(extra)
    write_json(path, payload)
