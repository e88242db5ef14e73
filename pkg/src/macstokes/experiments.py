"""Forced-Stokes benchmark driven by the traveling Taylor vortex.

One backward-Euler step is taken from exact initial data: the nonlinear
advection term of the previous step is moved to the right-hand side, wall
values enter through the ghost-reflection lift and through the divergence
stencil, and the saddle system is solved by preconditioned GMRES.  The
iteration-count table and the one-step convergence study live here.

The analytic field solves the unforced Navier-Stokes equations only for
rho = 1; for other densities only iteration counts are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import BlockVector, BoundaryKind, GridSpec, dof_counts, p_coords, u_coords, v_coords
from .linalg import GmresConfig, IterationReport, gmres
from .operators import (
    ProblemParams,
    SaddleOperator,
    StokesOperators,
    build_stokes_operators,
    steady_params,
)
from .preconditioners import (
    PrecondKind,
    Preconditioner,
    PreconditionerContext,
    build_context,
    build_preconditioner,
)

TABLE_RHOS = (100.0, 10.0, 1.0, 0.1, 0.01, 0.0)
TABLE_KINDS = (PrecondKind.P1, PrecondKind.P3, PrecondKind.P4)
# left preconditioning for the projection family, right for the upper
# triangular variant (the two conventions are compared in the references)
DEFAULT_SIDES = {
    PrecondKind.P1: "left",
    PrecondKind.P1_EXACT: "left",
    PrecondKind.P2: "left",
    PrecondKind.P3: "right",
    PrecondKind.P4: "left",
    PrecondKind.NONE: "left",
}


@dataclass(frozen=True)
class TaylorVortexParams:
    """Domain and physical defaults of the benchmark (L = 64, h = 1, dt = 0.5*h^2/mu)."""

    L: float = 64.0
    mu: float = 1.0
    rho: float = 1.0
    dt: float = 0.5
    t0: float = 0.0


def taylor_exact(x, y, t, tv: TaylorVortexParams):
    """Exact traveling-vortex velocity and pressure at (x, y, t)."""
    k = 2.0 * np.pi / tv.L
    decay = np.exp(-8.0 * np.pi ** 2 * tv.mu * t / tv.L ** 2)
    X = k * (np.asarray(x, dtype=float) - t)
    Y = k * (np.asarray(y, dtype=float) - t)
    u = 1.0 - 2.0 * decay * np.cos(X) * np.sin(Y)
    v = 1.0 + 2.0 * decay * np.sin(X) * np.cos(Y)
    p = -(decay ** 2) * (np.cos(2.0 * X) + np.cos(2.0 * Y))
    return u, v, p


def taylor_spec(n: int, bc: BoundaryKind, tv: TaylorVortexParams | None = None) -> GridSpec:
    tv = tv or TaylorVortexParams()
    h = tv.L / n
    return GridSpec(nx=n, ny=n, hx=h, hy=h, bc=bc)


def params_for_rho(rho: float, tv: TaylorVortexParams) -> ProblemParams:
    """rho = 0 selects the steady system (reaction term dropped entirely)."""
    if rho == 0.0:
        return steady_params(mu=tv.mu)
    return ProblemParams(rho=rho, mu=tv.mu, dt=tv.dt, steady=False)


def sample_taylor(spec: GridSpec, tv: TaylorVortexParams, t: float) -> BlockVector:
    """Exact solution sampled at the staggered unknown locations."""
    ux, uy = u_coords(spec)
    vx, vy = v_coords(spec)
    px, py = p_coords(spec)
    u, _, _ = taylor_exact(ux, uy, t, tv)
    _, v, _ = taylor_exact(vx, vy, t, tv)
    _, _, p = taylor_exact(px, py, t, tv)
    return BlockVector(u, v, p)


@dataclass(frozen=True)
class WallData:
    """Boundary values of (u, v) on the walls, as vectorized callables (x, y) -> value."""

    u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    v: Callable[[np.ndarray, np.ndarray], np.ndarray]


def zero_walls() -> WallData:
    zero = lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    return WallData(u=zero, v=zero)


def taylor_walls(tv: TaylorVortexParams, t: float) -> WallData:
    return WallData(
        u=lambda x, y: taylor_exact(x, y, t, tv)[0],
        v=lambda x, y: taylor_exact(x, y, t, tv)[1],
    )


# ---------------------------------------------------------------------------
# advection term
# ---------------------------------------------------------------------------

def _u_grid_coords(spec: GridSpec):
    h = spec.h
    if spec.bc.periodic_x:
        xs = (np.arange(spec.n_ux)) * h
    else:
        xs = (np.arange(spec.n_ux) + 1.0) * h
    ys = (np.arange(spec.n_uy) + 0.5) * h
    return xs, ys


def _v_grid_coords(spec: GridSpec):
    h = spec.h
    xs = (np.arange(spec.n_vx) + 0.5) * h
    if spec.bc.periodic_y:
        ys = (np.arange(spec.n_vy)) * h
    else:
        ys = (np.arange(spec.n_vy) + 1.0) * h
    return xs, ys


def advection_term(spec: GridSpec, ub: BlockVector, walls: WallData | None = None) -> np.ndarray:
    """Centered staggered discretization of (u . grad) u at the velocity points.

    Transverse components are four-point averages; missing neighbors come
    from wall values (on-wall normal components) or ghost reflection
    (tangential components), matching the Laplacian boundary rules.
    """
    walls = walls or zero_walls()
    ub.check_layout(dof_counts(spec))
    h = spec.h
    nx, ny = spec.nx, spec.ny
    U2 = ub.u.reshape(spec.n_uy, spec.n_ux)
    V2 = ub.v.reshape(spec.n_vy, spec.n_vx)
    uxs, uys = _u_grid_coords(spec)
    vxs, vys = _v_grid_coords(spec)

    # --- u momentum: u du/dx + vbar du/dy at the u points -----------------
    if spec.bc.periodic_x:
        uE = np.roll(U2, -1, axis=1)
        uW = np.roll(U2, 1, axis=1)
    else:
        uE = np.empty_like(U2)
        uW = np.empty_like(U2)
        uE[:, :-1] = U2[:, 1:]
        uE[:, -1] = walls.u(spec.lx, uys)
        uW[:, 1:] = U2[:, :-1]
        uW[:, 0] = walls.u(0.0, uys)
    if spec.bc.periodic_y:
        uN = np.roll(U2, -1, axis=0)
        uS = np.roll(U2, 1, axis=0)
    else:
        uN = np.empty_like(U2)
        uS = np.empty_like(U2)
        uN[:-1] = U2[1:]
        uN[-1] = 2.0 * walls.u(uxs, spec.ly) - U2[-1]  # ghost reflection
        uS[1:] = U2[:-1]
        uS[0] = 2.0 * walls.u(uxs, 0.0) - U2[0]
    du_dx = (uE - uW) / (2.0 * h)
    du_dy = (uN - uS) / (2.0 * h)

    # v averaged onto the u points: horizontal faces m = 0..ny at y = m*h
    vface = np.empty((ny + 1, nx))
    if spec.bc.periodic_y:
        vface[:] = V2[np.arange(ny + 1) % ny]
    else:
        xc = (np.arange(nx) + 0.5) * h
        vface[0] = walls.v(xc, 0.0)
        vface[1:ny] = V2
        vface[ny] = walls.v(xc, spec.ly)
    cols = np.arange(spec.n_ux)
    if spec.bc.periodic_x:
        cl, cr = (cols - 1) % nx, cols  # u face i sits between cells i-1 and i
    else:
        cl, cr = cols, cols + 1  # u face i sits between cells i and i+1
    vbar = 0.25 * (vface[:-1][:, cl] + vface[:-1][:, cr] + vface[1:][:, cl] + vface[1:][:, cr])
    adv_u = U2 * du_dx + vbar * du_dy

    # --- v momentum: ubar dv/dx + v dv/dy at the v points -----------------
    if spec.bc.periodic_x:
        vE = np.roll(V2, -1, axis=1)
        vW = np.roll(V2, 1, axis=1)
    else:
        vE = np.empty_like(V2)
        vW = np.empty_like(V2)
        vE[:, :-1] = V2[:, 1:]
        vE[:, -1] = 2.0 * walls.v(spec.lx, vys) - V2[:, -1]  # ghost reflection
        vW[:, 1:] = V2[:, :-1]
        vW[:, 0] = 2.0 * walls.v(0.0, vys) - V2[:, 0]
    if spec.bc.periodic_y:
        vN = np.roll(V2, -1, axis=0)
        vS = np.roll(V2, 1, axis=0)
    else:
        vN = np.empty_like(V2)
        vS = np.empty_like(V2)
        vN[:-1] = V2[1:]
        vN[-1] = walls.v(vxs, spec.ly)
        vS[1:] = V2[:-1]
        vS[0] = walls.v(vxs, 0.0)
    dv_dx = (vE - vW) / (2.0 * h)
    dv_dy = (vN - vS) / (2.0 * h)

    # u averaged onto the v points: vertical faces m = 0..nx at x = m*h
    uface = np.empty((ny, nx + 1))
    if spec.bc.periodic_x:
        uface[:] = U2[:, np.arange(nx + 1) % nx]
    else:
        yc = (np.arange(ny) + 0.5) * h
        uface[:, 0] = walls.u(0.0, yc)
        uface[:, 1:nx] = U2
        uface[:, nx] = walls.u(spec.lx, yc)
    rows = np.arange(spec.n_vy)
    if spec.bc.periodic_y:
        rl, rh = (rows - 1) % ny, rows  # v face j sits between cells j-1 and j
    else:
        rl, rh = rows, rows + 1
    ubar = 0.25 * (uface[rl][:, :-1] + uface[rl][:, 1:] + uface[rh][:, :-1] + uface[rh][:, 1:])
    adv_v = ubar * dv_dx + V2 * dv_dy

    return np.concatenate([adv_u.ravel(), adv_v.ravel()])


# ---------------------------------------------------------------------------
# right-hand side construction
# ---------------------------------------------------------------------------

def boundary_lift(spec: GridSpec, params: ProblemParams, walls: WallData) -> np.ndarray:
    """Wall-value contributions of the viscous stencils, moved to the RHS.

    Normal components sit directly on the wall (coefficient mu/h^2);
    tangential components enter through the factor-2 ghost reflection
    (coefficient 2 mu/h^2).  Periodic directions contribute nothing.
    """
    h2 = spec.h ** 2
    mu = params.mu
    lift_u = np.zeros((spec.n_uy, spec.n_ux))
    lift_v = np.zeros((spec.n_vy, spec.n_vx))
    uxs, uys = _u_grid_coords(spec)
    vxs, vys = _v_grid_coords(spec)

    if not spec.bc.periodic_x:
        lift_u[:, 0] += mu * walls.u(0.0, uys) / h2
        lift_u[:, -1] += mu * walls.u(spec.lx, uys) / h2
        lift_v[:, 0] += 2.0 * mu * walls.v(0.0, vys) / h2
        lift_v[:, -1] += 2.0 * mu * walls.v(spec.lx, vys) / h2
    if not spec.bc.periodic_y:
        lift_u[0, :] += 2.0 * mu * walls.u(uxs, 0.0) / h2
        lift_u[-1, :] += 2.0 * mu * walls.u(uxs, spec.ly) / h2
        lift_v[0, :] += mu * walls.v(vxs, 0.0) / h2
        lift_v[-1, :] += mu * walls.v(vxs, spec.ly) / h2

    return np.concatenate([lift_u.ravel(), lift_v.ravel()])


def boundary_divergence_rhs(spec: GridSpec, walls: WallData) -> np.ndarray:
    """Known wall-normal velocities moved out of the divergence constraint:
    the pressure-row right-hand side g_p of -D u = g_p."""
    h = spec.h
    g2 = np.zeros((spec.ny, spec.nx))
    xc = (np.arange(spec.nx) + 0.5) * h
    yc = (np.arange(spec.ny) + 0.5) * h
    if not spec.bc.periodic_x:
        g2[:, 0] += -walls.u(0.0, yc) / h
        g2[:, -1] += walls.u(spec.lx, yc) / h
    if not spec.bc.periodic_y:
        g2[0, :] += -walls.v(xc, 0.0) / h
        g2[-1, :] += walls.v(xc, spec.ly) / h
    return g2.ravel()


def build_forcing(spec: GridSpec, params: ProblemParams, tv: TaylorVortexParams,
                  u_prev: BlockVector, step_index: int = 0) -> BlockVector:
    """Right-hand side of the backward-Euler step k -> k+1.

    Velocity part: -(u^k . grad) u^k + (rho/dt) u^k + viscous wall lift at
    t^{k+1}.  Pressure part: wall-flux terms of the divergence stencil at
    t^{k+1}, projected to mean zero for discrete solvability.
    """
    t_k = tv.t0 + step_index * tv.dt
    t_next = t_k + tv.dt
    walls_prev = taylor_walls(tv, t_k)
    walls_next = taylor_walls(tv, t_next)

    f_uv = -advection_term(spec, u_prev, walls_prev)
    if params.rho_over_dt != 0.0:
        f_uv = f_uv + params.rho_over_dt * u_prev.velocity
    f_uv = f_uv + boundary_lift(spec, params, walls_next)

    g_p = boundary_divergence_rhs(spec, walls_next)
    g_p = g_p - g_p.mean()  # compatibility with the constant-pressure null space

    lay = dof_counts(spec)
    if params.steady and spec.bc is BoundaryKind.PERIODIC_ALL:
        # constant velocities are in the null space too; project them out
        f_uv = f_uv.copy()
        f_uv[: lay.n_u] -= f_uv[: lay.n_u].mean()
        f_uv[lay.n_u:] -= f_uv[lay.n_u:].mean()
    return BlockVector(f_uv[: lay.n_u], f_uv[lay.n_u:], g_p)


# ---------------------------------------------------------------------------
# one-step solves, iteration table, convergence study
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    solution: BlockVector
    report: IterationReport


def solve_one_step(spec: GridSpec, params: ProblemParams, tv: TaylorVortexParams,
                   kind: PrecondKind, side: str | None = None,
                   rel_tol: float = 1e-10, max_iters: int = 500,
                   ops: StokesOperators | None = None,
                   ctx: PreconditionerContext | None = None,
                   u_prev: BlockVector | None = None,
                   step_index: int = 0) -> StepResult:
    side = side or DEFAULT_SIDES[kind]
    if ops is None:
        ops = ctx.ops if ctx is not None else build_stokes_operators(spec, params)
    if u_prev is None:
        u_prev = sample_taylor(spec, tv, tv.t0 + step_index * tv.dt)
    rhs = build_forcing(spec, params, tv, u_prev, step_index)
    precond = build_preconditioner(spec, params, kind, ops=ops, ctx=ctx)
    cfg = GmresConfig(rel_tol=rel_tol, max_iters=max_iters, side=side)
    apply_p = precond.apply_flat if kind is not PrecondKind.NONE else None
    x, rep = gmres(SaddleOperator(ops), rhs.to_flat(), apply_p, cfg)
    return StepResult(BlockVector.from_flat(x, ops.layout), rep)


@dataclass
class TableCell:
    bc: BoundaryKind
    rho: float
    kind: PrecondKind
    side: str
    iterations: int
    converged: bool
    final_relative_residual: float


def random_compatible_rhs(spec: GridSpec, params: ProblemParams, seed: int = 0) -> BlockVector:
    """Seeded random right-hand side orthogonal to the saddle null space.

    Unlike the benchmark forcing this excites every Fourier block, which is
    the regime where the preconditioners differ most; useful for comparing
    against full-spectrum reference counts.
    """
    lay = dof_counts(spec)
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(lay.total)
    b[lay.n_velocity:] -= b[lay.n_velocity:].mean()
    if params.steady and spec.bc is BoundaryKind.PERIODIC_ALL:
        b[: lay.n_u] -= b[: lay.n_u].mean()
        b[lay.n_u: lay.n_velocity] -= b[lay.n_u: lay.n_velocity].mean()
    return BlockVector.from_flat(b, lay)


def run_table_cell(spec: GridSpec, tv: TaylorVortexParams, kind: PrecondKind,
                   side: str | None = None, rel_tol: float = 1e-10,
                   max_iters: int = 500,
                   ctx: PreconditionerContext | None = None,
                   rhs: str = "taylor", seed: int = 0) -> TableCell:
    """One saddle solve of the first backward-Euler step; never raises on
    non-convergence, the cell is just flagged.  rhs='random' swaps the
    benchmark forcing for a seeded full-spectrum right-hand side."""
    side = side or DEFAULT_SIDES[kind]
    params = params_for_rho(tv.rho, tv)
    if rhs == "taylor":
        res = solve_one_step(spec, params, tv, kind, side, rel_tol, max_iters, ctx=ctx)
        rep = res.report
    elif rhs == "random":
        ops = ctx.ops if ctx is not None else build_stokes_operators(spec, params)
        b = random_compatible_rhs(spec, params, seed)
        precond = build_preconditioner(spec, params, kind, ops=ops, ctx=ctx)
        cfg = GmresConfig(rel_tol=rel_tol, max_iters=max_iters, side=side)
        _, rep = gmres(SaddleOperator(ops), b.to_flat(), precond.apply_flat, cfg)
    else:
        raise ValueError(f"rhs must be 'taylor' or 'random', got {rhs!r}")
    return TableCell(
        bc=spec.bc,
        rho=tv.rho,
        kind=kind,
        side=side,
        iterations=rep.iterations,
        converged=rep.converged,
        final_relative_residual=rep.final_relative_residual,
    )


def run_table(n: int = 64, tv: TaylorVortexParams | None = None,
              bcs=(BoundaryKind.DIRICHLET_ALL, BoundaryKind.PERIODIC_X_DIRICHLET_Y,
                   BoundaryKind.PERIODIC_ALL),
              rhos=TABLE_RHOS, kinds=TABLE_KINDS,
              rel_tol: float = 1e-10, max_iters: int = 500,
              rhs: str = "taylor", seed: int = 0) -> list[TableCell]:
    """Full iteration-count table; factorizations are shared within each
    (boundary kind, rho) pair since the table preconditioners need the same
    operator set."""
    tv = tv or TaylorVortexParams()
    cells = []
    for bc in bcs:
        spec = taylor_spec(n, bc, tv)
        for rho in rhos:
            tv_rho = TaylorVortexParams(L=tv.L, mu=tv.mu, rho=rho, dt=tv.dt, t0=tv.t0)
            params = params_for_rho(rho, tv_rho)
            ops = build_stokes_operators(spec, params)
            ctx = build_context(ops)
            for kind in kinds:
                cells.append(run_table_cell(spec, tv_rho, kind,
                                            rel_tol=rel_tol, max_iters=max_iters,
                                            ctx=ctx, rhs=rhs, seed=seed))
    return cells


def table_rows(cells: list[TableCell]) -> list[list]:
    return [[c.bc.value, c.rho, c.kind.value, c.side, c.iterations,
             c.converged, c.final_relative_residual] for c in cells]


def format_table_text(cells: list[TableCell]) -> str:
    """Aligned text table, boundary kinds as column groups, one row per rho."""
    bcs = []
    kinds = []
    rhos = []
    for c in cells:
        if c.bc not in bcs:
            bcs.append(c.bc)
        if c.kind not in kinds:
            kinds.append(c.kind)
        if c.rho not in rhos:
            rhos.append(c.rho)
    lookup = {(c.bc, c.rho, c.kind): c for c in cells}
    width = 8
    header1 = "rho".rjust(width)
    header2 = "".rjust(width)
    for bc in bcs:
        group = " ".join(k.value.rjust(width) for k in kinds)
        header1 += " | " + bc.value.center(len(group))
        header2 += " | " + group
    lines = [header1, header2, "-" * len(header2)]
    for rho in rhos:
        line = f"{rho:g}".rjust(width)
        for bc in bcs:
            vals = []
            for k in kinds:
                cell = lookup.get((bc, rho, k))
                if cell is None:
                    vals.append("-".rjust(width))
                else:
                    mark = "" if cell.converged else "*"
                    vals.append(f"{cell.iterations}{mark}".rjust(width))
            line += " | " + " ".join(vals)
        lines.append(line)
    lines.append("(* = stopping tolerance not reached within max_iters)")
    return "\n".join(lines) + "\n"


def one_step_errors(n: int, bc: BoundaryKind, tv: TaylorVortexParams,
                    kind: PrecondKind = PrecondKind.P1,
                    rel_tol: float = 1e-12) -> dict:
    """Solve one step from exact data and compare with the exact solution at
    t0 + dt.  Velocity error in max and mesh-weighted l2 norms."""
    spec = taylor_spec(n, bc, tv)
    params = params_for_rho(tv.rho, tv)
    res = solve_one_step(spec, params, tv, kind, rel_tol=rel_tol)
    exact = sample_taylor(spec, tv, tv.t0 + tv.dt)
    du = res.solution.u - exact.u
    dv = res.solution.v - exact.v
    err_max = max(np.abs(du).max(), np.abs(dv).max())
    err_l2 = spec.h * np.sqrt(np.sum(du ** 2) + np.sum(dv ** 2))
    return {"n": n, "h": spec.h, "dt": tv.dt, "err_max": float(err_max),
            "err_l2": float(err_l2), "iterations": res.report.iterations}


def convergence_study(ns=(16, 32, 64), bc: BoundaryKind = BoundaryKind.PERIODIC_ALL,
                      L: float = 64.0, mu: float = 1.0, rho: float = 1.0) -> list[dict]:
    """Refine h and dt together (dt = 0.5 h^2 / mu); errors should drop at
    second order or better in h."""
    out = []
    for n in ns:
        h = L / n
        tv = TaylorVortexParams(L=L, mu=mu, rho=rho, dt=0.5 * h * h / mu)
        out.append(one_step_errors(n, bc, tv))
    for i in range(1, len(out)):
        ratio = out[i - 1]["err_max"] / out[i]["err_max"]
        out[i]["observed_order"] = float(np.log2(ratio))
    return out
