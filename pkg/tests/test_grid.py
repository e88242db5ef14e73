import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from macstokes import BlockVector, BoundaryKind, Field, GridSpec, dof_counts, linear_index, square_spec
from macstokes.grid import GridError, owned_indices, p_coords, u_coords, v_coords


@pytest.mark.parametrize("nx,ny,bc,total", [
    (16, 16, BoundaryKind.DIRICHLET_ALL, 736),
    (32, 32, BoundaryKind.DIRICHLET_ALL, 3008),
    (16, 32, BoundaryKind.PERIODIC_X_DIRICHLET_Y, 1520),
    (32, 64, BoundaryKind.PERIODIC_X_DIRICHLET_Y, 6112),
    (2, 2, BoundaryKind.PERIODIC_ALL, 12),
])
def test_dof_totals(nx, ny, bc, total):
    assert dof_counts(GridSpec(nx, ny, 1.0, 1.0, bc)).total == total


def test_dof_counts_formulas():
    spec = GridSpec(5, 7, 1.0, 1.0, BoundaryKind.DIRICHLET_ALL)
    lay = dof_counts(spec)
    assert (lay.n_u, lay.n_v, lay.n_p) == (4 * 7, 5 * 6, 35)
    spec = GridSpec(5, 7, 1.0, 1.0, BoundaryKind.PERIODIC_X_DIRICHLET_Y)
    lay = dof_counts(spec)
    assert (lay.n_u, lay.n_v, lay.n_p) == (35, 30, 35)
    spec = GridSpec(5, 7, 1.0, 1.0, BoundaryKind.PERIODIC_ALL)
    lay = dof_counts(spec)
    assert (lay.n_u, lay.n_v, lay.n_p) == (35, 35, 35)


def test_pressure_index_corners():
    spec = square_spec(6, BoundaryKind.DIRICHLET_ALL)
    lay = dof_counts(spec)
    assert linear_index(spec, Field.P, 1, 1) == 0
    assert linear_index(spec, Field.P, spec.nx, spec.ny) == lay.n_p - 1


def test_periodic_wraparound():
    spec = square_spec(5, BoundaryKind.PERIODIC_ALL)
    for i, j in [(1, 2), (4, 5)]:
        assert linear_index(spec, Field.U, i + spec.nx, j) == linear_index(spec, Field.U, i, j)
        assert linear_index(spec, Field.V, i, j + spec.ny) == linear_index(spec, Field.V, i, j)
        assert linear_index(spec, Field.P, i - spec.nx, j) == linear_index(spec, Field.P, i, j)


def test_out_of_range_indices_raise():
    spec = square_spec(4, BoundaryKind.DIRICHLET_ALL)
    with pytest.raises(GridError):
        linear_index(spec, Field.U, 4, 1)  # only nx-1 interior u faces
    with pytest.raises(GridError):
        linear_index(spec, Field.P, 0, 1)
    with pytest.raises(GridError):
        linear_index(spec, Field.V, 1, 4)


@settings(max_examples=60, deadline=None)
@given(
    nx=st.integers(2, 8),
    ny=st.integers(2, 8),
    bc=st.sampled_from(list(BoundaryKind)),
    fld=st.sampled_from(list(Field)),
)
def test_linear_index_is_a_bijection(nx, ny, bc, fld):
    spec = GridSpec(nx, ny, 1.0, 1.0, bc)
    lay = dof_counts(spec)
    sizes = {Field.U: lay.n_u, Field.V: lay.n_v, Field.P: lay.n_p}
    seen = {linear_index(spec, fld, i, j) for i, j in owned_indices(spec, fld)}
    assert seen == set(range(sizes[fld]))


def test_grid_validation():
    with pytest.raises(GridError):
        GridSpec(1, 4, 1.0, 1.0, BoundaryKind.DIRICHLET_ALL)
    with pytest.raises(GridError):
        GridSpec(4, 4, 1.0, 2.0, BoundaryKind.DIRICHLET_ALL)
    with pytest.raises(GridError):
        GridSpec(4, 4, -1.0, -1.0, BoundaryKind.DIRICHLET_ALL)


def test_boundary_kind_names():
    assert BoundaryKind.from_name("dirichlet") is BoundaryKind.DIRICHLET_ALL
    assert BoundaryKind.from_name("x-periodic") is BoundaryKind.PERIODIC_X_DIRICHLET_Y
    assert BoundaryKind.from_name("PERIODIC") is BoundaryKind.PERIODIC_ALL
    with pytest.raises(ValueError):
        BoundaryKind.from_name("neumann")


def test_block_vector_round_trip():
    spec = square_spec(3, BoundaryKind.PERIODIC_ALL)
    lay = dof_counts(spec)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(lay.total)
    bv = BlockVector.from_flat(x, lay)
    assert np.array_equal(bv.to_flat(), x)
    assert bv.velocity.size == lay.n_velocity
    with pytest.raises(ValueError):
        BlockVector.from_flat(x[:-1], lay)


def test_staggered_coordinates():
    spec = GridSpec(4, 4, 0.25, 0.25, BoundaryKind.DIRICHLET_ALL)
    ux, uy = u_coords(spec)
    assert ux.min() == pytest.approx(0.25) and ux.max() == pytest.approx(0.75)
    assert uy.min() == pytest.approx(0.125)
    px, py = p_coords(spec)
    assert px[0] == pytest.approx(0.125) and py[-1] == pytest.approx(0.875)
    spec_p = GridSpec(4, 4, 0.25, 0.25, BoundaryKind.PERIODIC_ALL)
    ux, _ = u_coords(spec_p)
    assert ux.min() == 0.0  # wrapped face sits on the left edge
    vx, vy = v_coords(spec_p)
    assert vy.min() == 0.0
