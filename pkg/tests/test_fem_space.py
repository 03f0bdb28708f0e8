import numpy as np
import pytest
import scipy.linalg

from oschom.coefficients import MaterialField, random_coercive_field, verify_positivity
from oschom.experiments import builtin_material
from oschom.fem_space import (
    PeriodicCgSpace,
    SpacePartition,
    assemble_derivative,
    assemble_load,
    assemble_load_pair,
    assemble_mass,
    assemble_operator_blocks,
    assemble_scalar_mass,
    assemble_weighted_mass,
    save_matrix_coo,
)
from oschom.metrics import spatial_quadrature


def uniform_space(cells, degree):
    return PeriodicCgSpace(SpacePartition.uniform(cells), degree)


def test_partition_validation():
    with pytest.raises(ValueError):
        SpacePartition(np.array([0.0, 1.0]))  # single cell cannot be periodic
    with pytest.raises(ValueError):
        SpacePartition(np.array([0.1, 0.5, 1.0]))
    with pytest.raises(ValueError):
        SpacePartition(np.array([0.0, 0.6, 0.4, 1.0]))
    with pytest.raises(ValueError):
        PeriodicCgSpace(SpacePartition.uniform(4), 0)


def test_dof_count_and_node_coordinates():
    space = uniform_space(4, 3)
    assert space.dof_count == 12
    x = space.node_coordinates()
    assert x.shape == (12,)
    assert np.all((x >= 0.0) & (x < 1.0))
    assert np.all(np.diff(np.sort(x)) > 0)


def test_evaluation_partition_of_unity():
    space = uniform_space(5, 3)
    xs = np.linspace(0.0, 1.0, 23)
    mat = space.evaluation_matrix(xs)
    assert np.allclose(np.asarray(mat.sum(axis=1)).ravel(), 1.0, atol=1e-13)


def test_evaluation_wraps_at_right_endpoint():
    space = uniform_space(4, 2)
    coeffs = np.random.default_rng(0).normal(size=space.dof_count)
    at0 = (space.evaluation_matrix(np.array([0.0])) @ coeffs)[0]
    at1 = (space.evaluation_matrix(np.array([1.0])) @ coeffs)[0]
    assert at1 == pytest.approx(at0, rel=1e-13)


def test_interpolation_and_derivative_of_space_function():
    # x^2 - x is continuous and periodic, and lies in every p >= 2 space
    space = uniform_space(6, 2)
    coords = space.node_coordinates()
    coeffs = coords ** 2 - coords
    xs = np.linspace(0.0, 0.999, 31)
    vals = space.evaluation_matrix(xs) @ coeffs
    ders = space.evaluation_matrix(xs, derivative=True) @ coeffs
    assert np.allclose(vals, xs ** 2 - xs, atol=1e-13)
    assert np.allclose(ders, 2 * xs - 1, atol=1e-11)


def test_mass_matrix_linear_elements_exact():
    # classical periodic P1 mass on three cells: 2h/3 diagonal, h/6 neighbours
    mass = assemble_mass(uniform_space(3, 1)).toarray()
    h = 1.0 / 3.0
    expected = np.array([[2 * h / 3, h / 6, h / 6],
                         [h / 6, 2 * h / 3, h / 6],
                         [h / 6, h / 6, 2 * h / 3]])
    assert np.allclose(mass, expected, atol=1e-15)


def test_mass_total_is_measure_of_circle():
    for cells, p in ((3, 1), (5, 2), (4, 4)):
        mass = assemble_mass(uniform_space(cells, p))
        ones = np.ones(mass.shape[0])
        assert ones @ (mass @ ones) == pytest.approx(1.0, rel=1e-13)


def test_mass_inner_product_fixture():
    # int_0^1 (x^2 - x)^2 dx = 1/30
    space = uniform_space(4, 2)
    coords = space.node_coordinates()
    u = coords ** 2 - coords
    mass = assemble_mass(space)
    assert np.real(u @ (mass @ u)) == pytest.approx(1.0 / 30.0, rel=1e-13)


def test_derivative_linear_elements_exact():
    # hand-integrated periodic P1 blocks on three equal cells
    d = assemble_derivative(uniform_space(3, 1)).toarray()
    expected = np.array([[0.0, 0.5, -0.5], [-0.5, 0.0, 0.5], [0.5, -0.5, 0.0]])
    assert np.allclose(d, expected, atol=1e-14)


def test_derivative_two_cell_degeneracy():
    # K = 2, p = 1: each basis function sees its lone neighbour on both sides,
    # so the periodic first-order form cancels identically
    d = assemble_derivative(uniform_space(2, 1)).toarray()
    assert np.allclose(d, 0.0, atol=1e-14)


def test_derivative_skew_symmetry_random_mesh():
    part = SpacePartition(np.array([0.0, 0.13, 0.4, 0.55, 0.83, 1.0]))
    d = assemble_derivative(PeriodicCgSpace(part, 3)).toarray()
    assert np.abs(d + d.T).max() < 1e-13


def test_derivative_pairing_fixture():
    # int_0^1 (x^2-x)' (x^3-x) dx = -1/60 for space functions with p = 3
    space = uniform_space(5, 3)
    coords = space.node_coordinates()
    u = coords ** 2 - coords
    v = coords ** 3 - coords
    d = assemble_derivative(space)
    assert np.real(v @ (d @ u)) == pytest.approx(-1.0 / 60.0, rel=1e-12)


def dense_weighted_mass_oracle(space, cut_points, weight_fn, order):
    """Assemble int w phi_i phi_j via one global quadrature pass."""
    grid = np.union1d(space.partition.nodes, cut_points)
    quad = spatial_quadrature(grid, order)
    ev = space.evaluation_matrix(quad.points).toarray()
    w = np.array([weight_fn(x) for x in quad.points])
    return ev.T @ (ev * (w * quad.weights)[:, None])


def test_weighted_mass_with_misaligned_cuts():
    # oscillation 3 puts jumps at k/6, the 4-cell mesh cannot resolve them
    field = builtin_material()
    space = uniform_space(4, 2)
    got = assemble_weighted_mass(space, field, 3, 0, (0, 0)).toarray()

    def weight(x):
        y = np.mod(3.0 * x, 1.0)
        return 1.0 if y < 0.5 else 0.0

    cuts = np.arange(7) / 6.0
    oracle = dense_weighted_mass_oracle(space, cuts, weight, 4)
    assert np.abs(got - oracle).max() < 1e-13


def test_weighted_mass_aligned_fast_path():
    # mesh nodes contain every jump, so no panel splitting happens
    field = builtin_material()
    space = uniform_space(6, 2)
    got = assemble_weighted_mass(space, field, 3, 1, (0, 0)).toarray()

    def weight(x):
        y = np.mod(3.0 * x, 1.0)
        return 0.0 if y < 0.5 else 1.0

    cuts = np.arange(7) / 6.0
    oracle = dense_weighted_mass_oracle(space, cuts, weight, 4)
    assert np.abs(got - oracle).max() < 1e-13


def test_weighted_mass_homogenised_path():
    field = builtin_material()
    space = uniform_space(5, 2)
    got = assemble_weighted_mass(space, field, None, 0, (0, 0)).toarray()
    assert np.abs(got - 0.5 * assemble_mass(space).toarray()).max() < 1e-14


def test_scalar_mass_complex_weight():
    space = uniform_space(3, 1)
    got = assemble_scalar_mass(space, (), lambda x: 2.0 + 1.0j).toarray()
    assert np.abs(got - (2.0 + 1.0j) * assemble_mass(space).toarray()).max() < 1e-14


def test_load_vector_polynomial_oracle():
    space = uniform_space(5, 2)
    g = lambda xs: xs ** 3
    got = assemble_load(space, g)
    quad = spatial_quadrature(space.partition.nodes, 6)
    ev = space.evaluation_matrix(quad.points).toarray()
    oracle = ev.T @ (quad.weights * quad.points ** 3)
    assert np.abs(got - oracle).max() < 1e-15


def test_load_pair_matches_componentwise_loads():
    space = uniform_space(4, 2)
    f1 = lambda xs: np.sin(2 * np.pi * xs)
    f2 = lambda xs: xs * (1 - xs)
    pair = assemble_load_pair(space, lambda xs: np.vstack((f1(xs), f2(xs))))
    n = space.dof_count
    assert np.abs(pair[:n] - assemble_load(space, f1)).max() < 1e-15
    assert np.abs(pair[n:] - assemble_load(space, f2)).max() < 1e-15


def test_load_pair_shape_validation():
    space = uniform_space(4, 1)
    with pytest.raises(ValueError):
        assemble_load_pair(space, lambda xs: np.sin(xs))


def test_operator_blocks_structure():
    field = builtin_material()
    space = uniform_space(8, 2)
    ops = assemble_operator_blocks(space, field, 2)
    n = space.dof_count
    assert ops.state_size == 2 * n
    d = assemble_derivative(space).toarray()
    a = ops.a.toarray()
    assert np.allclose(a[:n, :n], 0.0)
    assert np.allclose(a[n:, n:], 0.0)
    assert np.allclose(a[:n, n:], d)
    assert np.allclose(a[n:, :n], d)
    bm = ops.block_mass().toarray()
    mass = assemble_mass(space).toarray()
    assert np.allclose(bm[:n, :n], mass)
    assert np.allclose(bm[n:, n:], mass)


def test_builtin_shifted_blocks_reduce_to_identity_weight():
    # rho*M0 + M1 is the identity matrix on both pieces, so the assembled
    # combination collapses to the plain block mass for any mesh alignment
    field = builtin_material()
    space = uniform_space(5, 2)  # misaligned with the 1/8 jump grid
    ops = assemble_operator_blocks(space, field, 4)
    combo = (ops.m0 + ops.m1).toarray()
    herm = 0.5 * (combo + combo.conj().T)
    assert np.abs(herm - ops.block_mass().toarray()).max() < 1e-13


def test_discrete_coercivity_transfers_from_pieces():
    # x* (rho M0 + Herm M1) x >= c x* mass x for the assembled blocks
    rng = np.random.default_rng(42)
    field_m = random_coercive_field(rng, 3, c=0.7)
    m0 = np.array([np.eye(2)] * 3, dtype=complex)
    field = MaterialField(field_m.breakpoints, m0, field_m.pieces)
    rho = 0.5
    c = verify_positivity(field, rho)
    space = uniform_space(7, 2)
    ops = assemble_operator_blocks(space, field, 2)
    s = (rho * ops.m0 + 0.5 * (ops.m1 + ops.m1.conj().T)).toarray()
    s = 0.5 * (s + s.conj().T)
    bm = ops.block_mass().toarray()
    eigs = scipy.linalg.eigh(s, bm, eigvals_only=True)
    assert eigs.min() >= c - 1e-10


@pytest.mark.parametrize("coarse,fine", [
    ((3, 2), (6, 2)),   # h-refinement
    ((3, 2), (3, 3)),   # p-refinement
    ((4, 1), (8, 3)),   # both at once
])
def test_nested_spaces_share_mass(coarse, fine):
    # the coarse space embeds exactly, so P^T M_f P must reproduce M_c
    cs = uniform_space(*coarse)
    fs = uniform_space(*fine)
    p = cs.evaluation_matrix(fs.node_coordinates()).toarray()
    mf = assemble_mass(fs).toarray()
    mc = assemble_mass(cs).toarray()
    assert np.abs(p.T @ mf @ p - mc).max() < 1e-13


def test_save_matrix_coo(tmp_path):
    mass = assemble_mass(uniform_space(3, 1))
    path = tmp_path / "mass.txt"
    save_matrix_coo(mass, path)
    rows = np.loadtxt(path)
    assert rows.shape[1] == 4
    # rebuild and compare
    rebuilt = np.zeros((3, 3), dtype=complex)
    for r, c, re, im in rows:
        rebuilt[int(r), int(c)] = re + 1j * im
    assert np.abs(rebuilt - mass.toarray()).max() < 1e-15
