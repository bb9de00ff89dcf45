import numpy as np
import pytest
from scipy.sparse.linalg import aslinearoperator

from lapkit.commutators import (
    CommutatorPair,
    analytic_commutator,
    applicable_identities,
    check_identity,
    cross_validate,
    discrete_commutator,
    identity_pair,
    regularity_probe,
    regularity_refinement,
)
from lapkit.conjugate import dilation_map
from lapkit.errors import ConfigError, GridError, NoClosedFormError
from lapkit.grid_ops import LinearMap, build_operator, interior_states
from shared.models import ConjugateSpec, GridSpec, PotentialSpec, PowerProfile

BRACKET_V = PotentialSpec(real=PowerProfile(amplitude=1.0, exponent=4.0))
DISSIPATIVE_V = PotentialSpec(real=PowerProfile(amplitude=1.0, exponent=4.0),
                              imaginary=PowerProfile(amplitude=0.5, exponent=2.0))


def random_map(grid: GridSpec, seed: int) -> LinearMap:
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((grid.size, grid.size)) + 1j * rng.standard_normal((grid.size, grid.size))
    return LinearMap(grid, aslinearoperator(matrix), tag=f"M{seed}")


class TestDiscreteCommutator:
    def test_matches_dense_formula(self):
        grid = GridSpec(n=1, N=32)
        T, A = random_map(grid, 1), random_map(grid, 2)
        t, a = T.dense(), A.dense()
        expected = 1j * (t @ a - a @ t)
        np.testing.assert_allclose(discrete_commutator(T, A).dense(), expected, atol=1e-12 * np.linalg.norm(expected))

    def test_second_order_iterates(self):
        grid = GridSpec(n=1, N=32)
        T, A = random_map(grid, 3), random_map(grid, 4)
        t, a = T.dense(), A.dense()
        first = 1j * (t @ a - a @ t)
        expected = 1j * (first @ a - a @ first)
        np.testing.assert_allclose(discrete_commutator(T, A, order=2).dense(), expected,
                                   atol=1e-12 * np.linalg.norm(expected))

    def test_order_out_of_range(self, small_grid):
        lap = build_operator(small_grid, "laplacian")
        with pytest.raises(ConfigError):
            discrete_commutator(lap, dilation_map(small_grid), order=3)

    def test_hermitian_inputs_give_hermitian_commutator(self, small_grid):
        assert discrete_commutator(build_operator(small_grid, "laplacian"), dilation_map(small_grid)).hermitian


class TestIdentities:
    @pytest.mark.parametrize("tag, conjugate, potential", [
        ("lap-dilation-1", ConjugateSpec(kind="dilation"), None),
        ("lap-dilation-2", ConjugateSpec(kind="dilation"), None),
        ("pot-dilation-1", ConjugateSpec(kind="dilation"), BRACKET_V),
        ("pot-dilation-2", ConjugateSpec(kind="dilation"), BRACKET_V),
        ("lap-position-1", ConjugateSpec(kind="position-decay", mu=0.0), None),
        ("lap-position-1", ConjugateSpec(kind="position-decay", mu=0.25), None),
        ("lap-position-1", ConjugateSpec(kind="position-decay", mu=1.0), None),
        ("lap-momentum-1", ConjugateSpec(kind="momentum-decay", mu=1.0), None),
        ("lap-momentum-1", ConjugateSpec(kind="momentum-decay", mu=1.5), None),
        ("h-position-1d", ConjugateSpec(kind="position-decay", mu=0.5), BRACKET_V),
        ("h-position-1d", ConjugateSpec(kind="position-decay", mu=0.5), DISSIPATIVE_V),
    ])
    def test_identity_holds_on_interior_states(self, grid_1d, tag, conjugate, potential):
        check = check_identity(tag, grid_1d, conjugate, potential, states=8, seed=1234)
        assert check.deviation <= 1e-4, f"{tag}: deviation {check.deviation:.3e}"
        assert check.verdict == "pass"
        assert check.states == 8

    def test_unknown_tag(self, small_grid, dilation):
        with pytest.raises(ConfigError):
            identity_pair("lap-rotation-1", small_grid, dilation)

    def test_conjugate_kind_mismatch(self, small_grid, dilation):
        with pytest.raises(ConfigError):
            identity_pair("lap-momentum-1", small_grid, dilation)

    def test_applicable_identities_for_dilation(self, small_grid, dilation):
        assert applicable_identities(small_grid, dilation) == [
            "lap-dilation-1", "lap-dilation-2", "pot-dilation-1", "pot-dilation-2",
        ]

    def test_hamiltonian_identity_is_one_dimensional(self, grid_2d):
        with pytest.raises(NoClosedFormError):
            identity_pair("h-position-1d", grid_2d, ConjugateSpec(kind="position-decay", mu=0.5), BRACKET_V)

    def test_cross_validate_needs_states(self, small_grid, dilation):
        pair = identity_pair("lap-dilation-1", small_grid, dilation)
        with pytest.raises(GridError):
            cross_validate(pair, [])

    def test_cross_validate_flags_wrong_closed_form(self, small_grid, dilation):
        lap = build_operator(small_grid, "laplacian")
        pair = CommutatorPair(discrete_commutator(lap, dilation_map(small_grid)), 3.0 * lap, "wrong")
        assert cross_validate(pair, interior_states(small_grid, 4, seed=1)) > 0.1


class TestAnalyticCommutator:
    def test_momentum_decay_potential_has_no_closed_form(self, small_grid):
        with pytest.raises(NoClosedFormError):
            analytic_commutator(small_grid, ConjugateSpec(kind="momentum-decay", mu=1.5), 1,
                                laplacian=False, potential=BRACKET_V)

    def test_second_order_position_decay_in_two_dimensions(self, grid_2d):
        with pytest.raises(NoClosedFormError):
            analytic_commutator(grid_2d, ConjugateSpec(kind="position-decay", mu=0.5), 2)

    def test_nothing_to_commute(self, small_grid, dilation):
        with pytest.raises(ConfigError):
            analytic_commutator(small_grid, dilation, 1, laplacian=False)

    def test_order_out_of_range(self, small_grid, dilation):
        with pytest.raises(ConfigError):
            analytic_commutator(small_grid, dilation, 0)

    def test_dilation_laplacian_tag(self, small_grid, dilation):
        assert analytic_commutator(small_grid, dilation, 1).tag == "2Δ"
        assert analytic_commutator(small_grid, dilation, 2).tag == "4Δ"


class TestRegularity:
    def test_probe_rejects_high_order(self, small_grid):
        with pytest.raises(ConfigError):
            regularity_probe(build_operator(small_grid, "laplacian"), dilation_map(small_grid), kmax=4)

    def test_probe_returns_one_norm_per_order(self, small_grid):
        norms = regularity_probe(build_operator(small_grid, "laplacian"), dilation_map(small_grid), kmax=2, seed=1)
        assert len(norms) == 2
        assert all(v > 0 for v in norms)

    def test_unbounded_commutator_grows_under_refinement(self, tiny_grid):
        def build(grid):
            return build_operator(grid, "laplacian"), dilation_map(grid)

        trend = regularity_refinement(build, tiny_grid, kmax=1, seed=1)
        assert trend.grows
        assert trend.label == "heuristic"
        assert len(trend.coarse) == len(trend.fine) == 1
