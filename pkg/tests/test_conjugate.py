import numpy as np
import pytest

from lapkit.conjugate import (
    build_conjugate,
    check_admissible,
    dilation_map,
    f_derivatives,
    position_decay_bound,
    w_profile,
)
from lapkit.errors import AdmissibilityError, GridError
from lapkit.grid_ops import get_grid, hermitian_defect
from shared.models import ConjugateSpec, GridSpec


class TestAdmissibility:
    def test_position_decay_bound(self):
        assert position_decay_bound(3) == pytest.approx(1.0 / 16.0)

    @pytest.mark.parametrize("kind, n, mu", [
        ("position-decay", 3, 1.0 / 32.0),
        ("position-decay", 1, 1.0),
        ("position-decay", 1, 0.0),
        ("momentum-decay", 3, 1.5),
        ("momentum-decay", 1, 0.5),
        ("dilation", 3, 0.0),
    ])
    def test_accepted(self, kind, n, mu):
        check_admissible(ConjugateSpec(kind=kind, mu=mu), n)

    @pytest.mark.parametrize("kind, n, mu", [
        ("position-decay", 3, 1.0 / 8.0),
        ("position-decay", 3, 1.0 / 16.0),
        ("position-decay", 1, 1.5),
        ("momentum-decay", 3, 0.0),
        ("momentum-decay", 3, 2.0),
    ])
    def test_rejected(self, kind, n, mu):
        with pytest.raises(AdmissibilityError):
            check_admissible(ConjugateSpec(kind=kind, mu=mu), n)

    def test_override_only_warns(self, caplog):
        check_admissible(ConjugateSpec(kind="position-decay", mu=0.5, override=True), 3)
        assert "Admissibility override" in caplog.text

    def test_two_dimensions_warn(self, caplog):
        check_admissible(ConjugateSpec(kind="position-decay", mu=0.5), 2)
        assert "No position-decay theorem covers n=2" in caplog.text


class TestFProfile:
    @pytest.mark.parametrize("mu", [0.25, 0.5, 1.5])
    def test_derivatives_against_finite_differences(self, mu):
        x = np.linspace(-4.0, 4.0, 17)
        step = 1e-5
        lower, upper = f_derivatives(mu, x - step), f_derivatives(mu, x + step)
        exact = f_derivatives(mu, x)
        for name, source in [("F1", "F"), ("F2", "F1"), ("F3", "F2"), ("F4", "F3")]:
            numeric = (getattr(upper, source) - getattr(lower, source)) / (2 * step)
            np.testing.assert_allclose(getattr(exact, name), numeric, rtol=1e-6, atol=1e-8, err_msg=name)

    @pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
    def test_third_derivative_at_origin(self, mu):
        assert float(f_derivatives(mu, 0.0).F3) == pytest.approx(-3.0 * mu, abs=1e-14)

    def test_w_at_origin(self):
        assert float(w_profile(0.5, 0.0, 0.0)) == pytest.approx(0.75)

    def test_w_with_callable_slope(self):
        # V1 = <x>^-4, V1' = -4 x <x>^-6
        slope = lambda x: -4.0 * x * (1.0 + x**2) ** -3
        x = np.array([0.5, 1.0, 3.0])
        f = f_derivatives(0.5, x)
        np.testing.assert_allclose(w_profile(0.5, slope, x), -f.F * slope(x) - 0.5 * f.F3)


class TestConjugateMaps:
    def test_dilation_on_gaussian(self, grid_1d):
        # A_D e^{-x^2/2} = i (x^2 - 1/2) e^{-x^2/2}
        x = get_grid(grid_1d).axis
        f = np.exp(-np.square(x) / 2.0)
        result = dilation_map(grid_1d).apply(f)
        np.testing.assert_allclose(result, 1j * (np.square(x) - 0.5) * f, atol=1e-9)

    def test_dense_dilation_is_hermitian(self, tiny_grid):
        A = dilation_map(tiny_grid).dense()
        assert np.linalg.norm(A - A.conj().T) <= 1e-10 * np.linalg.norm(A)

    @pytest.mark.parametrize("spec", [
        ConjugateSpec(kind="dilation"),
        ConjugateSpec(kind="position-decay", mu=0.5),
        ConjugateSpec(kind="momentum-decay", mu=1.5),
    ])
    def test_conjugates_are_hermitian(self, small_grid, spec):
        A = build_conjugate(small_grid, spec)
        assert A.hermitian
        assert A.spec == spec
        assert hermitian_defect(A) < 1e-12

    def test_zero_mu_position_decay_is_dilation(self, small_grid):
        state = np.zeros(small_grid.size, dtype=complex)
        state[40:80] = np.hanning(40)
        A_F = build_conjugate(small_grid, ConjugateSpec(kind="position-decay", mu=0.0))
        np.testing.assert_allclose(A_F.apply(state), dilation_map(small_grid).apply(state), atol=1e-12)

    def test_position_decay_tends_to_dilation(self, small_grid):
        state = np.zeros(small_grid.size, dtype=complex)
        state[40:80] = np.hanning(40)
        A_D = dilation_map(small_grid).apply(state)
        ratios = []
        for mu in [1e-1, 1e-2, 1e-3]:
            A_F = build_conjugate(small_grid, ConjugateSpec(kind="position-decay", mu=mu)).apply(state)
            ratios.append(np.linalg.norm(A_F - A_D) / np.linalg.norm(state))
        assert ratios[0] > ratios[1] > ratios[2] > 0

    @pytest.mark.parametrize("kind, mu", [("dilation", 0.0), ("position-decay", 0.5), ("momentum-decay", 1.0)])
    def test_partial_conjugate_acts_on_its_factor(self, grid_2d, kind, mu):
        # (A_1 ⊗ 1)(f ⊗ g) = (A_1 f) ⊗ g
        x = get_grid(grid_2d).axis
        f = np.exp(-np.square(x - 1.0))
        g = np.exp(-np.square(x) / 2.0) * (1.0 + 0.5j * x)
        A = build_conjugate(grid_2d, ConjugateSpec(kind=kind, mu=mu, active_coords=[1]))
        A1 = build_conjugate(GridSpec(n=1, N=grid_2d.N, L=grid_2d.L), ConjugateSpec(kind=kind, mu=mu))
        expected = np.outer(A1.apply(f), g).ravel()
        np.testing.assert_allclose(A.apply(np.outer(f, g).ravel()), expected,
                                   atol=1e-12 * np.linalg.norm(expected))

    def test_partial_conjugate_on_radial_grid(self, radial_grid):
        with pytest.raises(GridError):
            build_conjugate(radial_grid, ConjugateSpec(kind="dilation", active_coords=[1]))

    def test_partial_tags(self, grid_2d):
        A = build_conjugate(grid_2d, ConjugateSpec(kind="dilation", active_coords=[1]))
        assert "K=[1]" in A.tag

    def test_inadmissible_build(self, small_grid):
        with pytest.raises(AdmissibilityError):
            build_conjugate(small_grid, ConjugateSpec(kind="momentum-decay", mu=2.5))

    def test_override_tag(self, small_grid):
        A = build_conjugate(small_grid, ConjugateSpec(kind="momentum-decay", mu=2.5, override=True))
        assert "[override]" in A.tag
