import numpy as np
import pytest

import lapkit.mourre as mourre_module
from lapkit.conjugate import build_conjugate, dilation_map
from lapkit.errors import AdmissibilityError
from lapkit.grid_ops import build_operator, identity_map
from lapkit.mourre import (
    build_s,
    empirical_w_star,
    estimate_relative_bound,
    estimate_second_order_C,
    gram_matrix,
    mourre_gap,
    resolve_s_kind,
    subspace_states,
    verify_weak_mourre,
)
from lapkit.potentials import assemble_hamiltonian
from shared.models import ConjugateSpec, GridSpec, MourreCertificate, OscillatingProfile, PotentialSpec


@pytest.fixture
def free_setup(small_grid, dilation):
    H = assemble_hamiltonian(small_grid, PotentialSpec())
    A = dilation_map(small_grid)
    S = build_s(small_grid, "laplacian", dilation)
    basis = subspace_states(small_grid, 16, seed=3)
    return H, A, S, basis


class TestGram:
    def test_identity_on_orthonormal_basis(self, small_grid):
        basis = subspace_states(small_grid, 12, seed=1)
        gram = gram_matrix(identity_map(small_grid), basis)
        np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-12)

    def test_gram_is_hermitian(self, small_grid):
        basis = subspace_states(small_grid, 8, seed=2)
        gram = gram_matrix(build_operator(small_grid, "laplacian"), basis)
        np.testing.assert_allclose(gram, gram.conj().T)


class TestCertificate:
    def test_free_dilation_certificate(self, free_setup):
        H, A, S, basis = free_setup
        certificate = verify_weak_mourre(H, A, S, 0.0, basis, probes=8, seed=5)
        assert certificate.gap >= -certificate.tol_gap
        assert certificate.injectivity_margin > 0
        assert certificate.subspace_dim == len(basis)
        assert certificate.s_descriptor == "2Δ"
        assert certificate.verdict == "pass"
        assert certificate.reasons == []

    def test_second_order_constant_of_free_dilation(self, free_setup):
        # [[Δ, iA_D], iA_D] = 4Δ against S = 2Δ
        H, A, S, _ = free_setup
        estimate = estimate_second_order_C(H, A, S, probes=6, seed=5)
        assert estimate.value == pytest.approx(2.0, abs=1e-8)
        assert estimate.used == 6 and estimate.skipped == 0

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_second_order_constant_scales_inversely_with_s(self, free_setup, t):
        H, A, S, _ = free_setup
        base = estimate_second_order_C(H, A, S, probes=6, seed=5).value
        scaled = estimate_second_order_C(H, A, t * S, probes=6, seed=5).value
        assert scaled == pytest.approx(base / t, rel=1e-10)

    def test_free_momentum_decay_certificate(self, small_grid):
        # [Δ, iA_u] = 2Δλ(p) for the free Laplacian
        conjugate = ConjugateSpec(kind="momentum-decay", mu=1.0)
        H = assemble_hamiltonian(small_grid, PotentialSpec())
        A = build_conjugate(small_grid, conjugate)
        S = build_s(small_grid, "auto", conjugate)
        certificate = verify_weak_mourre(H, A, S, 0.0, subspace_states(small_grid, 16, seed=3), probes=8, seed=5)
        assert certificate.s_descriptor == "2Δλ(p)"
        assert certificate.gap >= -certificate.tol_gap
        assert certificate.injectivity_margin > 0
        assert certificate.verdict == "pass"

    def test_verdict_survives_json(self, free_setup):
        H, A, S, basis = free_setup
        certificate = verify_weak_mourre(H, A, S, 0.0, basis[:6], probes=4, seed=5)
        restored = MourreCertificate.model_validate_json(certificate.model_dump_json())
        assert restored == certificate
        assert restored.verdict == certificate.verdict == "inconclusive"
        assert restored.reasons == certificate.reasons == ["subspace dimension 6 < 8"]

    def test_relative_bound_of_free_dilation(self, free_setup):
        # |(f, [Δ, A_D] g)| = 2|(f, Δg)| <= 2 ||(Δ + i) g||
        H, A, _, _ = free_setup
        estimate = estimate_relative_bound(H, A, probes=8, seed=5)
        assert 0.0 < estimate.value <= 2.0 * (1.0 + 1e-6)
        assert estimate.used == 8

    def test_imaginary_commutator_only_with_c1(self, small_grid, dilation, mocker):
        spy = mocker.spy(mourre_module, "discrete_commutator")
        H = assemble_hamiltonian(small_grid, PotentialSpec())
        A = dilation_map(small_grid)
        basis = subspace_states(small_grid, 8, seed=3)

        verify_weak_mourre(H, A, build_s(small_grid, "laplacian", dilation), 0.0, basis, probes=2, seed=1)
        assert not any(call.args[0] is H.im for call in spy.call_args_list)

        spy.reset_mock()
        verify_weak_mourre(H, A, build_s(small_grid, "laplacian", dilation, c1=0.5), 0.5, basis, probes=2, seed=1)
        assert any(call.args[0] is H.im for call in spy.call_args_list)

    def test_non_hermitian_s(self, free_setup, small_grid):
        H, A, _, basis = free_setup
        S = build_operator(small_grid, "position", 1j * np.ones(small_grid.size))
        with pytest.raises(AdmissibilityError):
            verify_weak_mourre(H, A, S, 0.0, basis)

    def test_c1_needs_dilation(self, small_grid, free_setup):
        H, _, S, basis = free_setup
        A = build_conjugate(small_grid, ConjugateSpec(kind="position-decay", mu=0.5))
        with pytest.raises(AdmissibilityError):
            verify_weak_mourre(H, A, S, 0.5, basis)

    def test_c1_range(self, free_setup):
        H, A, S, basis = free_setup
        with pytest.raises(AdmissibilityError):
            verify_weak_mourre(H, A, S, 2.5, basis)


class TestSChoices:
    @pytest.mark.parametrize("conjugate, grid, expected", [
        (ConjugateSpec(kind="dilation"), GridSpec(n=1, N=64), "laplacian"),
        (ConjugateSpec(kind="momentum-decay", mu=1.0), GridSpec(n=1, N=64), "laplacian-lambda"),
        (ConjugateSpec(kind="position-decay", mu=0.5), GridSpec(n=1, N=64), "f-kinetic"),
        (ConjugateSpec(kind="position-decay", mu=0.01), GridSpec(n=3, N=64, geometry="radial"), "weighted-laplacian"),
        (ConjugateSpec(kind="position-decay", mu=0.5), GridSpec(n=2, N=16), "laplacian"),
    ])
    def test_auto_resolution(self, conjugate, grid, expected):
        assert resolve_s_kind("auto", grid, conjugate) == expected

    def test_laplacian_tag(self, small_grid):
        assert build_s(small_grid, "laplacian", ConjugateSpec()).tag == "2Δ"
        assert build_s(small_grid, "laplacian", ConjugateSpec(), scale=0.5).tag == "0.5Δ"

    def test_weighted_laplacian_needs_three_dimensions(self, small_grid):
        with pytest.raises(AdmissibilityError):
            build_s(small_grid, "weighted-laplacian", ConjugateSpec(kind="position-decay", mu=0.5))

    def test_unknown_kind(self, small_grid):
        with pytest.raises(AdmissibilityError):
            build_s(small_grid, "hardy", ConjugateSpec())

    def test_position_decay_gap_on_radial_grid(self, radial_grid):
        conjugate = ConjugateSpec(kind="position-decay", mu=1.0 / 32.0)
        H = assemble_hamiltonian(radial_grid, PotentialSpec())
        A = build_conjugate(radial_grid, conjugate)
        S = build_s(radial_grid, "weighted-laplacian", conjugate)
        gap, _ = mourre_gap(H, A, S, subspace_states(radial_grid, 16, seed=4))
        assert gap >= -1e-6


class TestWStar:
    def test_needs_momentum_decay(self, small_grid):
        with pytest.raises(AdmissibilityError):
            empirical_w_star(small_grid, OscillatingProfile(w=1.0, alpha=1.0, beta=3.0), ConjugateSpec(), [0.1])
