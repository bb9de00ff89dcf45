import math

import numpy as np
import pytest

from lapkit.errors import ConfigError, SolverError
from lapkit.grid_ops import identity_map, weight_map
from lapkit.lap import (
    ShiftedResolvent,
    l_doubling_sensitivity,
    lambda_trend,
    lowest_eigenvalues,
    run_sweep,
    run_sweep_async,
    simon_demo,
    sweep_lambdas,
    sweep_weights,
    weighted_resolvent_norm,
)
from lapkit.potentials import assemble_hamiltonian
from shared.models import (
    ConjugateSpec,
    EigenEntry,
    EigenScan,
    GaussianProfile,
    GridSpec,
    NormSettings,
    PotentialSpec,
    SolverSettings,
    SweepPlan,
    SweepResult,
    SweepRow,
    WeightSpec,
    WellProfile,
)

LANCZOS = NormSettings(method="lanczos")


def row(eta, norm, valid=True, lam=0.0):
    return SweepRow(lam=lam, eta=eta, norm=norm, iters=0, residual=0.0, valid=valid)


def identity_plan(lambdas, etas, **kwargs):
    return SweepPlan(lambdas=lambdas, etas=etas, weight="identity", norm=LANCZOS, **kwargs)


class TestTrend:
    @pytest.mark.parametrize("norms, verdict", [
        ((1.0, 10.0), "blow-up"),
        ((1.0, 1.5), "bounded"),
        ((2e8, 2e8), "blow-up"),
    ])
    def test_one_decade(self, norms, verdict):
        trend = lambda_trend(0.0, [row(1.0, norms[0]), row(0.1, norms[1])], threshold=3.0)
        assert trend.verdict == verdict
        assert trend.sup_norm == max(norms)

    def test_ratio_is_per_decade(self):
        trend = lambda_trend(0.0, [row(1e-4, 100.0), row(1e-2, 1.0)], threshold=3.0)
        assert trend.ratio == pytest.approx(10.0)

    def test_invalid_row(self):
        trend = lambda_trend(0.0, [row(1.0, 1.0), row(0.1, None, valid=False)], threshold=3.0)
        assert trend.verdict == "inconclusive"
        assert trend.ratio is None

    def test_single_row(self):
        assert lambda_trend(0.0, [row(1.0, 1.0)], threshold=3.0).verdict == "inconclusive"

    def test_l_doubling_sensitivity(self):
        rows = [row(1.0, 2.0), row(0.1, 4.0)]
        rows[0].l_doubled_norm = 2.2
        rows[1].l_doubled_norm = 4.0
        result = SweepResult(weight="identity", threshold=3.0, rows=rows)
        assert l_doubling_sensitivity(result) == pytest.approx(0.1)


class TestLambdas:
    def test_bound_eigenvalues_added(self):
        scan = EigenScan(requested=2, shift=-6.0, converged=True, entries=[
            EigenEntry(real=-2.5, imag=0.0, interior_fraction=0.99, bound=True),
            EigenEntry(real=0.01, imag=0.0, interior_fraction=0.2, bound=False),
        ])
        plan = identity_plan([0.0, -1.0], [0.1, 0.01], include_eigenvalues=True)
        assert sweep_lambdas(plan, scan) == [-2.5, -1.0, 0.0]
        plan.include_eigenvalues = False
        assert sweep_lambdas(plan, scan) == [-1.0, 0.0]


class TestResolvent:
    def test_positive_eta_required(self, tiny_grid):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        with pytest.raises(SolverError):
            ShiftedResolvent(H, 0.0, 0.0, SolverSettings())

    @pytest.mark.parametrize("method", ["direct", "iterative"])
    def test_solution_has_small_backward_error(self, tiny_grid, method):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        resolvent = ShiftedResolvent(H, -1.0, 0.1, SolverSettings(method=method))
        b = np.random.default_rng(0).standard_normal(tiny_grid.size).astype(complex)
        x = resolvent.solve(b)
        assert resolvent.backward_error(x, b) <= 1e-10
        assert resolvent.diagnostics.valid

    @pytest.mark.parametrize("lam, eta, expected", [
        (-1.0, 0.1, 1.0 / math.sqrt(1.01)),
        (0.0, 0.1, 10.0),
        (0.0, 0.01, 100.0),
    ])
    def test_free_identity_norm(self, tiny_grid, lam, eta, expected):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        one = identity_map(tiny_grid)
        value, diagnostics = weighted_resolvent_norm(H, lam, eta, one, one, SolverSettings(method="direct"), LANCZOS)
        assert value == pytest.approx(expected, rel=1e-6)
        assert diagnostics.valid

    @pytest.mark.parametrize("potential", [
        PotentialSpec(),
        PotentialSpec(real=WellProfile(depth=2.0, radius=1.5, edge=0.5)),
    ])
    def test_norm_matches_dense_adjoint_side(self, tiny_grid, potential):
        # M†M and MM† share their largest eigenvalue
        H = assemble_hamiltonian(tiny_grid, potential)
        Wl = weight_map(tiny_grid, WeightSpec(s=-1.0))
        Wr = weight_map(tiny_grid, WeightSpec(s=-2.0, t=-1.0))
        value, _ = weighted_resolvent_norm(H, 0.5, 0.1, Wl, Wr, SolverSettings(method="direct"), LANCZOS)

        shifted = H.full.dense() - (0.5 - 0.1j) * np.eye(tiny_grid.size)
        M = Wl.dense() @ np.linalg.solve(shifted, Wr.dense())
        expected = math.sqrt(np.linalg.eigvalsh(M @ M.conj().T).max())
        assert value == pytest.approx(expected, rel=1e-6)

    def test_partial_weights_need_coordinates(self, tiny_grid):
        with pytest.raises(ConfigError):
            sweep_weights(tiny_grid, SweepPlan(lambdas=[0.0], etas=[0.1], weight="partial"), ConjugateSpec())


class TestSweep:
    async def test_free_sweep_separates_threshold(self, tiny_grid):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        result = await run_sweep_async(H, identity_plan([-1.0, 0.0], [0.1, 0.01]), workers=2)
        trends = {t.lam: t for t in result.trends}
        assert trends[-1.0].verdict == "bounded"
        assert trends[0.0].verdict == "blow-up"
        assert trends[0.0].ratio == pytest.approx(10.0, rel=1e-5)
        assert result.verdict == "blow-up"
        assert len(result.rows) == 4 and result.invalid_rows == []

    def test_blocking_sweep(self, tiny_grid):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        result = run_sweep(H, identity_plan([-1.0], [0.1, 0.01]), workers=1)
        assert result.trends[0].verdict == "bounded"
        assert [r.eta for r in result.rows] == [0.1, 0.01]

    async def test_failed_solves_make_rows_invalid(self, tiny_grid, mocker):
        mocker.patch("lapkit.lap.cg", return_value=(np.zeros(tiny_grid.size, dtype=complex), 1))
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        plan = SweepPlan(lambdas=[-1.0], etas=[0.1, 0.01], weight="identity",
                         solver=SolverSettings(method="iterative", restarts=2))
        result = await run_sweep_async(H, plan, workers=1)
        assert all(r.norm is None and not r.valid for r in result.rows)
        assert result.trends[0].verdict == "inconclusive"
        assert result.verdict == "inconclusive"

    async def test_l_doubling_needs_rebuild(self, tiny_grid):
        H = assemble_hamiltonian(tiny_grid, PotentialSpec())
        with pytest.raises(ConfigError):
            await run_sweep_async(H, identity_plan([0.0], [0.1], l_doubling=True))

    async def test_l_doubling_rows(self, tiny_grid):
        spec = PotentialSpec()
        H = assemble_hamiltonian(tiny_grid, spec)
        plan = identity_plan([-1.0], [0.1, 0.01], l_doubling=True)
        result = await run_sweep_async(H, plan, rebuild=lambda grid: assemble_hamiltonian(grid, spec), workers=2)
        assert all(r.l_doubled_norm is not None for r in result.rows)
        assert l_doubling_sensitivity(result) < 1e-4

    async def test_bound_state_blows_up(self):
        grid = GridSpec(n=1, N=256, L=20.0)
        H = assemble_hamiltonian(grid, PotentialSpec(real=WellProfile(depth=5.0, radius=1.0)))
        scan = lowest_eigenvalues(H, 2, seed=1)
        assert scan.entries[0].real < 0 and scan.entries[0].bound
        plan = identity_plan([-10.0], [0.1, 0.01], include_eigenvalues=True)
        result = await run_sweep_async(H, plan, eigen=scan, workers=2)
        trends = {t.lam: t.verdict for t in result.trends}
        assert trends[-10.0] == "bounded"
        assert trends[scan.entries[0].real] == "blow-up"
        assert result.verdict == "blow-up"


class TestEigenvalues:
    def test_too_many_requested(self, tiny_grid):
        with pytest.raises(ConfigError):
            lowest_eigenvalues(assemble_hamiltonian(tiny_grid, PotentialSpec()), 21)

    def test_simon_demo_dimension(self):
        with pytest.raises(ConfigError):
            simon_demo(3, -0.1)

    @pytest.mark.parametrize("amplitude", [-0.1, 0.1])
    def test_simon_sign(self, amplitude):
        integral, lowest = simon_demo(1, amplitude, GridSpec(n=1, N=256, L=20.0))
        assert integral == pytest.approx(amplitude * math.sqrt(math.pi))
        assert (lowest < 0) == (amplitude < 0)

    def test_matches_dense_spectrum(self):
        grid = GridSpec(n=1, N=256, L=20.0)
        H = assemble_hamiltonian(grid, PotentialSpec(real=WellProfile(depth=5.0, radius=1.0, edge=0.5)))
        scan = lowest_eigenvalues(H, 3, seed=2)
        dense = np.linalg.eigvalsh(H.full.dense())
        np.testing.assert_allclose([e.real for e in scan.entries], dense[:3], atol=1e-6)
        assert scan.converged

    def test_dissipative_scan_orders_by_real_part(self):
        grid = GridSpec(n=1, N=256, L=20.0)
        spec = PotentialSpec(real=WellProfile(depth=5.0, radius=1.0, edge=0.5),
                             imaginary=GaussianProfile(amplitude=0.5, width=2.0))
        H = assemble_hamiltonian(grid, spec)
        scan = lowest_eigenvalues(H, 2, seed=2)
        dense = np.linalg.eigvals(H.full.dense())
        dense = dense[np.argsort(dense.real)][:2]
        assert len(scan.entries) == 2
        np.testing.assert_allclose([complex(e.real, e.imag) for e in scan.entries], dense, atol=1e-6)
        assert scan.entries[0].real <= scan.entries[1].real
