import math

import numpy as np
import pytest

from lapkit.conditions import (
    ShellSampler,
    arithmetic_line,
    branches,
    check_theorem,
    classify_oscillating,
    eval_oscillating,
    sample_extreme,
    sup_weighted,
)
from lapkit.errors import AdmissibilityError, ConfigError, SamplingError
from shared.models import (
    GaussianProfile,
    GridSpec,
    OscillatingProfile,
    PotentialSpec,
    PowerProfile,
    TheoremParams,
    WellProfile,
)


def line(verdict, name):
    return next(l for l in verdict.lines if l.name == name)


class TestShellSampler:
    def test_rejects_coarse_shells(self):
        with pytest.raises(SamplingError):
            ShellSampler(3, shells=20)

    def test_radii_span_and_refinement(self):
        sampler = ShellSampler(3)
        radii = sampler.radii()
        assert radii[0] == pytest.approx(1e-3)
        assert radii[-1] == pytest.approx(1e3)
        assert len(sampler.radii(2)) > len(radii)

    def test_directions(self):
        assert len(ShellSampler(3, radial=True).blocks()) == 1
        blocks = ShellSampler(3, directions=8, seed=1, radial=False).blocks()
        assert len(blocks) == 3 + 8
        assert all(b.shape[1] == 3 for b in blocks)

    def test_non_finite_sample(self):
        sampler = ShellSampler(1)
        with pytest.raises(SamplingError):
            sample_extreme(lambda x: np.where(x[:, 0] > 10.0, np.inf, 1.0), sampler)

    def test_sup_weighted(self):
        # sup r^2 / (1 + r^2) is approached at the outer shell
        sampler = ShellSampler(3)
        result = sup_weighted(lambda x: 1.0 / (1.0 + np.sum(x**2, axis=1)), lambda x: np.sum(x**2, axis=1), sampler)
        assert result.converged
        assert result.value == pytest.approx(1.0, rel=1e-5)
        assert result.location[0] == pytest.approx(1e3)


class TestArithmeticLine:
    @pytest.mark.parametrize("observed, bound, strict, upper, status", [
        (3, 3, False, False, "pass"),
        (3, 3, True, False, "fail"),
        (2, 3, False, False, "fail"),
        (1.5, 2.0, True, True, "pass"),
        (2.0, 2.0, True, True, "fail"),
    ])
    def test_status(self, observed, bound, strict, upper, status):
        assert arithmetic_line("x", observed, bound, strict, upper).status == status


class TestOscillating:
    @pytest.mark.parametrize("alpha, beta, expected", [
        (1.0, 4.0, {"BoGo": "pass", "AF2": "pass"}),
        (2.0, 4.0, {"BoGo": "fail", "AF2": "pass"}),
        (9.0, 3.0, {"BoGo": "fail", "AF2": "fail", "AU": "pass"}),
    ])
    def test_branch_patterns(self, alpha, beta, expected):
        verdict = classify_oscillating(OscillatingProfile(w=0.1, alpha=alpha, beta=beta), 3, w_star=0.5)
        found = branches(verdict)
        for name, status in expected.items():
            assert found[name] == status, name
        assert verdict.verdict == "pass"

    def test_smallness_without_estimate(self):
        verdict = classify_oscillating(OscillatingProfile(w=0.1, alpha=9.0, beta=3.0), 3)
        assert line(verdict, "AU: w small enough").status == "inconclusive"
        assert verdict.verdict == "inconclusive"

    def test_amplitude_above_estimate(self):
        verdict = classify_oscillating(OscillatingProfile(w=1.0, alpha=9.0, beta=3.0), 3, w_star=0.5)
        assert line(verdict, "AU: w small enough").status == "fail"
        assert verdict.verdict == "fail"
        assert verdict.constants["w_star"] == 0.5

    def test_low_dimension(self):
        with pytest.raises(AdmissibilityError):
            classify_oscillating(OscillatingProfile(w=1.0, alpha=1.0, beta=4.0), 2)

    def test_branch_arithmetic_on_random_pairs(self):
        rng = np.random.default_rng(2024)
        for alpha, beta in rng.uniform(0.01, 6.0, size=(1000, 2)):
            found = branches(classify_oscillating(OscillatingProfile(w=0.1, alpha=alpha, beta=beta), 3))
            assert (found["BoGo"] == "pass") == (beta >= 2 and beta - 2 * alpha >= 2)
            assert (found["AF2"] == "pass") == (beta >= 2 and beta - alpha >= 2)
            if found["BoGo"] == "pass":
                assert found["AF2"] == "pass"

    def test_eval_closed_forms(self):
        p = OscillatingProfile(w=1.0, alpha=1.0, beta=4.0)
        value, commutator = eval_oscillating(p, [10.0, 0.0, 0.0])
        assert value == pytest.approx(math.sin(10.0) / 1e4)
        assert commutator == pytest.approx(-4.0 * value + math.cos(10.0) / 1e3)

    def test_eval_inside_cutoff_and_origin(self):
        p = OscillatingProfile(w=1.0, alpha=1.0, beta=4.0)
        assert eval_oscillating(p, [0.5, 0.5, 0.0])[0] == 0.0
        assert eval_oscillating(p, [0.0, 0.0, 0.0]) == (0.0, 0.0)


BRACKET_4 = PotentialSpec(real=PowerProfile(amplitude=1.0, exponent=4.0))


class TestTheorems:
    def test_osc_needs_oscillating_potential(self):
        with pytest.raises(ConfigError):
            check_theorem("OSC", BRACKET_4, 3)

    def test_osc_dispatch(self):
        spec = PotentialSpec(real=OscillatingProfile(w=0.1, alpha=1.0, beta=4.0))
        assert check_theorem("OSC", spec, 3).mode == "any"

    def test_unknown_theorem(self):
        with pytest.raises(ConfigError):
            check_theorem("KATO", BRACKET_4, 3)

    def test_bogo_constants(self):
        verdict = check_theorem("BoGo", BRACKET_4, 3)
        assert verdict.constants["C_cap"] == pytest.approx(0.5)
        assert verdict.verdict == "pass"
        weighted = check_theorem("BoGo", BRACKET_4, 3, TheoremParams(c1=0.5))
        assert weighted.constants["C_cap"] == pytest.approx(0.375)
        assert weighted.verdict == "pass"

    def test_bogo_in_two_dimensions(self):
        verdict = check_theorem("BoGo", BRACKET_4, 2)
        assert line(verdict, "n >= 3").status == "fail"
        assert verdict.verdict == "fail"

    def test_af2_weighted_sup(self):
        # 4 r^4 / (1 + r^2)^3 peaks at r^2 = 2
        verdict = check_theorem("AF2", BRACKET_4, 3)
        assert line(verdict, "|x·∇V1| |x|^2 bounded").observed == pytest.approx(16.0 / 27.0, rel=1e-2)

    @pytest.mark.parametrize("mu, status", [(1.0 / 32.0, "pass"), (1.0 / 8.0, "fail")])
    def test_af3_mu_range(self, mu, status):
        verdict = check_theorem("AF3", BRACKET_4, 3, TheoremParams(mu=mu))
        assert line(verdict, "0 <= mu < (1+n/(n-2))^-2").status == status

    @pytest.mark.parametrize("amplitude, expected", [(1.0, "pass"), (-1.0, "fail")])
    def test_mr_repulsive_sign(self, amplitude, expected):
        spec = PotentialSpec(real=PowerProfile(amplitude=amplitude, exponent=2.0))
        verdict = check_theorem("MR", spec, 3)
        assert line(verdict, "-x·∇_xV >= 0").status == expected

    def test_au_without_grid(self):
        verdict = check_theorem("AU", BRACKET_4, 3)
        assert line(verdict, "<q>^3 V1 bounded").status == "pass"
        assert verdict.verdict == "inconclusive"

    def test_simon_attractive_gaussian(self):
        spec = PotentialSpec(real=GaussianProfile(amplitude=-0.1, width=1.0))
        verdict = check_theorem("SIMON", spec, 1, grid=GridSpec(n=1, N=256, L=20.0), seed=3)
        assert verdict.constants["integral"] == pytest.approx(-0.1 * math.sqrt(math.pi), rel=1e-6)
        assert verdict.constants["lowest_eigenvalue"] < 0
        assert line(verdict, "∫V1 <= 0 iff a negative eigenvalue").status == "pass"

    def test_simon_outside_low_dimensions(self):
        spec = PotentialSpec(real=GaussianProfile(amplitude=-0.1))
        verdict = check_theorem("SIMON", spec, 3)
        assert line(verdict, "n in {1, 2}").status == "fail"
        assert line(verdict, "∫V1 <= 0 iff a negative eigenvalue").status == "inconclusive"


DISSIPATIVE_4 = PotentialSpec(real=PowerProfile(exponent=4.0), imaginary=PowerProfile(exponent=4.0))
VIRIAL = "x·∇V1 + c1 V1 <= C/|x|^2 with C < (2-c1)(n-2)^2/4"
C1_LINES = ["c1 in [0, 2)", "-c1 x·∇V2 >= 0"]


def names(verdict):
    found = [l.name for l in verdict.lines]
    assert len(found) == len(set(found)), found
    return set(found)


class TestHypothesisLists:
    def test_bogo(self):
        assert names(check_theorem("BoGo", DISSIPATIVE_4, 3)) == {
            "n >= 3",
            "V1 Δ-bounded (heuristic)",
            "V2 Δ-bounded (heuristic)",
            "V2 >= 0",
            "∇V1 and q·∇V1 Δ-bounded (heuristic)",
            "∇V2 and q·∇V2 Δ-bounded (heuristic)",
            "|x|^2 (x·∇)^2 V1 bounded",
            "|x|^2 (x·∇)^2 V2 bounded",
            VIRIAL,
            *C1_LINES,
        }

    def test_af2(self):
        assert names(check_theorem("AF2", DISSIPATIVE_4, 3)) == {
            "n >= 3",
            "V2 >= 0",
            "V1 Δ-bounded (heuristic)",
            "V2 Δ-bounded (heuristic)",
            "∇V1 and q·∇V1 Δ-bounded (heuristic)",
            "∇V2 and q·∇V2 Δ-bounded (heuristic)",
            "|x·∇V1| |x|^2 bounded",
            "|x·∇V2| |x|^2 bounded",
            VIRIAL,
            *C1_LINES,
        }

    def test_af3(self):
        verdict = check_theorem("AF3", DISSIPATIVE_4, 3, TheoremParams(mu=1.0 / 32.0))
        assert names(verdict) == {
            "n >= 3",
            "0 <= mu < (1+n/(n-2))^-2",
            "V1 Δ-compact (heuristic)",
            "V2 Δ-compact (heuristic)",
            "V2 >= 0",
            "q<q>^-mu·∇V1 Δ-compact (heuristic)",
            "q<q>^-mu·∇V2 Δ-compact (heuristic)",
            "C = inf(-x·∇V1 |x|^2) > -(n-2)^2(1-mu(1+n/(n-2))^2)/2",
            "|(F·∇)^2 V1| |x|^2 <x>^mu bounded",
            "|(F·∇)^2 V2| |x|^2 <x>^mu bounded",
        }

    def test_partial(self):
        spec = PotentialSpec(real=PowerProfile(exponent=4.0), imaginary=PowerProfile(exponent=4.0),
                             split=3, cross=GaussianProfile(amplitude=0.1))
        assert names(check_theorem("PARTIAL", spec, 4)) == {
            "k >= 3",
            "V1 Δ-bounded (heuristic)",
            "V2 Δ-bounded (heuristic)",
            "V2 >= 0",
            "∇_xV1 and q_x·∇_xV1 Δ-bounded (heuristic)",
            "∇_xV2 and q_x·∇_xV2 Δ-bounded (heuristic)",
            "|(x·∇_x)^2 V1| |x|^2 bounded",
            "|(x·∇_x)^2 V2| |x|^2 bounded",
            "C' = sup x·∇_xV1 |x|^2 < (k-2)^2/2",
            "<q_x>^3 V1 bounded",
            "<q_x>^3 V2 bounded",
        }

    def test_gradient_lines_need_a_gradient(self):
        verdict = check_theorem("AF2", PotentialSpec(real=WellProfile(depth=1.0)), 3)
        assert line(verdict, "∇V1 and q·∇V1 Δ-bounded (heuristic)").status == "inconclusive"
        assert line(verdict, "|x·∇V1| |x|^2 bounded").status == "inconclusive"

    def test_flow_gradient_sampled_on_a_grid(self):
        grid = GridSpec(n=3, N=64, L=20.0, geometry="radial")
        verdict = check_theorem("AF3", BRACKET_4, 3, TheoremParams(mu=1.0 / 32.0), grid=grid, seed=2)
        sampled = line(verdict, "q<q>^-mu·∇V1 Δ-compact (heuristic)")
        assert sampled.status == "heuristic"
        assert sampled.observed is not None and sampled.observed > 0.0
        assert "tail norms" in sampled.note
