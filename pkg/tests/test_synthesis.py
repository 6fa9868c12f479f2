import numpy as np
import pytest
from numpy.testing import assert_allclose

from freqeval.metrics import metric_cr, metric_opnorm, metric_regret
from models.lti_system import LtiSystem
from models.matrix_file import load_system
from models.random_system import make_random_system
from numerics.linalg import spectral_radius
from numerics.options import SolverOptions
from sim.disturbances import DisturbanceSpec
from sim.simulator import simulate
from synthesis.certificate import SynthesisCertificate
from synthesis.competitive import choose_path, closed_form_ratio, synth_cr, synth_cr_parts
from synthesis.h2 import synth_h2
from synthesis.hinf import synth_hinf
from synthesis.orchestrator import SynthesisOrchestrator, successful_controllers
from synthesis.regret import synth_regret, synth_weighted_regret
from tests.conftest import SCALAR_P, SCALAR_RATIO
from utils.exceptions import (
    InfeasibleAtUpperBound,
    RankDeficientBw,
    ResidualTooLarge,
    RiccatiFailure,
    UnstableProduct,
    UnsupportedMethod,
)

GRID = 2 * np.pi * np.arange(64) / 64


class TestCompetitiveRatio:
    def test_scalar_closed_form(self, scalar_system):
        certificate, controller = synth_cr(scalar_system)
        assert certificate.path == "scalar"
        assert certificate.ratio == pytest.approx(SCALAR_RATIO, rel=1e-10)
        assert certificate.ratio == pytest.approx(2.2831956, abs=1e-7)
        assert controller.Dx[0, 0] == pytest.approx(-0.5 * SCALAR_P / (1.0 + SCALAR_P), rel=1e-10)

    def test_zero_dynamics_ratio_is_two(self, zero_a_system):
        assert closed_form_ratio(zero_a_system) == pytest.approx(2.0, rel=1e-12)
        assert synth_cr(zero_a_system, path="general")[0].ratio == pytest.approx(2.0, rel=1e-9)

    @pytest.mark.parametrize("path", ["square", "general"])
    def test_scalar_paths_agree(self, scalar_system, path):
        certificate, controller = synth_cr(scalar_system, path=path)
        assert certificate.ratio == pytest.approx(SCALAR_RATIO, rel=1e-9)
        # the scalar LQR law is itself competitive-ratio optimal
        cr, _ = metric_cr(scalar_system, controller, grid=256)
        assert cr == pytest.approx(SCALAR_RATIO, rel=1e-8)

    def test_square_and_general_paths_agree(self, square_system):
        square = synth_cr_parts(square_system, path="square")
        general = synth_cr_parts(square_system, path="general")
        assert square.certificate.ratio == pytest.approx(general.certificate.ratio, rel=1e-8)
        assert_allclose(square.controller.evaluate_many(GRID), general.controller.evaluate_many(GRID),
                        rtol=1e-6, atol=1e-8)

    @pytest.mark.parametrize("fixture", ["tall_system", "square_system"])
    def test_ratio_matches_frequency_sup(self, fixture, request):
        sys = request.getfixturevalue(fixture)
        certificate, controller = synth_cr(sys)
        assert certificate.verify(sys)
        cr, _ = metric_cr(sys, controller, grid=1024)
        assert cr == pytest.approx(certificate.ratio, rel=1e-6)
        assert controller.closed_loop_radius() < 1.0

    def test_unequal_input_weight(self):
        base = LtiSystem([[0.9, 0.2], [0.0, 1.1]], [[1.0], [0.5]], np.eye(2), np.eye(2), [[1.0]], name="base")
        scaled = base.with_(B_u=np.array([[2.0], [1.0]]), R=np.array([[4.0]]), name="scaled")
        ratio = synth_cr(base)[0].ratio
        assert synth_cr(scaled)[0].ratio == pytest.approx(ratio, rel=1e-9)

    def test_certificate_entries(self, tall_system):
        certificate, _ = synth_cr(tall_system)
        entries = certificate.to_entries()
        assert entries["method"] == "cr"
        assert entries["path"] == "general"
        assert all(value < 1.0 for key, value in entries.items() if key.startswith("rho."))
        assert "residual.m_riccati" in entries
        assert certificate.summary().startswith(f"{tall_system.name} cr path=general ratio=")

    @pytest.mark.parametrize("seed", range(5))
    def test_general_path_on_scalar_plant_is_lqr(self, seed):
        sys = make_random_system(1, 1, 1, seed=seed)
        certificate, cr = synth_cr(sys, path="general")
        assert certificate.ratio == pytest.approx(closed_form_ratio(sys), rel=1e-9)
        _, h2 = synth_h2(sys)
        spec = DisturbanceSpec("gaussian", 200, seed=seed)
        cr_run = simulate(sys, cr, spec, trials=2, keep_trajectories=True)
        h2_run = simulate(sys, h2, spec, trials=2, keep_trajectories=True)
        assert_allclose(cr_run.inputs, h2_run.inputs, rtol=0, atol=1e-11)
        # U xi1 - Pi xi2 stays at zero, so u_t is the LQR law on x_t
        assert_allclose(cr_run.inputs[..., 0], h2.Dx[0, 0] * cr_run.states[:, :-1, 0], rtol=0, atol=1e-11)

    def test_uncontrolled_plant_has_unit_ratio(self):
        sys = LtiSystem([[0.5]], [[0.0]], [[1.0]], [[1.0]], [[1.0]], name="uncontrolled")
        assert closed_form_ratio(sys) == 1.0

    @pytest.mark.parametrize("dims", [(2, 1, 1), (3, 1, 2), (3, 2, 2)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_ratio_matches_sweep_on_random_plants(self, dims, seed):
        sys = make_random_system(*dims, seed=seed)
        certificate, controller = synth_cr(sys)
        assert certificate.ratio >= 1.0
        cr, _ = metric_cr(sys, controller, grid=256)
        assert cr == pytest.approx(certificate.ratio, rel=1e-6)
        assert controller.closed_loop_radius() < 1.0

    def test_closed_loop_stable_on_unstable_plant(self, four_state_path):
        sys = load_system(four_state_path)
        assert spectral_radius(sys.A) > 1.0
        certificate, controller = synth_cr(sys)
        assert certificate.ratio >= 1.0
        assert controller.closed_loop_radius() < 1.0

    def test_path_selection(self, scalar_system, tall_system, square_system):
        assert choose_path(scalar_system) == "scalar"
        assert choose_path(square_system) == "square"
        assert choose_path(tall_system) == "general"
        with pytest.raises(RankDeficientBw):
            choose_path(tall_system, "square")
        with pytest.raises(UnsupportedMethod):
            choose_path(tall_system, "scalar")
        with pytest.raises(UnsupportedMethod):
            choose_path(tall_system, "fastest")


class TestCertificateEnforcement:
    @pytest.fixture
    def bad_residual(self, monkeypatch):
        monkeypatch.setattr(SynthesisCertificate, "compute_residuals", lambda self, sys: {"dare": 1e-3})

    @pytest.mark.parametrize("synth", [synth_cr, synth_h2])
    def test_residual_above_limit_raises(self, tall_system, bad_residual, synth):
        with pytest.raises(ResidualTooLarge, match="residual above 1e-08"):
            synth(tall_system)

    def test_loose_acceptance_admits_residual(self, tall_system, bad_residual):
        certificate, _ = synth_h2(tall_system, SolverOptions(acceptance=1e-2))
        assert certificate.residuals == {"dare": 1e-3}

    def test_radius_on_circle_raises(self, tall_system, monkeypatch):
        monkeypatch.setattr(SynthesisCertificate, "compute_spectral_radii", lambda self: {"A_K": 1.0})
        with pytest.raises(UnstableProduct):
            synth_h2(tall_system)

    def test_orchestrator_records_rejected_certificate(self, scalar_system, bad_residual):
        results = SynthesisOrchestrator().run(scalar_system, ["h2", "cr"])
        assert not results["h2"]["success"]
        assert results["cr"]["error_type"] == "ResidualTooLarge"
        assert "dare=0.001" in results["cr"]["error"]
        assert successful_controllers(results) == {}


class TestH2:
    def test_scalar_gain(self, scalar_system):
        certificate, controller = synth_h2(scalar_system)
        assert certificate.P[0, 0] == pytest.approx(SCALAR_P, rel=1e-12)
        assert controller.n_states == 0
        assert controller.closed_loop_radius() == pytest.approx(0.5 / (1.0 + SCALAR_P), rel=1e-10)

    def test_scalar_regret_at_dc(self, scalar_system):
        _, controller = synth_h2(scalar_system)
        K = 0.5 * SCALAR_P / (1.0 + SCALAR_P)
        a_k = 0.5 - K
        expected = (1.0 + K * K) / (1.0 - a_k) ** 2 - 0.8
        value, omega = metric_regret(scalar_system, controller, grid=256)
        assert value == pytest.approx(expected, rel=1e-8)
        assert value == pytest.approx(1.02656, abs=1e-5)
        assert min(omega, 2 * np.pi - omega) < 1e-3


class TestRegret:
    def test_scalar_value(self, scalar_system):
        value, controller = synth_regret(scalar_system)
        assert value == pytest.approx(0.67366, abs=1e-4)
        sup, _ = metric_regret(scalar_system, controller, grid=512)
        assert sup == pytest.approx(value, rel=1e-6)

    @pytest.mark.parametrize("fixture", ["tall_system", "square_system"])
    def test_value_matches_frequency_sup(self, fixture, request):
        sys = request.getfixturevalue(fixture)
        value, controller = synth_regret(sys)
        sup, _ = metric_regret(sys, controller, grid=1024)
        assert sup == pytest.approx(value, rel=1e-6)
        _, h2 = synth_h2(sys)
        assert metric_regret(sys, h2, grid=1024)[0] >= value * (1.0 - 1e-6)

    def test_input_weight_equals_input_cost(self, scalar_system):
        weighted = synth_weighted_regret(scalar_system, W_u=[[4.0]])
        plain = synth_weighted_regret(scalar_system.with_(R=np.array([[4.0]])))
        assert weighted.value == pytest.approx(plain.value, rel=1e-10)
        assert_allclose(weighted.controller.evaluate_many(GRID), plain.controller.evaluate_many(GRID),
                        rtol=1e-9, atol=1e-12)

    def test_clairvoyant_weight_gives_ratio_minus_one(self, tall_system):
        result = synth_weighted_regret(tall_system, W_w="clairvoyant")
        ratio = synth_cr(tall_system)[0].ratio
        assert result.value == pytest.approx(ratio - 1.0, rel=1e-10)
        assert result.controller.method == "regret"


class TestHinf:
    def test_level_and_achieved_norm(self, tall_system):
        result = synth_hinf(tall_system, grid_size=512)
        achieved, _ = metric_opnorm(tall_system, result.controller, grid=512)
        assert achieved <= result.gamma ** 2 * (1.0 + 1e-2)
        _, h2 = synth_h2(tall_system)
        h2_norm, _ = metric_opnorm(tall_system, h2, grid=512)
        assert result.gamma ** 2 <= h2_norm * (1.0 + 1e-3)
        assert result.lower <= result.gamma <= result.upper
        assert result.controller.closed_loop_radius() < 1.0

    def test_upper_bracket_exhausted(self, scalar_system, monkeypatch):
        monkeypatch.setattr("synthesis.hinf.hinf_bracket", lambda sys, grid_size=None, options=None: (0.1, 0.2))
        with pytest.raises(InfeasibleAtUpperBound):
            synth_hinf(scalar_system, max_doublings=1)

    def test_solver_options_reach_h2_bracket(self, scalar_system, monkeypatch):
        seen = []

        def recording(sys, options=None):
            seen.append(options)
            return synth_h2(sys, options)

        monkeypatch.setattr("synthesis.hinf.synth_h2", recording)
        custom = SolverOptions(max_iterations=150)
        synth_hinf(scalar_system, grid_size=128, options=custom)
        assert seen == [custom]


class TestOrchestrator:
    def test_runs_every_method(self, scalar_system):
        results = SynthesisOrchestrator(grid_size=128).run(scalar_system, ["h2", "cr", "regret", "noncausal"])
        assert all(r["success"] for r in results.values())
        assert results["cr"]["value"] == pytest.approx(SCALAR_RATIO, rel=1e-10)
        assert set(successful_controllers(results)) == {"h2", "cr", "regret", "noncausal"}

    def test_failure_is_recorded(self, scalar_system, monkeypatch):
        def broken(sys, options=None):
            raise RiccatiFailure("no stabilizing solution", {"step": "M"})

        monkeypatch.setattr("synthesis.orchestrator.synth_cr", broken)
        results = SynthesisOrchestrator().run(scalar_system, ["h2", "cr"])
        assert results["h2"]["success"]
        assert results["cr"] == {"success": False, "method": "cr", "error": "no stabilizing solution (step=M)",
                                 "error_type": "RiccatiFailure"}
        assert list(successful_controllers(results)) == ["h2"]

    def test_unknown_method(self, scalar_system):
        with pytest.raises(UnsupportedMethod):
            SynthesisOrchestrator().run(scalar_system, ["h2", "lqg"])
