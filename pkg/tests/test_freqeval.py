import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from freqeval.finite_horizon import (
    block_toeplitz,
    clairvoyant_gram,
    controller_cost_operator,
    finite_horizon_ratio,
    finite_horizon_regret,
)
from freqeval.metrics import (
    CSV_COLUMNS,
    FrequencyEvaluator,
    evaluate_controllers,
    frequency_grid,
    metric_cr,
    metric_frobenius,
    metric_opnorm,
    metric_regret,
    strictly_causal_norm,
    transfer_TK,
)
from models.matrix_file import load_system
from synthesis.clairvoyant import clairvoyant_response, synth_noncausal
from synthesis.competitive import synth_cr, synth_cr_parts
from synthesis.h2 import synth_h2
from synthesis.regret import synth_regret
from tests.conftest import SCALAR_P, SCALAR_RATIO
from utils.exceptions import UnsupportedController

K_SCALAR = 0.5 * SCALAR_P / (1.0 + SCALAR_P)
A_K_SCALAR = 0.5 - K_SCALAR


class TestScalarMetrics:
    def test_h2_frobenius_is_p(self, scalar_system):
        _, h2 = synth_h2(scalar_system)
        assert metric_frobenius(scalar_system, h2, grid=256) == pytest.approx(SCALAR_P, rel=1e-10)

    def test_h2_opnorm_peaks_at_dc(self, scalar_system):
        _, h2 = synth_h2(scalar_system)
        value, omega = metric_opnorm(scalar_system, h2, grid=256)
        assert value == pytest.approx((1.0 + K_SCALAR ** 2) / (1.0 - A_K_SCALAR) ** 2, rel=1e-9)
        assert min(omega, 2 * np.pi - omega) < 1e-3

    def test_h2_ratio_density_is_flat(self, scalar_system):
        _, h2 = synth_h2(scalar_system)
        curves = FrequencyEvaluator(scalar_system, grid_size=64).curves(h2)
        assert_allclose(curves["cr"], SCALAR_RATIO, rtol=1e-8)

    def test_directional_cost(self, scalar_system):
        _, h2 = synth_h2(scalar_system)
        omega = 0.5
        expected = 0.5 * (1.0 + K_SCALAR ** 2) / abs(np.exp(1j * omega) - A_K_SCALAR) ** 2
        assert FrequencyEvaluator(scalar_system).directional_cost(h2, omega) == pytest.approx(expected, rel=1e-12)


class TestBenchmarks:
    def test_noncausal_controller(self, tall_system):
        noncausal = synth_noncausal(tall_system)
        regret, _ = metric_regret(tall_system, noncausal, grid=256)
        cr, _ = metric_cr(tall_system, noncausal, grid=256)
        assert regret == pytest.approx(0.0, abs=1e-9)
        assert cr == pytest.approx(1.0, rel=1e-9)

    def test_h2_frobenius_matches_riccati(self, tall_system):
        certificate, h2 = synth_h2(tall_system)
        B_w = tall_system.B_w
        expected = float(np.trace(B_w.T @ certificate.P @ B_w))
        assert metric_frobenius(tall_system, h2, grid=1024) == pytest.approx(expected, rel=1e-6)

    def test_h2_has_the_smallest_frobenius_norm(self, tall_system):
        _, h2 = synth_h2(tall_system)
        _, cr = synth_cr(tall_system)
        _, regret = synth_regret(tall_system)
        metrics = evaluate_controllers(tall_system, {"h2": h2, "cr": cr, "regret": regret}, grid=512)
        assert metrics.frobenius["cr"] >= metrics.frobenius["h2"] * (1.0 - 1e-9)
        assert metrics.frobenius["regret"] >= metrics.frobenius["h2"] * (1.0 - 1e-9)
        assert metrics.sup("cr", "cr") <= metrics.sup("h2", "cr") * (1.0 + 1e-6)
        assert metrics.sup("regret", "regret") <= metrics.sup("h2", "regret") * (1.0 + 1e-6)

    def test_decomposition_parts_have_the_right_causality(self, tall_system):
        parts = synth_cr_parts(tall_system)
        assert strictly_causal_norm(parts.decomposition.anticausal_part) < 1e-10
        causal_first, _ = parts.decomposition.causal_parts
        assert strictly_causal_norm(causal_first) > 1e-6

    def test_noncausal_cost_is_the_clairvoyant_response(self, tall_system):
        T = transfer_TK(tall_system, synth_noncausal(tall_system), 0.7)
        assert_allclose(T.conj().T @ T, clairvoyant_response(tall_system, 0.7), rtol=1e-9, atol=1e-12)


class TestFrequencyMetricsTables:
    def test_frame_layout(self, scalar_system, tmp_path):
        _, h2 = synth_h2(scalar_system)
        _, cr = synth_cr(scalar_system)
        metrics = evaluate_controllers(scalar_system, {"h2": h2, "cr": cr}, grid=32)
        frame = metrics.to_frame()
        assert tuple(frame.columns) == CSV_COLUMNS
        assert len(frame) == 64
        assert list(frame["controller"][:2]) == ["h2", "cr"]
        assert_allclose(frame["omega"].unique(), frequency_grid(32))

        path = tmp_path / "metrics.csv"
        metrics.save_csv(str(path))
        assert_allclose(pd.read_csv(path)["frob_density"].to_numpy(), frame["frob_density"].to_numpy(), rtol=1e-15)

        summary = metrics.summary_frame()
        assert list(summary["controller"]) == ["h2", "cr"]
        assert summary.loc[0, "frob_sq"] == pytest.approx(SCALAR_P, rel=1e-8)
        assert summary.loc[0, "opnorm"] == pytest.approx(np.sqrt(summary.loc[0, "opnorm_sq"]))


class TestFiniteHorizon:
    def test_block_toeplitz(self):
        taps = [np.array([[1.0]]), np.array([[2.0]]), np.array([[3.0]])]
        assert_allclose(block_toeplitz(taps, 3), [[1, 0, 0], [2, 1, 0], [3, 2, 1]])

    def test_clairvoyant_gram_is_psd(self, tall_system):
        gram = clairvoyant_gram(tall_system, 20)
        assert gram.shape == (40, 40)
        assert np.linalg.eigvalsh(gram)[0] > -1e-10

    def test_feedback_and_transfer_forms_agree(self, scalar_system):
        parts = synth_cr_parts(scalar_system, path="square")
        reduced = controller_cost_operator(scalar_system, parts.controller, 40)
        raw = controller_cost_operator(scalar_system, parts.raw_controller, 40)
        assert_allclose(reduced, raw, atol=1e-10)

    def test_ratio_approaches_the_infinite_horizon_value(self, scalar_system):
        _, controller = synth_cr(scalar_system)
        ratio = finite_horizon_ratio(scalar_system, controller, 150)
        assert 0.9 * SCALAR_RATIO <= ratio <= 1.05 * SCALAR_RATIO

    def test_regret_is_nonnegative(self, scalar_system):
        _, h2 = synth_h2(scalar_system)
        assert finite_horizon_regret(scalar_system, h2, 30) > 0.0

    def test_noncausal_is_rejected(self, scalar_system):
        with pytest.raises(UnsupportedController):
            finite_horizon_ratio(scalar_system, synth_noncausal(scalar_system), 10)

    @pytest.mark.slow
    def test_four_state_ratio_bounds(self, four_state_path):
        sys = load_system(four_state_path)
        _, h2 = synth_h2(sys)
        certificate, cr = synth_cr(sys)
        assert finite_horizon_ratio(sys, cr, 120) <= 1.05 * certificate.ratio
        assert finite_horizon_ratio(sys, h2, 120) >= 1.0 - 1e-9
