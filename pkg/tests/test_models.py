import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.lti_system import LtiSystem, input_back_map, normalize_r, require_valid, validate
from models.matrix_file import (
    load_controller,
    load_system,
    parse_text,
    save_controller,
    save_system,
)
from models.random_system import make_random_system
from models.realization import ControllerRealization, TransferRealization
from numerics.linalg import spectral_radius
from utils.exceptions import DimensionMismatch, EigOnCircle, ModelError, ParseError, ValidationFailed

OMEGAS = np.linspace(0.0, 2 * np.pi, 17, endpoint=False)


class TestLtiSystem:
    def test_dimensions(self, tall_system):
        assert tall_system.dims == (3, 1, 2)
        assert not tall_system.is_scalar
        assert not tall_system.has_square_bw

    def test_matrices_are_read_only(self, scalar_system):
        with pytest.raises(ValueError):
            scalar_system.A[0, 0] = 2.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((2, 1)), np.eye(2), np.eye(1))

    def test_normalize_r(self):
        sys = LtiSystem([[0.5]], [[2.0]], [[1.0]], [[1.0]], [[4.0]])
        normalized = normalize_r(sys)
        assert normalized.has_identity_r
        assert normalized.B_u[0, 0] == pytest.approx(1.0)
        assert input_back_map(sys)[0, 0] == pytest.approx(0.5)
        assert normalize_r(normalized) is normalized


class TestValidation:
    def test_scalar_example_passes(self, scalar_system):
        report = validate(scalar_system)
        assert report.passed
        assert "valid = yes" in report.to_text()

    def test_unit_circle_eigenvalue(self):
        sys = LtiSystem([[1.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]], name="integrator")
        report = validate(sys)
        assert not report.passed
        assert not report.checks["unit_circle"].passed
        with pytest.raises(ValidationFailed):
            require_valid(sys)

    def test_indefinite_weight(self):
        sys = LtiSystem(np.diag([0.5, 0.2]), np.eye(2), np.eye(2), np.diag([1.0, -1.0]), np.eye(2))
        report = validate(sys)
        assert not report.checks["q_pd"].passed
        assert "q_pd = FAIL" in report.to_text()

    def test_unstabilizable(self):
        sys = LtiSystem(np.diag([1.5, 0.5]), [[0.0], [1.0]], np.eye(2), np.eye(2), [[1.0]])
        assert not validate(sys).checks["stabilizable"].passed

    def test_rank_deficient_bw(self):
        sys = LtiSystem(np.diag([0.5, 0.2]), [[1.0], [0.0]], [[1.0, 2.0], [1.0, 2.0]], np.eye(2), [[1.0]])
        assert not validate(sys).checks["bw_rank"].passed


class TestRandomSystem:
    def test_reproducible(self):
        a = make_random_system(4, 2, 3, seed=7)
        b = make_random_system(4, 2, 3, seed=7)
        assert_array_equal(a.A, b.A)
        assert_array_equal(a.B_w, b.B_w)

    @pytest.mark.parametrize("unstable", [True, False])
    def test_spectral_radius_range(self, unstable):
        sys = make_random_system(4, 2, 2, seed=3, unstable=unstable)
        rho = spectral_radius(sys.A)
        assert (1.1 <= rho <= 1.6) if unstable else (0.3 <= rho <= 0.9)
        assert validate(sys).passed

    def test_too_many_disturbances(self):
        with pytest.raises(ModelError):
            make_random_system(2, 1, 3)


class TestTransferRealization:
    def test_inverse_cancels(self, tall_system):
        rng = np.random.default_rng(0)
        R = TransferRealization(tall_system.A, rng.standard_normal((3, 2)), rng.standard_normal((2, 3)),
                                np.eye(2) + 0.1 * rng.standard_normal((2, 2)))
        product = R.series(R.inverse()).evaluate_many(OMEGAS)
        assert_allclose(product, np.broadcast_to(np.eye(2), product.shape), atol=1e-10)

    def test_anticausal_evaluation(self):
        R = TransferRealization([[0.4]], [[1.0]], [[1.0]], [[0.0]], "strictly_anticausal")
        assert_allclose(R.evaluate_many(OMEGAS)[:, 0, 0], 1.0 / (np.exp(-1j * OMEGAS) - 0.4))

    def test_markov(self):
        R = TransferRealization([[0.5]], [[2.0]], [[3.0]], [[1.0]])
        assert R.markov(0)[0, 0] == 1.0
        assert R.markov(3)[0, 0] == pytest.approx(6.0 * 0.25)

    def test_pole_on_circle(self):
        R = TransferRealization([[1.0]], [[1.0]], [[1.0]], [[0.0]])
        with pytest.raises(EigOnCircle):
            R.evaluate(0.0)

    def test_strict_realization_needs_zero_feedthrough(self):
        with pytest.raises(ValueError):
            TransferRealization([[0.5]], [[1.0]], [[1.0]], [[1.0]], "strictly_causal")

    def test_scaling(self):
        R = TransferRealization([[0.5]], [[1.0]], [[1.0]], [[2.0]])
        scaled = R.scale_left([[3.0]]).scale_right([[-1.0]])
        assert_allclose(scaled.evaluate_many(OMEGAS), -3.0 * R.evaluate_many(OMEGAS), rtol=1e-12)

    def test_mixed_causality_rejected(self):
        causal = TransferRealization([[0.5]], [[1.0]], [[1.0]], [[0.0]])
        anti = TransferRealization([[0.5]], [[1.0]], [[1.0]], [[0.0]], "anticausal")
        with pytest.raises(ValueError):
            causal.parallel(anti)


class TestControllerRealization:
    def test_static_feedback_response(self, scalar_system):
        K = np.array([[0.25]])
        c = ControllerRealization.static_feedback(scalar_system.A, scalar_system.B_u, scalar_system.B_w, K)
        a_k = 0.5 - 0.25
        assert_allclose(c.evaluate_many(OMEGAS)[:, 0, 0], -0.25 / (np.exp(1j * OMEGAS) - a_k))
        assert c.n_states == 0
        assert c.closed_loop_radius() == pytest.approx(a_k)

    def test_map_output_rescales(self, tall_system):
        c = ControllerRealization.static_feedback(tall_system.A, tall_system.B_u, tall_system.B_w,
                                                  np.ones((1, 3)))
        scaled = c.map_output(np.array([[2.0]]))
        assert_allclose(scaled.Dx, 2.0 * c.Dx)

    def test_zero_transfer_controller(self):
        c = ControllerRealization.from_transfer(np.zeros((0, 0)), [], [], p=2, m=3)
        assert (c.p, c.m, c.n_states) == (2, 3, 0)
        assert_allclose(c.evaluate(0.3), np.zeros((2, 3)))


class TestMatrixFile:
    def test_parse_multiline(self):
        entries = parse_text("name = demo\nA = [1 2;\n     3 4]   # trailing comment\nB = [1, 2]\nE = []\n")
        assert entries["name"].value == "demo"
        assert_array_equal(entries["A"].value, [[1.0, 2.0], [3.0, 4.0]])
        assert_array_equal(entries["B"].value, [[1.0, 2.0]])
        assert entries["E"].value.shape == (0, 0)

    def test_invalid_number_position(self):
        with pytest.raises(ParseError) as info:
            parse_text("A = [1 x]")
        assert (info.value.line, info.value.column) == (1, 8)

    @pytest.mark.parametrize("text,line", [
        ("A = [1]\nA = [2]\n", 2),
        ("# header\nnot a pair\n", 2),
        ("A = [1 2; 3]\n", 1),
        ("A = [1 2;\n3 4\n", 1),
    ])
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_text(text)
        assert info.value.line == line

    def test_missing_key(self, tmp_path):
        path = tmp_path / "bad.sys"
        path.write_text("A = [0.5]\nB_u = [1]\nB_w = [1]\nQ = [1]\n")
        with pytest.raises(ParseError, match="missing key R"):
            load_system(str(path))

    def test_system_round_trip_is_exact(self, tmp_path, tall_system):
        path = str(tmp_path / "plant.sys")
        save_system(tall_system, path)
        loaded = load_system(path)
        assert loaded.name == tall_system.name
        for key in ("A", "B_u", "B_w", "Q", "R"):
            assert_array_equal(getattr(loaded, key), getattr(tall_system, key))

    def test_bundled_examples_load(self, scalar_path, four_state_path):
        assert load_system(scalar_path).dims == (1, 1, 1)
        assert load_system(four_state_path).dims == (4, 2, 2)

    def test_feedback_controller_file(self, tmp_path, tall_system):
        rng = np.random.default_rng(1)
        c = ControllerRealization.from_feedback(tall_system.A, tall_system.B_u, tall_system.B_w,
                                                0.3 * np.eye(2), rng.standard_normal((2, 3)),
                                                rng.standard_normal((1, 2)), rng.standard_normal((1, 3)), "demo")
        path = str(tmp_path / "demo.ctl")
        save_controller(c, path)
        with pytest.raises(ParseError):
            load_controller(path)
        loaded = load_controller(path, tall_system)
        assert loaded.method == "demo"
        assert_allclose(loaded.evaluate_many(OMEGAS), c.evaluate_many(OMEGAS), rtol=1e-14, atol=1e-14)

    def test_zero_state_transfer_controller_file(self, tmp_path):
        c = ControllerRealization.from_transfer(np.zeros((0, 0)), [], [], method="zero", p=1, m=2)
        path = str(tmp_path / "zero.ctl")
        save_controller(c, path)
        loaded = load_controller(path)
        assert (loaded.p, loaded.m) == (1, 2)
