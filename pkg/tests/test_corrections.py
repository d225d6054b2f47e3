"""Boundary corrections: hand examples, feasibility, passthrough guarantees."""

import numpy as np
import pytest

from structbias.corrections import (
    BoundaryCorrection,
    apply_correction,
    mirror,
    resample,
    saturate,
    toroidal,
)
from structbias.errors import ValidationError

ALL_METHODS = list(BoundaryCorrection)


def mirror_oracle(value: float) -> float:
    """Reflect about the violated bound, one bounce at a time."""
    for _ in range(10_000):
        if value < 0.0:
            value = -value
        elif value > 1.0:
            value = 2.0 - value
        else:
            return value
    raise AssertionError("did not converge")


class TestSaturate:
    def test_hand_example(self):
        np.testing.assert_array_equal(
            saturate(np.array([-0.3, 0.5, 1.7])), np.array([0.0, 0.5, 1.0])
        )

    def test_feasible_unchanged(self):
        x = np.array([0.0, 0.25, 1.0])
        np.testing.assert_array_equal(saturate(x), x)

    def test_huge_magnitude(self):
        np.testing.assert_array_equal(
            saturate(np.array([-1e9, 1e9])), np.array([0.0, 1.0])
        )

    def test_scalar(self):
        assert saturate(1.7) == 1.0
        assert saturate(-0.2) == 0.0


class TestToroidal:
    def test_hand_example(self):
        assert toroidal(1.25) == pytest.approx(0.25, abs=1e-15)

    def test_negative_wraps(self):
        assert toroidal(-0.25) == pytest.approx(0.75, abs=1e-15)

    def test_boundary_values_not_wrapped(self):
        # 1.0 is feasible; modular wrap to 0.0 would corrupt it
        x = np.array([0.0, 1.0])
        np.testing.assert_array_equal(toroidal(x), x)

    def test_multiple_periods(self):
        assert toroidal(3.25) == pytest.approx(0.25, abs=1e-12)
        assert toroidal(-2.75) == pytest.approx(0.25, abs=1e-12)


class TestMirror:
    def test_hand_examples(self):
        assert mirror(-0.25) == pytest.approx(0.25, abs=1e-15)
        assert mirror(1.25) == pytest.approx(0.75, abs=1e-15)

    def test_matches_iterative_reflection(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(-25.0, 25.0, size=500)
        expected = np.array([mirror_oracle(v) for v in values])
        np.testing.assert_allclose(mirror(values), expected, atol=1e-9)

    def test_feasible_unchanged_bit_exact(self):
        x = np.array([0.0, 0.3, 1.0])
        np.testing.assert_array_equal(mirror(x), x)


class TestResample:
    def test_feasible_untouched(self):
        rng = np.random.default_rng(0)
        x = np.array([0.2, -0.5, 0.8, 1.5])
        out = resample(x, rng)
        assert out[0] == 0.2 and out[2] == 0.8
        assert 0.0 <= out[1] <= 1.0 and 0.0 <= out[3] <= 1.0

    def test_all_feasible_consumes_nothing(self):
        rng = np.random.default_rng(1)
        resample(np.array([0.1, 0.9]), rng)
        assert rng.random() == np.random.default_rng(1).random()

    def test_draw_order_row_major(self):
        rng = np.random.default_rng(2)
        x = np.array([[2.0, 0.5], [-1.0, 3.0]])
        out = resample(x, rng)
        expected = np.random.default_rng(2).random(3)
        np.testing.assert_array_equal(out[~((x >= 0) & (x <= 1))], expected)


class TestCommonProperties:
    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_result_always_feasible(self, method):
        rng = np.random.default_rng(7)
        x = rng.uniform(-10, 10, size=(50, 6))
        out = apply_correction(x, method, np.random.default_rng(8))
        assert np.all((out >= 0.0) & (out <= 1.0))

    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_input_not_mutated(self, method):
        x = np.array([-0.5, 0.5, 1.5])
        copy = x.copy()
        apply_correction(x, method, np.random.default_rng(0))
        np.testing.assert_array_equal(x, copy)

    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_feasible_passthrough_bit_exact(self, method):
        x = np.random.default_rng(3).random(100)
        out = apply_correction(x, method, np.random.default_rng(4))
        np.testing.assert_array_equal(out, x)

    def test_string_method_accepted(self):
        assert apply_correction(1.5, "Saturate") == 1.0

    def test_resample_requires_stream(self):
        with pytest.raises(ValidationError):
            apply_correction(np.array([1.5]), BoundaryCorrection.RESAMPLE)
