"""f0 objective: fresh-draw semantics, domain contract, hash variant."""

import numpy as np
import pytest

from structbias.errors import ValidationError
from structbias.f0 import HashDeterministicF0, f0_eval


class TestF0Eval:
    def test_same_stream_state_same_value(self):
        x = np.array([0.3, 0.7])
        a = f0_eval(x, np.random.default_rng(11))
        b = f0_eval(np.array([0.9, 0.1]), np.random.default_rng(11))
        assert a == b  # value depends on the stream alone, not on x

    def test_consumes_exactly_one_draw(self):
        stream = np.random.default_rng(3)
        values = [f0_eval(np.array([0.5]), stream) for _ in range(5)]
        assert values == list(np.random.default_rng(3).random(5))

    def test_reevaluation_gives_fresh_value(self):
        stream = np.random.default_rng(0)
        x = np.array([0.5, 0.5])
        assert f0_eval(x, stream) != f0_eval(x, stream)

    def test_empirical_mean(self):
        # averaging oracle: 10^6 draws, SE = 1/sqrt(12e6) ~ 2.9e-4
        stream = np.random.default_rng(202)
        x = np.array([0.5])
        total = sum(f0_eval(x, stream) for _ in range(1_000_000))
        assert abs(total / 1e6 - 0.5) < 0.002

    def test_out_of_domain_rejected(self):
        stream = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            f0_eval(np.array([0.5, 1.2]), stream)
        with pytest.raises(ValidationError):
            f0_eval(np.array([-0.01]), stream)

    def test_non_finite_rejected(self):
        stream = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            f0_eval(np.array([np.nan]), stream)
        with pytest.raises(ValidationError):
            f0_eval(np.array([np.inf]), stream)

    def test_matrix_input_rejected(self):
        with pytest.raises(ValidationError):
            f0_eval(np.zeros((2, 2)), np.random.default_rng(0))

    def test_boundary_points_accepted(self):
        value = f0_eval(np.array([0.0, 1.0]), np.random.default_rng(0))
        assert 0.0 <= value < 1.0


class TestHashDeterministicF0:
    def test_fixed_per_point(self):
        f = HashDeterministicF0(key=4)
        x = np.array([0.25, 0.75])
        assert f(x) == f(x)

    def test_distinct_points_differ(self):
        f = HashDeterministicF0(key=4)
        assert f(np.array([0.25])) != f(np.array([0.26]))

    def test_key_changes_function(self):
        x = np.array([0.5])
        assert HashDeterministicF0(key=1)(x) != HashDeterministicF0(key=2)(x)

    def test_does_not_consume_stream(self):
        stream = np.random.default_rng(9)
        HashDeterministicF0()(np.array([0.5]), stream)
        assert stream.random() == np.random.default_rng(9).random()

    def test_domain_contract(self):
        with pytest.raises(ValidationError):
            HashDeterministicF0()(np.array([1.0001]))

    def test_values_roughly_uniform(self):
        f = HashDeterministicF0(key=0)
        grid = np.linspace(0.0, 1.0, 4001)
        values = np.array([f(np.array([g])) for g in grid])
        assert np.all((values >= 0.0) & (values < 1.0))
        assert abs(values.mean() - 0.5) < 0.02
        assert abs(np.mean(values < 0.25) - 0.25) < 0.03
