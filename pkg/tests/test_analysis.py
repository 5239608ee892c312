import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmfo.analysis import (
    HIGH_GAIN_RATIO,
    IN_FORMATION_FRACTION,
    formation_error_curve,
    formation_residual,
    gain_ratio,
    optimal_configuration,
    optimal_configuration_lu,
    shrink_factor,
    steady_state_report,
    target_distance,
)
from swarmfo.controller import GainConfig, cost_gradient, hessian
from swarmfo.graph import build_spec, desired_configuration, laplacian
from swarmfo.scenarios import PENTAGON_TARGET, pentagon_spec

from helpers import eigen_form_r_inf, random_gains, random_spec

TWO = build_spec([[1], [-1]], [(2.0, 0.0)])


class TestOptimalConfiguration:
    def test_zero_displacements(self, rng):
        spec = build_spec([[1, 0, 1], [-1, 1, 0], [0, -1, -1]], np.zeros((3, 2)))
        for _ in range(5):
            gains = random_gains(rng)
            r = optimal_configuration(spec, gains, (2.0, -3.0))
            assert np.allclose(r, np.tile([2.0, -3.0], 3), atol=1e-12)

    def test_two_agents(self):
        r = optimal_configuration(TWO, GainConfig(1, 1, 1), (0, 0))
        assert np.allclose(r, [2 / 3, 0, -2 / 3, 0], atol=1e-14)

    def test_stationary_on_random_specs(self, rng):
        for _ in range(50):
            spec = random_spec(rng)
            gains = random_gains(rng)
            q = rng.normal(scale=10, size=2)
            r = optimal_configuration(spec, gains, q)
            assert np.linalg.norm(cost_gradient(r, spec, gains, q)) <= 1e-9 * (1 + np.linalg.norm(r))

    def test_two_solvers_agree(self, rng):
        for _ in range(50):
            spec = random_spec(rng)
            gains = random_gains(rng)
            q = rng.normal(scale=10, size=2)
            a = optimal_configuration(spec, gains, q)
            b = optimal_configuration_lu(spec, gains, q)
            assert np.max(np.abs(a - b)) <= 1e-10 * (1 + np.abs(a).max())

    def test_eigen_form(self, rng):
        for _ in range(50):
            spec = random_spec(rng)
            gains = random_gains(rng)
            q = rng.normal(scale=10, size=2)
            a = optimal_configuration(spec, gains, q)
            assert np.allclose(a, eigen_form_r_inf(spec, gains, q), rtol=0, atol=1e-9 * (1 + np.abs(a).max()))

    def test_filter_spectrum(self, rng):
        spec = random_spec(rng, n_min=4)
        gains = random_gains(rng)
        filt = gains.b * np.linalg.inv(hessian(spec, gains))
        lam = laplacian(spec).eigenvalues
        expected = np.sort(np.repeat(gains.b / (gains.a * lam + gains.b), 2))
        assert np.allclose(np.linalg.eigvalsh(filt), expected, atol=1e-12)


class TestReport:
    def test_two_agents(self):
        rep = steady_state_report(TWO, GainConfig(1, 1, 1), (0, 0))
        assert rep.shrink_factor == pytest.approx(2 / 3, abs=1e-14)
        assert rep.target_distance == pytest.approx(np.sqrt(8) / 3, abs=1e-14)
        assert rep.d_q_norm == pytest.approx(np.sqrt(2), abs=1e-14)
        assert rep.gain_ratio == pytest.approx(2.0)
        assert rep.formation_residual == pytest.approx(2 / 3, abs=1e-14)

    def test_zero_displacements(self):
        spec = build_spec([[1], [-1]], [(0.0, 0.0)])
        rep = steady_state_report(spec, GainConfig(1, 1, 1), (1, 1))
        assert rep.target_distance == pytest.approx(0.0, abs=1e-14)
        assert rep.d_q_norm == 0.0
        assert rep.in_formation

    def test_pentagon_high_gain(self):
        rep = steady_state_report(pentagon_spec(), GainConfig(5, 0.1, 1), PENTAGON_TARGET)
        assert rep.target_distance < rep.d_q_norm
        assert rep.shrink_factor == pytest.approx(25 / 25.1, rel=1e-12)
        assert rep.gain_ratio == pytest.approx(5 * (3 - np.sqrt(2)) / 0.1, rel=1e-12)
        assert rep.in_formation

    def test_to_dict(self):
        d = steady_state_report(TWO, GainConfig(1, 1, 1), (0, 0)).to_dict()
        assert d["in_formation"] is False
        assert len(d["r_inf"]) == 4

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_shrinkage_bound(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng)
        gains = random_gains(rng)
        q = rng.normal(scale=10, size=2)
        rep = steady_state_report(spec, gains, q)
        _, d_q = desired_configuration(spec, q)
        assert np.linalg.norm(d_q) > 0
        assert rep.target_distance < rep.d_q_norm
        assert rep.target_distance <= rep.shrink_factor * rep.d_q_norm + 1e-10
        assert 0 <= rep.shrink_factor < 1
        assert rep.shrink_factor == pytest.approx(gains.a * laplacian(spec).lambda_max / (gains.a * laplacian(spec).lambda_max + gains.b))

    def test_helpers(self):
        gains = GainConfig(1, 1, 1)
        r = optimal_configuration(TWO, gains, (0, 0))
        assert formation_residual(r, TWO) == pytest.approx(2 / 3)
        assert target_distance(r, (0, 0)) == pytest.approx(np.sqrt(8) / 3)
        assert shrink_factor(TWO, gains) == pytest.approx(2 / 3)
        assert gain_ratio(TWO, gains) == pytest.approx(2.0)


class TestCurve:
    def test_decades(self):
        spec = pentagon_spec()
        a_values = [10.0**e for e in range(-2, 5)]
        pts = formation_error_curve(spec, PENTAGON_TARGET, 0.1, a_values)
        res = [p.formation_residual for p in pts]
        assert all(x > y for x, y in zip(res, res[1:]))
        # deep in the high-gain regime the residual scales like 1/a
        assert res[-2] / res[-1] == pytest.approx(10.0, rel=0.01)
        assert [p.high_gain_regime for p in pts] == [p.gain_ratio >= HIGH_GAIN_RATIO for p in pts]

    def test_constant_sequence(self):
        pts = formation_error_curve(pentagon_spec(), PENTAGON_TARGET, 0.1, [2.0, 2.0, 2.0])
        assert len({p.formation_residual for p in pts}) == 1

    @pytest.mark.parametrize("a_values", [[1.0, 0.5], [0.0, 1.0], [-1.0]])
    def test_bad_sequences(self, a_values):
        with pytest.raises(ValueError):
            formation_error_curve(pentagon_spec(), PENTAGON_TARGET, 0.1, a_values)

    def test_threshold_constants(self):
        assert IN_FORMATION_FRACTION == 0.02
        assert HIGH_GAIN_RATIO == 30
