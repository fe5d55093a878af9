import numpy as np
import pytest
from scipy.signal import argrelmax

from biharmonic_lab.field import RadialField, RadialGrid, field_from_csv, field_to_csv, lq_norm
from biharmonic_lab.ground_state import (
    DivergenceError,
    MaxIterationError,
    equation_residual,
    fixed_point_residual,
    orbit_residual,
    petviashvili_solve,
    soliton_orbit,
)
from biharmonic_lab.params import ModelParams


class TestSolver:
    def test_converged(self, ground_state):
        assert ground_state.residual <= 1e-10
        assert abs(ground_state.multiplier - 1) <= 1e-10
        assert ground_state.seed_description.startswith("gaussian")

    def test_dual_residual(self, ground_state):
        # Q against (k^4 + 1)^{-1} applied to the nonlinearity, on the sampled profile
        assert fixed_point_residual(ground_state.Q, 3.0) <= 1e-9

    def test_sampled_equation_residual(self, ground_state):
        # the direct form amplifies roundoff by k_max^4, so only a loose bound holds
        assert equation_residual(ground_state.Q, 3.0) <= 1e-7

    def test_residual_monotone_at_end(self, ground_state):
        tail = np.array(ground_state.residual_history[-10:])
        assert np.all(np.diff(tail) < 0)

    def test_grid_doubling(self, ground_state, focusing_params):
        fine = petviashvili_solve(focusing_params, RadialGrid(5, 40.0, 320))
        a, b = lq_norm(ground_state.Q, 2), lq_norm(fine.Q, 2)
        assert abs(a - b) <= 1e-6 * a

    def test_sign_change(self, ground_state):
        q = ground_state.Q.values.real
        assert np.any(q > 0) and np.any(q < 0)

    def test_exponential_envelope(self, ground_state):
        Q = ground_state.Q
        r = np.linspace(4, 18, 3000)
        a = np.abs(Q.evaluate(r))
        peaks = argrelmax(a)[0]
        assert peaks.size >= 3
        slope, icpt = np.polyfit(r[peaks], np.log(a[peaks]), 1)
        pred = slope * r[peaks] + icpt
        ss = np.sum((np.log(a[peaks]) - pred) ** 2) / np.sum((np.log(a[peaks]) - np.log(a[peaks]).mean()) ** 2)
        assert slope < 0
        assert 1 - ss >= 0.99

    def test_zero_seed_rejected(self, focusing_params):
        g = RadialGrid(5, 40.0, 160)
        with pytest.raises(ValueError):
            petviashvili_solve(focusing_params, g, seed=RadialField(g, np.zeros(160)))

    def test_iteration_cap(self, focusing_params):
        with pytest.raises(MaxIterationError):
            petviashvili_solve(focusing_params, max_iter=3)

    def test_divergence_detected(self, focusing_params):
        g = RadialGrid(5, 40.0, 160)
        seed = RadialField.from_function(g, lambda r: np.sin(3 * r) * np.exp(-r * r))
        try:
            res = petviashvili_solve(focusing_params, g, seed=seed, max_iter=200)
        except (DivergenceError, MaxIterationError):
            return
        assert res.residual <= 1e-11

    def test_grid_dimension_checked(self, focusing_params):
        with pytest.raises(ValueError):
            petviashvili_solve(focusing_params, RadialGrid(6, 40.0, 160))

    def test_csv_round_trip(self, ground_state, tmp_path):
        field_to_csv(ground_state.Q, tmp_path / "Q.csv")
        assert np.array_equal(field_from_csv(tmp_path / "Q.csv").values, ground_state.Q.values)

    @pytest.mark.parametrize("n,p", [(6, 3.0), (7, 3.0)])
    def test_other_dimensions(self, n, p):
        res = petviashvili_solve(ModelParams(n, p))
        assert res.residual <= 1e-10


class TestOrbit:
    @pytest.mark.parametrize("t", [0.0, 0.7, 3.0, 100.0])
    def test_modulus_invariant(self, ground_state, t):
        Q = ground_state.Q
        assert np.max(np.abs(np.abs(soliton_orbit(Q, t).values) - np.abs(Q.values))) <= 1e-14

    def test_periodic(self, ground_state):
        Q = ground_state.Q
        assert np.max(np.abs(soliton_orbit(Q, 2 * np.pi).values - Q.values)) <= 1e-14

    @pytest.mark.parametrize("t", [0.0, 1.0, 4.0])
    def test_substitution(self, ground_state, t):
        # the orbit solves the equation up to the converged residual (roundoff slack 10%)
        assert orbit_residual(ground_state, 3.0, t) <= 1.1 * ground_state.residual
