import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaincc

import biharmonic_lab.dynamics as dyn
from biharmonic_lab.dynamics import (
    BlowUpError,
    CapError,
    Trajectory,
    WindowError,
    band_restrict,
    concentration_points,
    duhamel_residual,
    evolve,
    exterior_mass,
    radiation_split,
    self_convergence,
    spatial_localization_report,
    splitting_error_estimate,
    verify_concentration,
)
from biharmonic_lab.field import RadialField, RadialGrid, gaussian, lq_norm
from biharmonic_lab.ground_state import soliton_orbit
from biharmonic_lab.littlewood_paley import phi
from biharmonic_lab.params import ModelParams
from biharmonic_lab.propagator import free_evolve

P_FOC = ModelParams(5, 3.0, "focusing")
P_DEF = ModelParams(5, 3.0, "defocusing")


@pytest.fixture(scope="module")
def grid():
    # wide enough that the high-k part of the width-2 Gaussian stays inside for T <= 1
    return RadialGrid(5, 80.0, 320)


class TestEvolve:
    def test_linear_path_is_free_flow(self, grid):
        u0 = gaussian(grid, 2.0)
        traj = evolve(u0, P_FOC, 1.0, 1e-2, save_every=100, nonlinear=False)
        ref = free_evolve(u0, 1.0, warn=False)
        assert np.max(np.abs(traj.states[-1].values - ref.values)) <= 1e-12

    @pytest.mark.filterwarnings("ignore::biharmonic_lab.field.TruncationWarning")
    @pytest.mark.parametrize("params", [P_FOC, P_DEF])
    def test_mass(self, grid, params):
        traj = evolve(gaussian(grid, 2.0), params, 1.0, 1e-3, save_every=100)
        assert traj.mass_drift() <= 1e-8

    def test_strang_second_order(self, grid):
        sc = self_convergence(gaussian(grid, 2.0), P_FOC, 0.5, 1e-3)
        assert sc["ratio"] == pytest.approx(4.0, rel=0.2)
        assert sc["order"] == pytest.approx(2.0, abs=0.2)

    @pytest.mark.parametrize("bad", [dict(dt=0.0), dict(dt=-1e-3), dict(T=1e-4), dict(T=0.00151)])
    def test_step_validation(self, grid, bad):
        kw = dict(T=1.0, dt=1e-3) | bad
        with pytest.raises(ValueError):
            evolve(gaussian(grid), P_FOC, kw["T"], kw["dt"])

    def test_blow_up_guard(self, grid, monkeypatch):
        # data that refocuses under the free flow; the guard threshold is lowered to catch the growth
        u0 = free_evolve(gaussian(grid, 0.7), -0.05, warn=False)
        monkeypatch.setattr(dyn, "BLOWUP_FACTOR", 2.0)
        with pytest.raises(BlowUpError) as info:
            evolve(u0, P_FOC, 0.1, 1e-3)
        part = info.value.trajectory
        assert part is not None and len(part) >= 1

    def test_save_load(self, grid, tmp_path):
        traj = evolve(gaussian(grid, 2.0), P_DEF, 0.05, 1e-2)
        traj.save(tmp_path / "run")
        back = Trajectory.load(tmp_path / "run")
        assert np.array_equal(back.times, traj.times)
        assert back.params == P_DEF
        for a, b in zip(back.states, traj.states):
            assert np.array_equal(a.values, b.values)

    def test_subsample_is_uniform_stride(self, grid):
        traj = evolve(gaussian(grid, 2.0), P_DEF, 0.1, 1e-2)
        sub = traj.subsample(3)
        assert np.array_equal(sub.times, traj.times[::3])
        assert sub.dt == traj.dt


class TestDuhamel:
    def test_free_trajectory(self, grid):
        traj = evolve(gaussian(grid, 2.0), P_FOC, 1.0, 1e-2, nonlinear=False)
        assert duhamel_residual(traj) <= 1e-10

    def test_nonlinear_within_splitting_bound(self, grid):
        u0 = gaussian(grid, 2.0)
        traj = evolve(u0, P_FOC, 0.5, 1e-3)
        assert duhamel_residual(traj) <= 10 * splitting_error_estimate(u0, P_FOC, 0.5, 1e-3)

    def test_needs_three_states(self, grid):
        traj = evolve(gaussian(grid), P_FOC, 1e-2, 1e-2)
        with pytest.raises(ValueError):
            duhamel_residual(traj)


def orbit_trajectory(Q, T, dt, params=P_FOC):
    times = np.round(np.arange(0, T + dt / 2, dt), 12)
    return Trajectory(params, times, [soliton_orbit(Q, t) for t in times], dt)


class TestRadiationSplit:
    @pytest.mark.filterwarnings("ignore::biharmonic_lab.field.TruncationWarning")
    def test_linear_trajectory(self, grid):
        u0 = gaussian(grid, 2.0)
        traj = evolve(u0, P_FOC, 2.0, 1e-2, nonlinear=False)
        d = radiation_split(traj)
        assert np.max(d.v_norms(0)) <= 1e-8
        assert lq_norm(d.u_plus - u0, 2) <= 1e-8
        assert d.identity_defect <= 1e-12
        assert d.window_sensitivity <= 1e-8

    def test_soliton_is_nonradiative(self, ground_state):
        traj = orbit_trajectory(ground_state.Q, 20.0, 0.01)
        d = radiation_split(traj)
        assert lq_norm(d.u_plus, 2) <= 0.1 * lq_norm(ground_state.Q, 2)
        assert np.isfinite(d.window_sensitivity)

    def test_window_validation(self, grid):
        traj = evolve(gaussian(grid, 2.0), P_FOC, 1.0, 1e-2, nonlinear=False)
        with pytest.raises(WindowError):
            radiation_split(traj, (0.5, 1.5))
        with pytest.raises(WindowError):
            radiation_split(traj, (0.5, 0.55))
        with pytest.raises(WindowError):
            radiation_split(traj, (0.5, 1.0), probe_times=[0.123456])


def bumps(grid, centers, height, width=0.05):
    return RadialField.from_function(grid, lambda r: height * sum((np.exp(-((r - x) ** 2) / (2 * width**2)) for x in centers), np.zeros_like(r)))


@pytest.fixture(scope="module")
def cgrid():
    return RadialGrid(5, 30.0, 512)


class TestConcentration:
    mu3, c = 0.5, 1.0

    def test_zero_field(self, cgrid):
        cs = concentration_points(RadialField(cgrid, np.zeros(512)), self.mu3, self.c)
        assert cs.J == 0
        assert verify_concentration(RadialField(cgrid, np.zeros(512)), cs)["maximal"]

    def test_single_bump(self, cgrid):
        vN = band_restrict(bumps(cgrid, [5.0], 2 * self.mu3**self.c), 64)
        cs = concentration_points(vN, self.mu3, self.c)
        assert cs.J == 1
        assert abs(cs.points[0] - 5.0) <= cgrid.spacing

    def test_two_bumps(self, cgrid):
        centers = [5.0, 5.0 + 3 / self.mu3]
        vN = band_restrict(bumps(cgrid, centers, 2 * self.mu3**self.c), 64)
        cs = concentration_points(vN, self.mu3, self.c)
        chk = verify_concentration(vN, cs)
        assert cs.J == 2
        assert chk["separation_ok"] and chk["maximal"]
        for x in centers:
            assert min(abs(p - x) for p in cs.points) <= cgrid.spacing

    def test_cap(self, cgrid):
        centers = list(np.arange(2.0, 28.0, 1.5))
        v = bumps(cgrid, centers, 1.0)
        with pytest.raises(CapError):
            concentration_points(v, 0.9, 1.0, cap_exponent=1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 0.9), st.floats(0.2, 3.0))
    def test_invariants_on_random_fields(self, seed, mu3, c):
        g = RadialGrid(5, 30.0, 256)
        rng = np.random.default_rng(seed)
        centers = rng.uniform(1, 28, rng.integers(0, 6))
        v = bumps(g, centers, rng.uniform(0, 2), width=0.3)
        cs = concentration_points(v, mu3, c, cap_exponent=np.inf)
        chk = verify_concentration(v, cs)
        assert chk["separation_ok"] and chk["maximal"]

    @pytest.mark.parametrize("mu3,c", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
    def test_parameter_validation(self, cgrid, mu3, c):
        with pytest.raises(ValueError):
            concentration_points(gaussian(cgrid), mu3, c)


class TestLocalization:
    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
    def test_gaussian_tail(self, R):
        # |v|^2 = e^{-r^2}: mass beyond R is pi^{5/2} Q(5/2, R^2) in five dimensions
        v = gaussian(RadialGrid(5, 15.0, 256))
        ref = np.pi**2.5 * gammaincc(2.5, R * R)
        assert exterior_mass(v, [0.0], R) == pytest.approx(ref, rel=1e-6)

    def test_compact_support(self):
        g = RadialGrid(5, 10.0, 256)
        v = RadialField.from_function(g, lambda r: phi(r))
        assert exterior_mass(v, [0.0], 3.0) <= 1e-8 * exterior_mass(v, [0.0], 0.0)

    def test_report_nonincreasing(self):
        v = gaussian(RadialGrid(5, 15.0, 256))
        rep = spatial_localization_report(v, [0.0, 4.0], [0.25, 0.5, 1.0, 2.0, 4.0])
        assert rep.passed
        assert rep.columns["exterior_mass"][-1] < rep.columns["exterior_mass"][0]

    def test_radii_sorted(self):
        v = gaussian(RadialGrid(5, 15.0, 256))
        with pytest.raises(ValueError):
            spatial_localization_report(v, [0.0], [2.0, 1.0])
