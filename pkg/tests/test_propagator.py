import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from biharmonic_lab.field import RadialField, RadialGrid, SpectralField, gaussian, inverse_radial_fourier, lq_norm, sphere_area
from biharmonic_lab.littlewood_paley import psi
from biharmonic_lab.params import INF, exponents_for
from biharmonic_lab.propagator import (
    AdmissibilityError,
    PropagatorJob,
    dispersive_fit,
    free_evolve,
    localized_profile,
    strichartz_norm,
)
from biharmonic_lab.report import FitError


@pytest.fixture(scope="module")
def grid():
    return RadialGrid(5, 30.0, 256)


class TestFreeEvolve:
    def test_identity_at_zero(self, grid):
        f = gaussian(grid)
        assert np.max(np.abs(free_evolve(f, 0.0).values - f.values)) <= 1e-14

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_unitary(self, grid, t):
        f = gaussian(grid)
        assert lq_norm(free_evolve(f, t, warn=False), 2) == pytest.approx(lq_norm(f, 2), rel=1e-10)

    def test_group_law(self, grid):
        f = gaussian(grid)
        a = free_evolve(free_evolve(f, 0.3), 0.45)
        b = free_evolve(f, 0.75)
        assert np.max(np.abs(a.values - b.values)) <= 1e-10

    def test_sign_convention(self, grid):
        # i u_t + Lap^2 u = 0 gives u_hat(t) = e^{itk^4} u_hat(0)
        k = grid.knodes
        F0 = np.exp(-(k**2))
        u = free_evolve(inverse_radial_fourier(SpectralField(grid, F0)), 0.2)
        from biharmonic_lab.field import radial_fourier

        assert np.max(np.abs(radial_fourier(u).values - np.exp(0.2j * k**4) * F0)) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
    def test_unitary_random(self, seed, t):
        rng = np.random.default_rng(seed)
        g = RadialGrid(5, 30.0, 128)
        k = g.knodes
        F = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) * np.exp(-(k**2))
        f = inverse_radial_fourier(SpectralField(g, F))
        assert lq_norm(free_evolve(f, t, warn=False), 2) == pytest.approx(lq_norm(f, 2), rel=1e-10)

    def test_truncation_warning(self):
        from biharmonic_lab.field import TruncationWarning

        f = gaussian(RadialGrid(5, 10.0, 128), 0.5)
        with pytest.warns(TruncationWarning):
            free_evolve(f, 5.0)


class TestDispersiveFit:
    @pytest.mark.parametrize(
        "n,alpha",
        [(5, 0), (5, 1), (5, 2), (7, 0), (7, 1), (7, 2), (9, 0), (9, 1), (9, 2)],
    )
    def test_slope(self, n, alpha):
        f = gaussian(RadialGrid(n, 8.0, 256), 0.5, l1_normalized=True)
        rep = dispersive_fit(PropagatorJob(f, np.geomspace(1, 1000, 20), alpha))
        assert rep.fit["slope"] == pytest.approx(-(n + alpha) / 4, abs=0.05)
        assert rep.passed

    def test_short_span(self):
        f = gaussian(RadialGrid(5, 8.0, 256), 0.5, l1_normalized=True)
        with pytest.raises(FitError):
            dispersive_fit(PropagatorJob(f, [1.0, 2.0, 5.0]))

    def test_job_validation(self):
        f = gaussian(RadialGrid(5, 8.0, 256), 0.5)
        with pytest.raises(ValueError):
            PropagatorJob(f, [2.0, 1.0])
        with pytest.raises(ValueError):
            PropagatorJob(f, [0.0, 1.0])
        with pytest.raises(ValueError):
            PropagatorJob(f, [1.0, 2.0], -1)

    def test_data_must_fit_domain(self):
        f = gaussian(RadialGrid(5, 3.0, 128), 1.0, l1_normalized=True)
        with pytest.raises(ValueError):
            dispersive_fit(PropagatorJob(f, np.geomspace(1, 1000, 5)))


class TestLocalized:
    @pytest.mark.parametrize("K", [1.0, 2.0, 4.0])
    def test_sup_at_time_zero(self, K):
        w = 0.02
        f = gaussian(RadialGrid(5, 0.5, 256), w, l1_normalized=True)
        prof = localized_profile(f, K, 0.0)
        # P_K f has a nonnegative transform, so its sup sits at the origin
        ref = (2 * np.pi) ** -5 * sphere_area(5) * quad(
            lambda k: psi(k / K) * np.exp(-(w * k) ** 2 / 2) * k**4, K / 2, 2 * K, epsabs=0, epsrel=1e-13
        )[0]
        assert prof["r_at"] == 0.0
        assert prof["sup"] == pytest.approx(ref, rel=1e-8)


class TestStrichartz:
    def _free_traj(self, f, T, m=401):
        return [(t, free_evolve(f, t, warn=False)) for t in np.linspace(0, T, m)]

    def test_energy_pair_is_mass(self):
        f = gaussian(RadialGrid(5, 30.0, 256))
        assert strichartz_norm(self._free_traj(f, 1.0, 21), INF, 2) == pytest.approx(lq_norm(f, 2), rel=1e-8)

    @given(st.floats(-100, 100).filter(lambda x: abs(x) > 1e-50))
    @settings(max_examples=20, deadline=None)
    def test_homogeneity(self, lam):
        f = gaussian(RadialGrid(5, 30.0, 128))
        traj = self._free_traj(f, 0.5, 11)
        scaled = [(t, u * lam) for t, u in traj]
        d = exponents_for(5, 3.0, 1e-3)
        assert strichartz_norm(scaled, d.q0, d.r0) == pytest.approx(abs(lam) * strichartz_norm(traj, d.q0, d.r0), rel=1e-12)

    def test_rejects_inadmissible(self):
        traj = self._free_traj(gaussian(RadialGrid(5, 30.0, 128)), 0.1, 3)
        with pytest.raises(AdmissibilityError):
            strichartz_norm(traj, 2, INF)
        with pytest.raises(AdmissibilityError):
            strichartz_norm(traj, 3, 3)

    def test_dilation_invariance(self):
        # u_lam(t, r) = lam^{n/2} u(lam^4 t, lam r) leaves the admissible norm unchanged
        n = 8
        d = exponents_for(n, 2.0, 1e-3)
        g = RadialGrid(n, 30.0, 512)
        f = gaussian(g, 1.0)
        f2 = RadialField.from_function(g, lambda r: 2 ** (n / 2) * np.exp(-((2 * r) ** 2) / 2))
        T = 0.5
        a = strichartz_norm(self._free_traj(f, T), d.q0, d.r0) / lq_norm(f, 2)
        b = strichartz_norm(self._free_traj(f2, T / 16), d.q0, d.r0) / lq_norm(f2, 2)
        assert b == pytest.approx(a, rel=0.1)
        assert lq_norm(f2, 2) == pytest.approx(lq_norm(f, 2), rel=1e-10)

    def test_unsorted(self):
        traj = self._free_traj(gaussian(RadialGrid(5, 30.0, 128)), 0.1, 3)[::-1]
        with pytest.raises(ValueError):
            strichartz_norm(traj, INF, 2)
