"""Standing-wave profile Q with Lap^2 Q + Q = |Q|^{p-1} Q, by Petviashvili iteration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import RadialField, RadialGrid, SpectralField, inverse_radial_fourier, radial_fourier, sphere_area
from .params import ModelParams


class DivergenceError(RuntimeError):
    pass


class MaxIterationError(RuntimeError):
    pass


@dataclass
class GroundStateResult:
    Q: RadialField
    residual: float
    multiplier_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    iterations: int = 0
    seed_description: str = ""
    spectrum: np.ndarray | None = None  # the converged frequency-space iterate

    @property
    def multiplier(self) -> float:
        return self.multiplier_history[-1]


def default_seed(grid: RadialGrid) -> RadialField:
    """e^{-r^2} scaled to unit L^2."""
    g = RadialField.from_function(grid, lambda r: np.exp(-r * r))
    return g * (1 / np.sqrt(_inner(g.values, g.values, grid).real))


def _inner(a, b, grid: RadialGrid, spectral: bool = False) -> complex:
    w = grid.kweights if spectral else grid.weights
    x = grid.knodes if spectral else grid.nodes
    return sphere_area(grid.n) * np.sum(w * a * np.conj(b) * x ** (grid.n - 2))


def _nonlinearity(q: np.ndarray, p: float) -> np.ndarray:
    return np.abs(q) ** (p - 1) * q


def equation_residual(Q: RadialField, p: float) -> float:
    """||Lap^2 Q + Q - |Q|^{p-1}Q||_2 evaluated in frequency space.

    Starting from samples of Q this carries a roundoff floor of about eps ||Q|| k_max^4.
    """
    g = Q.grid
    F = radial_fourier(Q)
    N = radial_fourier(Q.with_values(_nonlinearity(Q.values, p)))
    r = (F.k**4 + 1) * F.values - N.values
    return float(np.sqrt(_inner(r, r, g, spectral=True).real))


def fixed_point_residual(Q: RadialField, p: float) -> float:
    """||Q - (Lap^2 + 1)^{-1} |Q|^{p-1}Q||_2: the same equation tested through the inverse operator."""
    N = radial_fourier(Q.with_values(_nonlinearity(Q.values, p)))
    Qn = inverse_radial_fourier(N.with_values(N.values / (N.k**4 + 1)))
    d = Q.values - Qn.values
    return float(np.sqrt(_inner(d, d, Q.grid).real))


def default_grid(n: int) -> RadialGrid:
    """r_max = 40 holds the exponential tail below roundoff; k_max ~ 12.7 resolves Q_hat to ~1e-13."""
    return RadialGrid(n, 40.0, 160)


def petviashvili_solve(
    params: ModelParams,
    grid: RadialGrid | None = None,
    seed: RadialField | None = None,
    tol: float = 1e-11,
    max_iter: int = 500,
) -> GroundStateResult:
    """Iterate Q_hat <- M^gamma N_hat / (k^4 + 1), M = <(k^4+1) Q_hat, Q_hat> / <N_hat, Q_hat>.

    gamma = p / (p - 1). Stops when the equation residual drops below tol.
    """
    if grid is None:
        grid = default_grid(params.n)
    if grid.n != params.n:
        raise ValueError("grid dimension does not match params")
    if seed is None:
        seed = default_seed(grid)
        desc = "gaussian exp(-r^2), unit L2"
    else:
        desc = "user"
    if not np.any(seed.values != 0):
        raise ValueError("seed must be nonzero")
    p = params.p
    gamma = p / (p - 1)
    L = grid.knodes**4 + 1
    # M(lam Q) = M(Q) / lam^{p-1}: rescale the seed so the first factor is 1
    q = radial_fourier(seed.with_values(seed.values.real)).values
    N0 = radial_fourier(seed.with_values(_nonlinearity(seed.values.real, p))).values
    M0 = (_inner(L * q, q, grid, True) / _inner(N0, q, grid, True)).real
    if not (np.isfinite(M0) and M0 > 0):
        raise DivergenceError("seed has no positive stabilizing factor")
    q = q * M0 ** (1 / (p - 1))
    Ms, res = [], []
    spectrum = radial_fourier(seed)
    for it in range(1, max_iter + 1):
        # the iterate lives in frequency space; Q is only formed to evaluate the nonlinearity
        Q = inverse_radial_fourier(spectrum.with_values(q))
        Q = Q.with_values(Q.values.real)
        N = radial_fourier(Q.with_values(_nonlinearity(Q.values, p))).values
        M = (_inner(L * q, q, grid, True) / _inner(N, q, grid, True)).real
        if not (0.1 <= M <= 10) or not np.isfinite(M):
            raise DivergenceError(f"stabilizing factor left [0.1, 10] at iteration {it}: {M}")
        Ms.append(float(M))
        resid = np.sqrt(_inner(L * q - N, L * q - N, grid, True).real)
        res.append(float(resid))
        if resid <= tol:
            return GroundStateResult(Q, float(resid), Ms, res, it, desc, q.copy())
        q = M**gamma * N / L
    raise MaxIterationError(f"no convergence in {max_iter} iterations (residual {res[-1]:.3e})")


def soliton_orbit(Q: RadialField, t: float) -> RadialField:
    """e^{-it} Q."""
    return Q * np.exp(-1j * t)


def orbit_residual(result: GroundStateResult, p: float, t: float) -> float:
    """||i d_t u + Lap^2 u - |u|^{p-1} u||_2 for u = e^{-it}Q, with d_t u = -i u taken exactly.

    Evaluated in frequency space from the converged spectrum, like the solver residual.
    """
    grid = result.Q.grid
    q = result.spectrum if result.spectrum is not None else radial_fourier(result.Q).values
    uh = np.exp(-1j * t) * q
    u = inverse_radial_fourier(SpectralField(grid, uh)).values
    N = radial_fourier(RadialField(grid, _nonlinearity(u, p))).values
    r = uh + grid.knodes**4 * uh - N
    return float(np.sqrt(_inner(r, r, grid, True).real))
