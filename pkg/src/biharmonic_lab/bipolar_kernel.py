"""Bipolar coordinates (rho, sigma) = (|x|, |x - z|) and the two-point kernel K.

Volume element: dx = |S^{n-2}| (rho sigma / |z|) h^{n-3} drho dsigma, where h = 2A/|z| is the
distance from x to the axis through 0 and z and A is the area of the triangle (0, x, z).

Quadrature: composite Gauss-Legendre in rho; for each rho the admissible sigma interval
[|rho - |z||, rho + |z|] is mapped by sigma = c - w cos(theta). Both ends of that interval
lie on the boundary of the region, where the integrand vanishes like a square-root power;
in theta the integrand is smooth.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .field import sphere_area
from .littlewood_paley import phi as bump
from .oscillatory import C4, FundSolTable, cached_table, eval_I
from .report import ExperimentReport, FitError, fit_power_law

HERON_TOL = 1e-14
REGION_THRESHOLD = 10.0


class DomainError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class TableCoverageError(ValueError):
    pass


class Region(str, enum.Enum):
    RA = "Ra"
    RB = "Rb"
    SIDE1 = "side1"  # rho - sigma = |z|
    SIDE2 = "side2"  # rho + sigma = |z|
    SIDE3 = "side3"  # sigma - rho = |z|
    OUTSIDE = "outside"


@dataclass(frozen=True)
class BipolarPoint:
    rho: float
    sigma: float

    def __post_init__(self):
        if self.rho < 0 or self.sigma < 0:
            raise DomainError("bipolar coordinates are distances and must be >= 0")


def _heron_factors(rho, sigma, z_norm):
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = float(z_norm)
    scale = rho + sigma + d
    f2 = rho + sigma - d
    f3 = rho - sigma + d
    f4 = -rho + sigma + d
    return scale, f2, f3, f4


def heron_area(rho, sigma, z_norm):
    """Area of the triangle with side lengths rho, sigma, |z|.

    Factors within HERON_TOL * perimeter of zero are set to exactly zero, so points on any
    of the three degenerate sides get area 0.0. Raises DomainError outside the region.
    """
    if not z_norm > 0:
        raise DomainError("|z| must be positive")
    scale, f2, f3, f4 = _heron_factors(rho, sigma, z_norm)
    tol = HERON_TOL * scale
    if np.any(f2 < -tol) or np.any(f3 < -tol) or np.any(f4 < -tol):
        raise DomainError("side lengths violate the triangle inequality")
    f2, f3, f4 = (np.where(np.abs(f) <= tol, 0.0, f) for f in (f2, f3, f4))
    area = 0.25 * np.sqrt(scale * f2 * f3 * f4)
    return float(area) if area.ndim == 0 else area


@dataclass(frozen=True)
class TriangleGeometry:
    rho: float
    sigma: float
    z_norm: float

    @property
    def area(self) -> float:
        return heron_area(self.rho, self.sigma, self.z_norm)

    @property
    def axis_distance(self) -> float:
        """Distance of x from the line through 0 and z."""
        return 2 * self.area / self.z_norm


def classify_region(p: BipolarPoint, z_norm: float, threshold: float = REGION_THRESHOLD, tol: float = 1e-12) -> Region:
    """Ra (both distances >= threshold * |z|), Rb (rest of the interior), a boundary side, or outside."""
    scale, f2, f3, f4 = (float(v) for v in _heron_factors(p.rho, p.sigma, z_norm))
    t = tol * scale
    if min(f2, f3, f4) < -t:
        return Region.OUTSIDE
    if abs(f4) <= t:
        return Region.SIDE1
    if abs(f2) <= t:
        return Region.SIDE2
    if abs(f3) <= t:
        return Region.SIDE3
    if p.rho >= threshold * z_norm and p.sigma >= threshold * z_norm:
        return Region.RA
    return Region.RB


# ---------------------------------------------------------------- quadrature


def _graded_edges(a: float, b: float, h: float, levels: int) -> np.ndarray:
    """Panel edges on [a, b]: uniform of size <= h, geometrically refined toward both ends."""
    L = b - a
    m = max(2, int(np.ceil(L / h)))
    u = np.linspace(0, 1, m + 1)
    g = [2.0**-k / m for k in range(levels, 0, -1)]
    u = np.union1d(u, np.concatenate([g, 1 - np.array(g)]))
    return a + L * u


def _panel_nodes(edges, order):
    x, w = leggauss(order)
    edges = np.asarray(edges, dtype=float)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


@dataclass(frozen=True)
class BipolarRule:
    """Tensor-product nodes (rho, sigma) with weights that include the full volume element."""

    rho: np.ndarray
    sigma: np.ndarray
    weight: np.ndarray

    def integrate(self, f: Callable) -> complex:
        vals = f(self.rho, self.sigma)
        return np.sum(self.weight * vals)


def _rho_nodes(z_norm, rho_max, sigma_max, resolution, rho_step, order, rho_breaks):
    d = float(z_norm)
    breaks = {0.0, float(rho_max), d}
    if np.isfinite(sigma_max):
        breaks |= {sigma_max - d, sigma_max + d, d - sigma_max}
    breaks |= {float(b) for b in rho_breaks}
    breaks = sorted(b for b in breaks if 0 <= b <= rho_max)
    h = rho_step / 2**resolution
    edges = np.unique(np.concatenate([_graded_edges(a, b, h, 6) for a, b in zip(breaks[:-1], breaks[1:]) if b > a]))
    return _panel_nodes(edges, order)


def _rule_for(rho, wr, d, n, sigma_max, theta_panels, order):
    lo = np.abs(rho - d)
    half = np.minimum(rho, d)  # (hi - lo)/2
    mid = lo + half
    if np.isfinite(sigma_max):
        keep = lo < sigma_max
        rho, wr, lo, half, mid = rho[keep], wr[keep], lo[keep], half[keep], mid[keep]
        theta_max = np.arccos(np.clip((mid - sigma_max) / half, -1.0, 1.0))
    else:
        theta_max = np.full(rho.shape, np.pi)
    tx, tw = leggauss(order)
    p = theta_panels
    # panel k of the theta range spans [k, k+1] * theta_max / p
    u = ((np.arange(p)[:, None] + (tx[None, :] + 1) / 2) / p).ravel()
    uw = np.tile(tw, p) * (0.5 / p)
    theta = theta_max[:, None] * u[None, :]
    wtheta = theta_max[:, None] * uw[None, :]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    R = rho[:, None]
    sigma = mid[:, None] - half[:, None] * cos_t
    other = np.where(R >= d, R + sigma - d, sigma - R + d)
    jac = half[:, None] * sin_t  # dsigma/dtheta
    area = 0.25 * np.sqrt(np.maximum((R + sigma + d) * other, 0.0)) * jac
    w = sphere_area(n - 1) * (R * sigma / d) * (2 * area / d) ** (n - 3) * jac * wtheta * wr[:, None]
    return BipolarRule(np.broadcast_to(R, sigma.shape).ravel(), sigma.ravel(), w.ravel())


@dataclass(frozen=True)
class BipolarQuadrature:
    """Tensor-product rule over {(rho, sigma) in R : rho <= rho_max, sigma <= sigma_max}.

    Nodes are generated in chunks of rho rows so large rules stay within memory.
    resolution r halves the rho panel width and doubles the theta panels r times.
    """

    z_norm: float
    n: int
    rho_max: float
    sigma_max: float = np.inf
    resolution: int = 0
    rho_step: float = 0.25
    theta_panels: int = 8
    order: int = 12
    rho_breaks: tuple = ()
    max_nodes: int = 2_000_000

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("bipolar coordinates need n >= 3")
        if not self.z_norm > 0:
            raise DomainError("|z| must be positive")

    def rules(self):
        rho, wr = _rho_nodes(self.z_norm, self.rho_max, self.sigma_max, self.resolution, self.rho_step, self.order, self.rho_breaks)
        p = self.theta_panels * 2**self.resolution
        rows = max(1, self.max_nodes // (p * self.order))
        for i in range(0, rho.size, rows):
            yield _rule_for(rho[i : i + rows], wr[i : i + rows], float(self.z_norm), self.n, self.sigma_max, p, self.order)

    def integrate(self, f: Callable) -> complex:
        return sum(r.integrate(f) for r in self.rules())


def bipolar_rule(z_norm: float, n: int, rho_max: float, sigma_max: float = np.inf, **kw) -> BipolarRule:
    """All nodes of a BipolarQuadrature as one rule (small configurations only)."""
    parts = list(BipolarQuadrature(z_norm, n, rho_max, sigma_max, max_nodes=2**62, **kw).rules())
    return parts[0]


def bipolar_integral(
    f: Callable,
    z_norm: float,
    n: int,
    rho_max: float,
    sigma_max: float = np.inf,
    tol: float = 1e-10,
    max_resolution: int = 5,
    return_error: bool = False,
    **rule_kw,
):
    """Integral over R^n of f(|x|, |x - z|), truncated to rho <= rho_max and sigma <= sigma_max.

    Refines until two successive resolutions agree to tol (relative).
    """
    prev = None
    for r in range(max_resolution + 1):
        val = BipolarQuadrature(z_norm, n, rho_max, sigma_max, resolution=r, **rule_kw).integrate(f)
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * max(abs(val), 1e-300):
                return (val, err) if return_error else val
        prev = val
    raise ConvergenceError(f"bipolar quadrature did not reach tol={tol} by resolution {max_resolution}")


# ---------------------------------------------------------------- cutoff and kernel


@dataclass(frozen=True)
class SmoothCutoff:
    """chi(x) = 1 - prod_c (1 - bump(mu |x - c|)), centers c on the axis through 0 and z.

    Centers are axial coordinates measured from the first focus toward the second; None means
    the two foci. The kernel weight is 1 - (1 - chi)^2 = chi (2 - chi), supported within
    2/mu of a center. No centers gives chi = 0 and a vanishing kernel.
    """

    mu: float = 1.0
    centers: tuple | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def axial_centers(self, focal: float) -> tuple:
        return (0.0, float(focal)) if self.centers is None else tuple(float(c) for c in self.centers)

    def chi(self, rho, sigma, focal: float):
        rho = np.asarray(rho, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        x1 = (rho**2 - sigma**2 + focal**2) / (2 * focal)
        keep = np.ones(np.broadcast(rho, sigma).shape)
        for c in self.axial_centers(focal):
            dist = np.sqrt(np.maximum(rho**2 - 2 * c * x1 + c * c, 0.0))
            keep = keep * (1 - bump(self.mu * dist))
        return 1 - keep

    def weight(self, rho, sigma, focal: float):
        chi = self.chi(rho, sigma, focal)
        return chi * (2 - chi)

    def support_radii(self, focal: float) -> tuple[float, float]:
        """Upper bounds for rho and sigma on the support of the weight."""
        cs = self.axial_centers(focal)
        if not cs:
            return 0.0, 0.0
        r = 2 / self.mu
        return max(abs(c) for c in cs) + r, max(abs(c - focal) for c in cs) + r


@dataclass(frozen=True)
class KernelConfig:
    t_prime: float
    t0: float
    t_dprime: float
    z: tuple = (4.0,)
    n: int = 5
    cutoff: SmoothCutoff = SmoothCutoff()
    y: tuple = (0.0,)

    def __post_init__(self):
        if not (self.t_prime < self.t0 < self.t_dprime):
            raise ValueError("need t' < t0 < t''")
        if self.focal_distance <= 0:
            raise DomainError("z must differ from y")

    @property
    def z_norm(self) -> float:
        return float(np.linalg.norm(self.z))

    @property
    def focal_distance(self) -> float:
        z = np.asarray(self.z, dtype=float)
        y = np.asarray(self.y, dtype=float)
        m = max(z.size, y.size)
        return float(np.linalg.norm(np.pad(z, (0, m - z.size)) - np.pad(y, (0, m - y.size))))

    @property
    def s_first(self) -> float:
        return self.t0 - self.t_prime

    @property
    def s_second(self) -> float:
        return self.t_dprime - self.t0

    @property
    def a(self) -> float:
        return self.s_first / self.s_second

    def translated(self) -> "KernelConfig":
        """Shift y to the origin."""
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        m = max(z.size, y.size)
        zz = np.pad(z, (0, m - z.size)) - np.pad(y, (0, m - y.size))
        return replace(self, z=tuple(zz), y=(0.0,) * m)

    def swapped(self) -> "KernelConfig":
        """Exchange the two time gaps together with the two source points."""
        T = self.t_dprime - self.t_prime
        cs = self.cutoff.centers
        f = self.focal_distance
        cut = self.cutoff if cs is None else replace(self.cutoff, centers=tuple(f - c for c in cs))
        return replace(
            self, t_prime=self.t0 - self.s_second, t_dprime=self.t0 + self.s_first, z=self.y, y=self.z, cutoff=cut
        ) if T > 0 else self

    def normalized(self) -> "KernelConfig":
        """y = 0 and a >= 1."""
        c = self if self.a >= 1 else self.swapped()
        return c.translated()


def required_table_range(config: KernelConfig) -> float:
    rmax, smax = config.cutoff.support_radii(config.focal_distance)
    return max(rmax / config.s_first**0.25, smax / config.s_second**0.25)


@dataclass(frozen=True)
class KernelValue:
    value: complex
    quadrature_error: float
    table_error: float


def eval_K_detailed(config: KernelConfig, table: FundSolTable | None = None, resolution: int = 0) -> KernelValue:
    """K with its error estimates (quadrature: change under one resolution step)."""
    f = config.focal_distance
    rmax, smax = config.cutoff.support_radii(f)
    if rmax == 0:
        return KernelValue(0j, 0.0, 0.0)
    need = required_table_range(config)
    if table is None:
        table = cached_table(config.n, float(np.ceil(need)))
    if table.n != config.n:
        raise TableCoverageError("table dimension does not match the kernel configuration")
    if need > table.x_max * (1 + 1e-12):
        raise TableCoverageError(f"table covers |x| <= {table.x_max}, kernel needs {need}")
    s1, s2 = config.s_first, config.s_second
    q1, q2 = s1**0.25, s2**0.25

    def integrand(rho, sigma):
        w = config.cutoff.weight(rho, sigma, f)
        phase = -C4 * (rho ** (4 / 3) / s1 ** (1 / 3) + sigma ** (4 / 3) / s2 ** (1 / 3))
        return np.exp(1j * phase) * table.I_tilde(rho / q1) * table.I_tilde(sigma / q2) * w

    # rho steps matched to the phase oscillation at the edge of the support
    osc = max(rmax ** (1 / 3) / s1 ** (1 / 3), smax ** (1 / 3) / s2 ** (1 / 3)) * 4 / 3 * C4
    step = min(0.25, 0.8 / max(osc, 1e-12)) / 2
    kw = dict(rho_step=step, theta_panels=max(8, int(np.ceil(4 * smax * osc))), order=12)
    pref = (s1 * s2) ** (-config.n / 4)
    v0 = pref * BipolarQuadrature(f, config.n, rmax, smax, resolution=resolution, **kw).integrate(integrand)
    v1 = pref * BipolarQuadrature(f, config.n, rmax, smax, resolution=resolution + 1, **kw).integrate(integrand)
    return KernelValue(complex(v1), float(abs(v1 - v0)), float(table.interpolation_error * abs(v1)))


def eval_K(config: KernelConfig, table: FundSolTable | None = None, resolution: int = 0) -> complex:
    return eval_K_detailed(config, table, resolution).value


def free_pairing_kernel(T: float, focal: float, n: int) -> complex:
    """The kernel with the cutoff weight replaced by 1 on all of R^n: (2 pi)^n T^{-n/4} I(|z|/T^{1/4})."""
    return (2 * np.pi) ** n * T ** (-n / 4) * eval_I(focal / T**0.25, n)


def symmetric_config(base: KernelConfig, separation: float) -> KernelConfig:
    """t0 at the midpoint of [t', t''], so a = 1."""
    return replace(base, t_prime=base.t0 - separation / 2, t_dprime=base.t0 + separation / 2)


def _eval_job(args):
    cfg, table, res = args
    return eval_K_detailed(cfg, table, res)


def kernel_decay_fit(
    base: KernelConfig, separations: Sequence[float], resolution: int = 0, workers: int = 1, table=None
) -> ExperimentReport:
    """Fit |K| ~ |t'' - t'|^{-c} with t0 bisecting [t', t'']; c is reported, only c > 0 is checked."""
    seps = np.asarray(separations, dtype=float)
    if seps.size < 5:
        raise FitError("kernel_decay_fit needs >= 5 separations")
    if seps.max() / seps.min() < 100:
        raise FitError("separations must span >= 2 decades")
    cfgs = [symmetric_config(base, T) for T in seps]
    if table is None:
        need = max(required_table_range(c) for c in cfgs)
        table = cached_table(base.n, float(np.ceil(need))) if need > 0 else None
    jobs = [(c, table, resolution) for c in cfgs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            vals = list(ex.map(_eval_job, jobs))
    else:
        vals = [_eval_job(j) for j in jobs]
    mags = np.array([abs(v.value) for v in vals])
    free = np.array([abs(free_pairing_kernel(T, base.focal_distance, base.n)) for T in seps])
    rep = ExperimentReport(
        experiment="kernel-decay",
        columns={
            "separation": seps.tolist(),
            "abs_K": mags.tolist(),
            "quadrature_error": [v.quadrature_error for v in vals],
            "table_error": [v.table_error for v in vals],
            "abs_K_free": free.tolist(),
        },
        inputs={
            "n": base.n,
            "z_norm": base.focal_distance,
            "mu": base.cutoff.mu,
            "resolution": resolution,
            "t0_rule": "midpoint",
        },
    )
    if np.any(mags == 0):
        rep.fit = {"c": None}
        rep.check("c_positive", None, passed=False, reason="kernel vanished identically")
        return rep
    fit = fit_power_law(seps, mags)
    ffit = fit_power_law(seps, free)
    rep.fit = {**fit, "c": -fit["slope"], "c_free": -ffit["slope"], "free_rate": base.n / 4}
    rep.check("c_positive", -fit["slope"], passed=-fit["slope"] > 0)
    rep.check("r2", fit["r2"], 1.0, 0.1)
    rep.notes.append("c is an empirical fit; the optimal exponent is not known")
    return rep
