"""The biharmonic fundamental solution I(x) = int e^{i(|xi|^4 + xi.x)} dxi and its phase-removed form.

Radial reduction: I(x) = (2pi)^{n/2} |x|^{-nu} int_0^inf e^{is^4} J_nu(s|x|) s^{nu+1} ds, nu = (n-2)/2.

Three independent evaluators are provided:

* ``contour``: steepest-descent deformation of the s-integral (default; ~1e-13 relative);
* ``regularized``: quartic damping e^{-eps s^4} on the real axis, Richardson-extrapolated
  over a geometric eps ladder (eps -> 0);
* ``series``: the convergent power series in |x|, summed in multiprecision.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import gamma, hankel1e, hankel2e, jve

from .field import bessel_j, sphere_area
from .report import ExperimentReport, FitError, fit_power_law

C4 = 4.0 ** (-1.0 / 3.0)
SMALL_X_SWITCH = 16.0


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuarticPhase:
    """phi_x(xi) = |xi|^4 + xi.x restricted to the line through x (xi = s * xhat)."""

    x_norm: float
    n: int

    def __post_init__(self):
        if not self.x_norm > 0:
            raise ValueError("|x| must be positive")

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return s**4 + s * self.x_norm

    def gradient(self, s):
        s = np.asarray(s, dtype=float)
        return 4 * np.abs(s) ** 2 * s + self.x_norm

    def hessian_eigenvalues(self, s) -> np.ndarray:
        """12|xi|^2 along xhat, 4|xi|^2 on the n-1 transverse directions."""
        return np.array([12 * s * s] + [4 * s * s] * (self.n - 1))


def stationary_point(x_norm: float) -> float:
    """Component of xi_st along xhat: -(|x|/4)^{1/3}."""
    if not x_norm > 0:
        raise ValueError("stationary point undefined at |x| = 0")
    return -np.cbrt(x_norm / 4.0)


def gradient_residual(x_norm: float) -> float:
    """|4 |xi_st|^2 xi_st + x| in the direction of x."""
    s = stationary_point(x_norm)
    return abs(4 * s * s * s + x_norm)


def I_origin(n: int) -> complex:
    """I(0) = |S^{n-1}| Gamma(n/4)/4 e^{i pi n/8}."""
    return sphere_area(n) * gamma(n / 4) / 4 * np.exp(1j * np.pi * n / 8)


def stationary_phase_amplitude(x_norm: float, n: int) -> float:
    """(2pi)^{n/2} |det Hess phi(xi_st)|^{-1/2}, the leading large-|x| size of |I|."""
    s = stationary_point(x_norm)
    det = 12 * 4 ** (n - 1) * s ** (2 * n)
    return (2 * np.pi) ** (n / 2) / np.sqrt(det)


def stationary_phase_value(x_norm: float) -> float:
    """phi_x(xi_st) = -(3/4) 4^{-1/3} |x|^{4/3}."""
    return -0.75 * C4 * x_norm ** (4 / 3)


# ---------------------------------------------------------------- contour evaluator


def _panels(edges, order):
    x, w = leggauss(order)
    edges = np.asarray(edges, dtype=float)
    h = np.diff(edges) / 2
    c = (edges[:-1] + edges[1:]) / 2
    return (c[:, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def _graded(a, b, ratio=0.25, levels=25):
    L = b - a
    return np.array([a] + [a + L * ratio**k for k in range(levels, 0, -1)] + [b])


def _I_contour(x: float, n: int, order: int = 28, density: float = 1.0) -> complex:
    nu = (n - 2) / 2
    if x == 0:
        return I_origin(n)
    e = np.exp(1j * np.pi / 8)
    if x <= SMALL_X_SWITCH:
        # whole ray s = u e^{i pi/8}: e^{is^4} = e^{-u^4}
        umax = 50 ** 0.25 + 1
        s, w = _panels(np.linspace(0, umax, int(40 * density) + 1), order)
        s, w = s * e, w * e
        z = s * x
        val = np.sum(w * np.exp(1j * s**4 + np.abs(z.imag)) * jve(nu, z) * s ** (nu + 1))
    else:
        # J = (H1 + H2)/2; H1 decays in the upper half plane, H2 only after the saddle
        sst = (x / 4) ** (1 / 3)
        umax = 50 / (x * np.sin(np.pi / 8))
        s, w = _panels(_graded(0, umax), order)
        s, w = s * e, w * e
        z = s * x
        v1 = np.sum(w * np.exp(1j * s**4 + 1j * z) * hankel1e(nu, z) * s ** (nu + 1)) / 2
        nosc = 0.75 * sst * x / (2 * np.pi)
        edges = np.concatenate([_graded(0, 1 / x)[:-1], np.linspace(1 / x, sst, int(density * nosc) + 3)])
        s, w = _panels(edges, order)
        z = s * x
        v2 = np.sum(w * np.exp(1j * s**4 - 1j * z) * hankel2e(nu, z) * s ** (nu + 1)) / 2
        umax = 3.5 / sst + 2
        s, w = _panels(np.linspace(0, umax, int(24 * density) + 1), order)
        s = sst + s * e
        w = w * e
        z = s * x
        v3 = np.sum(w * np.exp(1j * s**4 - 1j * z) * hankel2e(nu, z) * s ** (nu + 1)) / 2
        val = v1 + v2 + v3
    return complex((2 * np.pi) ** (n / 2) * x ** (-nu) * val)


# ---------------------------------------------------------------- series evaluator


def _I_series(x: float, n: int, extra_digits: int = 20) -> complex:
    """Power series in (x/2)^2 with Gamma((m+nu+1)/2) e^{i pi (m+nu+1)/4} coefficients."""
    nu = (n - 2) / 2
    if x == 0:
        return I_origin(n)
    lx = math.log(x / 2)

    def log_term(m):
        return 2 * m * lx - math.lgamma(m + 1) - math.lgamma(m + nu + 1) + math.lgamma((m + nu + 1) / 2)

    m, best = 0, -1e300
    while True:
        lt = log_term(m)
        best = max(best, lt)
        if lt < -(extra_digits + 5) * math.log(10) and lt < best - 5:
            break
        m += 1
    dps = int(max(best, 0) / math.log(10)) + extra_digits
    with mpmath.workdps(dps):
        z = -(mpmath.mpf(x) / 2) ** 2
        nu_ = mpmath.mpf(n - 2) / 2
        A = mpmath.gamma((nu_ + 1) / 2) / mpmath.gamma(nu_ + 1)
        B = mpmath.gamma((nu_ + 2) / 2) / mpmath.gamma(nu_ + 2) * z
        rot = mpmath.expjpi(mpmath.mpf(1) / 4)
        ph = mpmath.expjpi((nu_ + 1) / 4)
        tot = mpmath.mpc(0)
        k = 0
        while k <= m:
            tot += A * ph + B * ph * rot
            A = A * z * z * ((k + nu_ + 1) / 2) / ((k + 1) * (k + 2) * (k + nu_ + 1) * (k + nu_ + 2))
            B = B * z * z * ((k + nu_ + 2) / 2) / ((k + 2) * (k + 3) * (k + nu_ + 2) * (k + nu_ + 3))
            ph = ph * rot * rot
            k += 2
        res = (2 * mpmath.pi) ** (mpmath.mpf(n) / 2) * 2 ** (-nu_) / 4 * tot
    return complex(res)


# ---------------------------------------------------------------- regularized evaluator


def _I_damped(x: float, n: int, eps: float, order: int = 20) -> complex:
    """(2pi)^{n/2} x^{-nu} int_0^inf e^{(i - eps) s^4} J_nu(sx) s^{nu+1} ds on the real axis."""
    nu = (n - 2) / 2
    smax = (40.0 / eps) ** 0.25
    # panels of ~8 rad of total phase (s^4 + s x)
    nphase = (smax**4 + smax * x) / 8.0
    # uniform in s^4-phase plus uniform in s for the Bessel oscillation
    u = np.linspace(0, 1, int(nphase) + 2)
    edges = np.union1d(smax * u ** 0.25, np.linspace(0, smax, int(smax * x / 8) + 2))
    s, w = _panels(edges, order)
    val = np.sum(w * np.exp((1j - eps) * s**4) * bessel_j(nu, s * x) * s ** (nu + 1))
    if x == 0:
        return complex((2 * np.pi) ** (n / 2) * np.sum(w * np.exp((1j - eps) * s**4) * s ** (2 * nu + 1)) / (2**nu * gamma(nu + 1)))
    return complex((2 * np.pi) ** (n / 2) * x ** (-nu) * val)


def regularized_ladder(x: float, n: int, levels: int = 7, eps0: float | None = None, tol: float = 1e-9):
    """Richardson extrapolation of the damped integral over eps_j = eps0 2^{-j}.

    The damped value is analytic in eps near 0 with Taylor coefficients growing like
    s_st^{4k}, so eps0 is scaled to 0.5 / (1 + s_st^4). Returns (value, error_estimate, eps_list).
    """
    sst4 = (x / 4) ** (4 / 3)
    if eps0 is None:
        eps0 = min(0.1, 0.5 / (1 + sst4))
    eps = eps0 * 0.5 ** np.arange(levels)
    vals = [_I_damped(x, n, float(e)) for e in eps]
    # Neville-style table in eps (ratio 2)
    table = [np.array(vals, dtype=complex)]
    for j in range(1, levels):
        prev = table[-1]
        table.append((2**j * prev[1:] - prev[:-1]) / (2**j - 1))
    diag = np.array([t[-1] for t in table])
    err = abs(diag[-1] - diag[-2])
    if not np.isfinite(diag[-1]) or err > tol * max(abs(diag[-1]), 1e-300) * 1e3:
        raise ConvergenceError(f"eps ladder failed its Cauchy test at |x|={x}: step {err:.3e}")
    return complex(diag[-1]), float(err), eps.tolist()


# ---------------------------------------------------------------- public evaluators


METHODS = ("contour", "regularized", "series")


def eval_I(x_norm: float, n: int, method: str = "contour", return_error: bool = False):
    """I(x) for |x| = x_norm. With return_error=True returns (value, error_estimate)."""
    if x_norm < 0:
        raise ValueError("|x| must be >= 0")
    x = float(x_norm)
    if method == "contour":
        v = _I_contour(x, n)
        if not return_error:
            return v
        v2 = _I_contour(x, n, order=36, density=1.5)
        return v, abs(v - v2)
    if method == "regularized":
        v, err, _ = regularized_ladder(x, n)
        return (v, err) if return_error else v
    if method == "series":
        v = _I_series(x, n)
        if not return_error:
            return v
        return v, abs(v - _I_series(x, n, extra_digits=30))
    raise ValueError(f"method must be one of {METHODS}")


def eval_I_tilde(x_norm: float, n: int, method: str = "contour") -> complex:
    """I~(x) = e^{-i xi_st.x} I(x) = e^{+i 4^{-1/3}|x|^{4/3}} I(x)."""
    if not x_norm > 0:
        raise ValueError("I~ needs |x| > 0")
    return np.exp(1j * C4 * x_norm ** (4 / 3)) * eval_I(x_norm, n, method)


def phase_shift(x_norm: float) -> float:
    """-xi_st . x = 4^{-1/3}|x|^{4/3}."""
    return C4 * x_norm ** (4 / 3)


@dataclass(frozen=True)
class FundSolSample:
    x_norm: float
    I_value: complex
    I_tilde_value: complex
    reg_epsilon: float  # 0.0: contour evaluation involves no damping
    err_est: float


def fundsol_sample(x_norm: float, n: int) -> FundSolSample:
    v, err = eval_I(x_norm, n, return_error=True)
    vt = np.exp(1j * phase_shift(x_norm)) * v if x_norm > 0 else v
    return FundSolSample(float(x_norm), complex(v), complex(vt), 0.0, float(err))


def fundsol_table(xs: Sequence[float], n: int) -> list:
    return [fundsol_sample(float(x), n) for x in xs]


def fundsol_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_norm", "re_I", "im_I", "re_I_tilde", "im_I_tilde", "err_est"])
    for s in samples:
        w.writerow([repr(float(v)) for v in (s.x_norm, s.I_value.real, s.I_value.imag,
                                             s.I_tilde_value.real, s.I_tilde_value.imag, s.err_est)])
    return buf.getvalue()


def fundsol_from_csv(text: str) -> list:
    rows = list(csv.reader(text.splitlines()))[1:]
    out = []
    for r in rows:
        x, a, b, c, d, e = map(float, r)
        out.append(FundSolSample(x, complex(a, b), complex(c, d), 0.0, e))
    return out


# ---------------------------------------------------------------- decay experiments


def _step(x: float) -> float:
    return min(0.1, 0.05 * x ** (-1 / 3))


def _differentiate(f, x: float, beta: int, h: float, rel_tol: float = 0.05) -> complex:
    """Central difference of order beta, Richardson-extrapolated from steps h and h/2."""

    def d(hh):
        if beta == 0:
            return f(x)
        if beta == 1:
            return (f(x + hh) - f(x - hh)) / (2 * hh)
        if beta == 2:
            return (f(x + hh) - 2 * f(x) + f(x - hh)) / hh**2
        raise ValueError("beta must be 0, 1 or 2")

    a, b = d(h), d(h / 2)
    r = b + (b - a) / 3
    if beta and abs(r - b) > rel_tol * abs(r):
        raise ConvergenceError(f"difference ladder did not settle at |x|={x} (beta={beta})")
    return r


def derivative_magnitude(x0: float, n: int, beta: int, mode: str = "frozen") -> float:
    """|d_rho^beta G| at rho = x0 for G chosen by mode.

    'raw':     G = I.
    'frozen':  G = e^{-i xi_st(x0).x} I with the stationary point held at its value for x0, the
               quantity whose derivatives are the integrals of (xi - xi_st)^beta e^{i(phi - xi_st.x)}.
    'literal': G = e^{+i 4^{-1/3}|x|^{4/3}} I with the prefactor differentiated as well.
    """
    if mode == "raw":
        f = lambda r: eval_I(r, n)
    elif mode == "frozen":
        k = C4 * x0 ** (1 / 3)
        f = lambda r: np.exp(1j * k * r) * eval_I(r, n)
    elif mode == "literal":
        f = lambda r: np.exp(1j * C4 * r ** (4 / 3)) * eval_I(r, n)
    else:
        raise ValueError("mode must be 'raw', 'frozen' or 'literal'")
    return float(abs(_differentiate(f, x0, beta, _step(x0))))


def radial_derivative_decay(
    beta: int, x_range=(10.0, 1000.0), n: int = 5, mode: str = "frozen", points: int = 12
) -> ExperimentReport:
    """Fit log|d_rho^beta I~| against log|x| on a log grid; target slope -(n + beta)/3.

    mode='raw' fits I itself (target -(n - beta)/3 from the bound on derivatives of I).
    """
    lo, hi = map(float, x_range)
    if hi / lo < 100 * (1 - 1e-12):
        raise FitError("x_range must span >= 2 decades")
    if beta not in (0, 1, 2):
        raise ValueError("beta must be 0, 1 or 2")
    xs = np.geomspace(lo, hi, points)
    mags = [derivative_magnitude(float(x), n, beta, mode) for x in xs]
    fit = fit_power_law(xs, mags)
    target = -(n - beta) / 3 if mode == "raw" else -(n + beta) / 3
    rep = ExperimentReport(
        experiment="fundsol-derivative",
        columns={"x_norm": xs.tolist(), "magnitude": mags},
        fit={**fit, "target": target},
        inputs={"beta": beta, "n": n, "mode": mode, "x_range": [lo, hi]},
    )
    rep.check("slope", fit["slope"], target, 0.1 if beta or mode != "raw" else 0.05)
    return rep


def decay_fit_I(n: int, x_range=(10.0, 1000.0), points: int = 16) -> ExperimentReport:
    xs = np.geomspace(*x_range, points)
    vals = [eval_I(float(x), n) for x in xs]
    fit = fit_power_law(xs, np.abs(vals))
    rep = ExperimentReport(
        experiment="fundsol",
        columns={"x_norm": xs.tolist(), "abs_I": np.abs(vals).tolist()},
        fit={**fit, "target": -n / 3},
        inputs={"n": n, "x_range": list(x_range)},
    )
    rep.check("slope", fit["slope"], -n / 3, 0.05)
    ratio = abs(vals[-1]) / stationary_phase_amplitude(xs[-1], n)
    rep.check("stationary_phase_ratio", ratio, 1.0, 0.05)
    return rep


# ---------------------------------------------------------------- tables for the kernel


class FundSolTable:
    """Cubic-spline table of I on [0, x_max].

    The smooth envelope B(x) = e^{-i phi_x(xi_st)} I(x) is tabulated on a uniform grid in
    y = |x|^{1/3} (in which both I and the phase |x|^{4/3} = y^4 are smooth); the oscillatory
    phase is restored analytically. interpolation_error is measured at the cell midpoints.
    """

    def __init__(self, n: int, x_max: float, dy: float = 0.01):
        self.n = int(n)
        self.x_max = float(x_max)
        ymax = x_max ** (1 / 3) * (1 + 1e-9)
        m = int(np.ceil(ymax / dy)) + 1
        self.y = np.linspace(0, ymax, m)
        B = np.array([self._envelope(yy**3) for yy in self.y])
        self._re = CubicSpline(self.y, B.real)
        self._im = CubicSpline(self.y, B.imag)
        ym = 0.5 * (self.y[1:] + self.y[:-1])
        exact = np.array([self._envelope(yy**3) for yy in ym[:: max(1, len(ym) // 40)]])
        approx = self._re(ym[:: max(1, len(ym) // 40)]) + 1j * self._im(ym[:: max(1, len(ym) // 40)])
        self.interpolation_error = float(np.max(np.abs(exact - approx)) / np.max(np.abs(B)))

    def _envelope(self, x):
        return np.exp(-1j * stationary_phase_value(x)) * eval_I(x, self.n)

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x_max * (1 + 1e-9)) or np.any(x < 0):
            raise ValueError(f"table covers [0, {self.x_max}]; requested up to {float(np.max(x))}")
        y = np.cbrt(x)
        return self._re(y) + 1j * self._im(y)

    def I(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * stationary_phase_value(x)) * self.envelope(x)

    def I_tilde(self, x):
        """e^{+i 4^{-1/3}|x|^{4/3}} I(x) = e^{+i (1/4) 4^{-1/3}|x|^{4/3}} B(x)."""
        x = np.asarray(x, dtype=float)
        return np.exp(0.25j * C4 * x ** (4 / 3)) * self.envelope(x)


@lru_cache(maxsize=8)
def cached_table(n: int, x_max: float, dy: float = 0.01) -> FundSolTable:
    return FundSolTable(n, x_max, dy)
