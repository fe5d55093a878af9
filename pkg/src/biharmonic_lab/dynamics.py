"""Nonlinear evolution of i u_t + Lap^2 u = s|u|^{p-1}u and diagnostics built on trajectories.

Time stepping is Strang splitting. The nonlinear substep i u_t = s|u|^{p-1}u keeps |u| fixed
pointwise, so it is solved exactly by a phase rotation; the linear substep is the exact
multiplier e^{i dt k^4}. Splitting error therefore comes only from the commutator.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .field import (
    RadialField,
    RadialGrid,
    check_truncation,
    evaluate_spatial,
    field_from_csv,
    field_to_csv,
    lq_norm,
    radial_fourier,
    sphere_area,
)
from .littlewood_paley import band_range_multiplier
from .params import ModelParams
from .report import ExperimentReport


class BlowUpError(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class WindowError(ValueError):
    pass


class CapError(RuntimeError):
    pass


BLOWUP_FACTOR = 1e6


class _Transform:
    """Array-level forward/inverse radial transform of a grid (no validation overhead)."""

    def __init__(self, grid: RadialGrid):
        plan = grid.plan
        r, k, nu = grid.nodes, grid.knodes, grid.nu
        self.T = plan.T
        self.fr = r**nu * grid.r_max / plan.jnu1
        self.fk = plan.jnu1 / grid.k_max / k**nu
        self.ik = k**nu * grid.k_max / plan.jnu1
        self.ir = plan.jnu1 / grid.r_max / r**nu
        self.k = k
        self.grid = grid

    def forward(self, f):
        return self.fk * (self.T @ (self.fr * f))

    def inverse(self, F):
        return self.ir * (self.T @ (self.ik * F))

    def spectral_norm(self, F) -> float:
        g = self.grid
        return float(np.sqrt(sphere_area(g.n) * np.sum(g.kweights * np.abs(F) ** 2 * self.k ** (g.n - 2))))


@dataclass
class Trajectory:
    params: ModelParams
    times: np.ndarray
    states: list
    dt: float
    method: str = "strang"
    nonlinear: bool = True

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.states) != self.times.size:
            raise ValueError("one state per time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing")
        grids = {id(s.grid) for s in self.states}
        if len(grids) > 1 and any(s.grid != self.states[0].grid for s in self.states):
            raise ValueError("states must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.states[0].grid

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.states))

    def __getitem__(self, i):
        return float(self.times[i]), self.states[i]

    def subsample(self, stride: int) -> "Trajectory":
        idx = np.arange(0, len(self), stride)
        return Trajectory(self.params, self.times[idx], [self.states[i] for i in idx], self.dt, self.method, self.nonlinear)

    def mass_drift(self) -> float:
        m0 = lq_norm(self.states[0], 2)
        return max(abs(lq_norm(s, 2) - m0) for s in self.states) / m0

    def save(self, directory) -> Path:
        """One field CSV per checkpoint plus manifest.json."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = []
        for i, s in enumerate(self.states):
            name = f"state_{i:05d}.csv"
            field_to_csv(s, d / name)
            files.append(name)
        manifest = {
            "params": dataclasses.asdict(self.params),
            "dt": self.dt,
            "method": self.method,
            "nonlinear": self.nonlinear,
            "times": [repr(float(t)) for t in self.times],
            "files": files,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return d

    @classmethod
    def load(cls, directory) -> "Trajectory":
        d = Path(directory)
        man = json.loads((d / "manifest.json").read_text())
        pr = man["params"]
        params = ModelParams(**pr)
        states = [field_from_csv(d / f) for f in man["files"]]
        return cls(params, np.array([float(t) for t in man["times"]]), states, man["dt"], man["method"], man["nonlinear"])


def _nonlinearity(u, params: ModelParams):
    return params.s * np.abs(u) ** (params.p - 1) * u


def evolve(
    u0: RadialField,
    params: ModelParams,
    T: float,
    dt: float,
    save_every: int = 1,
    nonlinear: bool = True,
    warn: bool = True,
) -> Trajectory:
    """Strang splitting from t=0 to T with T/dt steps; states stored every save_every steps."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T >= dt * (1 - 1e-12):
        raise ValueError("T must be >= dt")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    if u0.grid.n != params.n:
        raise ValueError("grid dimension does not match params")
    tr = _Transform(u0.grid)
    lin = np.exp(1j * dt * tr.k**4)
    s, q = params.s, params.p - 1
    u = u0.values.copy()
    peak0 = np.abs(u).max()
    times, states = [0.0], [u0]
    for j in range(1, steps + 1):
        if nonlinear:
            u = u * np.exp(-0.5j * dt * s * np.abs(u) ** q)
        u = tr.inverse(lin * tr.forward(u))
        if nonlinear:
            u = u * np.exp(-0.5j * dt * s * np.abs(u) ** q)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > BLOWUP_FACTOR * max(peak0, 1e-300):
            partial = Trajectory(params, np.array(times), states, dt, "strang", nonlinear)
            raise BlowUpError(f"sup norm grew past {BLOWUP_FACTOR:g}x at t={j * dt:.6g}", partial)
        if j % save_every == 0 or j == steps:
            times.append(j * dt)
            states.append(RadialField(u0.grid, u))
    traj = Trajectory(params, np.array(times), states, dt, "strang", nonlinear)
    if warn:
        check_truncation(states[-1])
    return traj


def self_convergence(u0: RadialField, params: ModelParams, T: float, h: float) -> dict:
    """Final-state differences for dt = 4h, 2h, h and the implied order."""
    finals = [evolve(u0, params, T, d, save_every=10**9, warn=False).states[-1] for d in (4 * h, 2 * h, h)]
    e1 = lq_norm(finals[0] - finals[1], 2)
    e2 = lq_norm(finals[1] - finals[2], 2)
    return {"e_coarse": e1, "e_fine": e2, "ratio": e1 / e2, "order": float(np.log2(e1 / e2))}


def splitting_error_estimate(u0: RadialField, params: ModelParams, T: float, dt: float) -> float:
    """Richardson estimate ||u_dt(T) - u_{dt/2}(T)|| * 4/3 of the error of the dt run."""
    a = evolve(u0, params, T, dt, save_every=10**9, warn=False).states[-1]
    b = evolve(u0, params, T, dt / 2, save_every=10**9, warn=False).states[-1]
    return lq_norm(a - b, 2) * 4 / 3


# ---------------------------------------------------------------- Duhamel


def duhamel_profile(traj: Trajectory) -> np.ndarray:
    """||u(t) - e^{i(t-t0)Lap^2}u(t0) + i int_{t0}^t e^{i(t-t')Lap^2} F(u(t')) dt'||_2 at each state.

    The time integral is the trapezoid rule over the stored states.
    """
    if len(traj) < 3:
        raise ValueError("need >= 3 states")
    tr = _Transform(traj.grid)
    k4 = tr.k**4
    t = traj.times
    pull = np.array([np.exp(-1j * tj * k4) * tr.forward(s.values) for tj, s in zip(t, traj.states)])
    if traj.nonlinear:
        G = np.array([np.exp(-1j * tj * k4) * tr.forward(_nonlinearity(s.values, traj.params)) for tj, s in zip(t, traj.states)])
        h = np.diff(t)[:, None]
        integral = np.vstack([np.zeros_like(G[0]), np.cumsum(0.5 * h * (G[1:] + G[:-1]), axis=0)])
    else:
        integral = np.zeros_like(pull)
    res = pull - pull[0] + 1j * integral
    return np.array([tr.spectral_norm(r) for r in res])


def duhamel_residual(traj: Trajectory) -> float:
    return float(duhamel_profile(traj).max())


# ---------------------------------------------------------------- radiation split


@dataclass
class DecompositionResult:
    u_plus: RadialField
    v_states: list
    probe_times: np.ndarray
    window: tuple
    window_sensitivity: float
    identity_defect: float

    def v_norms(self, s: float = 0.0) -> np.ndarray:
        """||v(t)||_{H^s} at each probe."""
        from .field import sobolev_norm

        return np.array([sobolev_norm(v, s) for v in self.v_states])


def _window_average(traj: Trajectory, tr: _Transform, a: float, b: float) -> np.ndarray:
    t = traj.times
    idx = np.where((t >= a - 1e-12) & (t <= b + 1e-12))[0]
    if idx.size < 2:
        raise WindowError("window holds fewer than 2 stored states")
    k4 = tr.k**4
    P = np.array([np.exp(-1j * t[i] * k4) * tr.forward(traj.states[i].values) for i in idx])
    ts = t[idx]
    return np.trapezoid(P, ts, axis=0) / (ts[-1] - ts[0])


def radiation_split(
    traj: Trajectory, probe_window: tuple | None = None, probe_times: Sequence[float] | None = None
) -> DecompositionResult:
    """u_plus = time average of e^{-it Lap^2} u(t) over the window; v(t) = u(t) - e^{it Lap^2} u_plus.

    Defaults: window = second half of the trajectory; probes = 5 stored times spread over the part
    before the window. window_sensitivity compares with the window shifted by half its length.
    """
    t = traj.times
    if probe_window is None:
        probe_window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    a, b = map(float, probe_window)
    if a < t[0] - 1e-12 or b > t[-1] + 1e-12 or b <= a:
        raise WindowError(f"window [{a}, {b}] not inside [{t[0]}, {t[-1]}]")
    if b - a < 10 * traj.dt * (1 - 1e-9):
        raise WindowError("window must span at least 10 time steps")
    tr = _Transform(traj.grid)
    up = _window_average(traj, tr, a, b)
    L = b - a
    if a - L / 2 >= t[0] - 1e-12:
        up2 = _window_average(traj, tr, a - L / 2, b - L / 2)
    else:
        up2 = _window_average(traj, tr, a + L / 2, min(b + L / 2, t[-1]))
    if probe_times is None:
        pool = t[t <= a + 1e-12] if np.sum(t <= a + 1e-12) >= 3 else t
        probe_times = pool[np.unique(np.linspace(0, pool.size - 1, 5).round().astype(int))]
    probe_times = np.asarray(probe_times, dtype=float)
    k4 = tr.k**4
    vs, defect = [], 0.0
    for pt in probe_times:
        i = int(np.argmin(np.abs(t - pt)))
        if abs(t[i] - pt) > 1e-9:
            raise WindowError(f"probe time {pt} is not a stored time")
        free = tr.inverse(np.exp(1j * t[i] * k4) * up)
        v = traj.states[i].values - free
        defect = max(defect, float(np.abs(v + free - traj.states[i].values).max()))
        vs.append(RadialField(traj.grid, v))
    u_plus = RadialField(traj.grid, tr.inverse(up))
    sens = tr.spectral_norm(up - up2)
    return DecompositionResult(u_plus, vs, probe_times, (a, b), sens, defect)


# ---------------------------------------------------------------- concentration points


@dataclass
class ConcentrationSet:
    points: list
    mu3: float
    c_exp: float
    threshold: float
    values: list = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.points)

    @property
    def exclusion_radius(self) -> float:
        return 1 / (2 * self.mu3)


def band_restrict(v: RadialField, N: float) -> RadialField:
    """P_{1/N <= . <= N} v."""
    from .field import apply_multiplier

    return apply_multiplier(v, band_range_multiplier(1 / N, N))


def concentration_points(
    v_N: RadialField, mu3: float, c_exp: float, cap_exponent: float = 3.0, radii=None
) -> ConcentrationSet:
    """Greedy selection on the sampled field.

    A = {r : |v_N(r)| >= mu3^c}. While some r in A lies outside every ball of radius 1/(2 mu3)
    around the chosen points, add the one with the largest |v_N|. Samples are the grid nodes
    unless radii is given. Raises CapError once the count would exceed mu3^{-cap_exponent}.
    """
    if not (0 < mu3 < 1):
        raise ValueError("mu3 must lie in (0, 1)")
    if not c_exp > 0:
        raise ValueError("c_exp must be positive")
    r = v_N.r if radii is None else np.asarray(radii, dtype=float)
    a = np.abs(v_N.values) if radii is None else np.abs(v_N.evaluate(r))
    thr = mu3**c_exp
    cap = mu3 ** (-cap_exponent)
    ex = 1 / (2 * mu3)
    available = a >= thr
    pts, vals = [], []
    while np.any(available):
        i = int(np.argmax(np.where(available, a, -np.inf)))
        if len(pts) + 1 > cap:
            raise CapError(f"more than mu3^-{cap_exponent} = {cap:.3g} concentration points")
        pts.append(float(r[i]))
        vals.append(float(a[i]))
        available &= np.abs(r - r[i]) >= ex
    return ConcentrationSet(pts, mu3, c_exp, thr, vals)


def verify_concentration(v_N: RadialField, cs: ConcentrationSet, radii=None) -> dict:
    """Exhaustive scan: separation of the points and |v_N| < threshold away from all balls."""
    r = v_N.r if radii is None else np.asarray(radii, dtype=float)
    a = np.abs(v_N.values) if radii is None else np.abs(v_N.evaluate(r))
    pts = np.array(cs.points)
    if pts.size >= 2:
        sep = float(np.min(np.abs(pts[:, None] - pts[None, :])[~np.eye(pts.size, dtype=bool)]))
    else:
        sep = np.inf
    far = np.ones(r.shape, dtype=bool)
    for p in pts:
        far &= np.abs(r - p) >= cs.exclusion_radius
    worst = float(a[far].max()) if np.any(far) else 0.0
    return {
        "min_separation": sep,
        "separation_ok": bool(sep >= cs.exclusion_radius),
        "max_outside": worst,
        "maximal": bool(worst < cs.threshold),
    }


def exterior_mass(v: RadialField, points: Sequence[float], R: float, order: int = 24) -> float:
    """int |v|^2 dx over {x : min_j ||x| - r_j| >= R} within the grid's domain."""
    g = v.grid
    segs = [(0.0, g.r_max)]
    for p in points:
        cut = []
        for lo, hi in segs:
            a, b = p - R, p + R
            if b <= lo or a >= hi:
                cut.append((lo, hi))
                continue
            if a > lo:
                cut.append((lo, a))
            if b < hi:
                cut.append((b, hi))
        segs = cut
    if not segs:
        return 0.0
    F = radial_fourier(v)
    x, w = leggauss(order)
    total = 0.0
    for lo, hi in segs:
        m = max(1, int(np.ceil((hi - lo) / (g.r_max / 64))))
        e = np.linspace(lo, hi, m + 1)
        h = np.diff(e) / 2
        c = (e[1:] + e[:-1]) / 2
        rr = (c[:, None] + h[:, None] * x).ravel()
        ww = (h[:, None] * w).ravel()
        vals = evaluate_spatial(F, rr)
        total += float(np.sum(ww * np.abs(vals) ** 2 * rr ** (g.n - 1)))
    return sphere_area(g.n) * total


def spatial_localization_report(v: RadialField, points: ConcentrationSet | Sequence[float], radii: Sequence[float]) -> ExperimentReport:
    radii = [float(R) for R in radii]
    if radii != sorted(radii):
        raise ValueError("radii must be increasing")
    pts = list(points.points) if isinstance(points, ConcentrationSet) else [float(p) for p in points]
    masses = [exterior_mass(v, pts, R) for R in radii]
    rep = ExperimentReport(
        experiment="spatial-localization",
        columns={"R": radii, "exterior_mass": masses},
        inputs={"points": pts, "grid": v.grid.header()},
    )
    mono = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(masses, masses[1:]))
    rep.check("nonincreasing", None, passed=mono)
    return rep
