"""Command-line experiment runner.

Every run validates its whole configuration first, computes, then writes report.json,
data.csv and summary.txt into <out>/<experiment>/ in one atomic rename. Exit status: 0 if
every check passed, 1 if some check failed, 2 for an invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import platform
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .params import (
    ModelParams,
    RegimeError,
    admissibility_reason,
    derived_exponents,
    exponent_to_json,
    is_B_admissible,
    parse_exponent,
)
from .report import ExperimentReport, report_schema, validate_report

OUTPUT_ENV = "BIHARMONIC_LAB_OUT"
EXPERIMENTS = (
    "admissible",
    "exponents",
    "dispersive",
    "localized-dispersive",
    "fundsol",
    "kernel-decay",
    "ground-state",
    "evolve",
    "decompose",
    "concentrate",
)
NEEDS_P = {"exponents", "ground-state", "evolve", "decompose"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name
        self.message = message

    def record(self) -> dict:
        return {"error": "invalid_config", "field": self.field_name, "message": self.message}


@dataclass
class RunConfig:
    experiment: str
    n: int = 5
    p: float = 3.0
    sign: str = "focusing"
    epsilon_r0: float = 1e-3
    dt: float = 1e-3
    T: float = 1.0
    rmax: float = 8.0
    m: int = 256
    mu3: float = 0.5
    c_exp: float = 1.0
    alpha: int = 0
    q: str = "2"
    r: str = "inf"
    width: float = 0.5
    amplitude: float = 1.0
    data: str = "gaussian"
    beta: int = 0
    z_norm: float = 4.0
    mu: float = 1.0
    resolution: int = 0
    dyadic_N: float = 64.0
    workers: int = 1
    out: str | None = None

    # fields that do not influence results
    _non_semantic = ("out", "workers")

    def semantic_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: v for k, v in sorted(d.items()) if k not in self._non_semantic}

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.semantic_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def params(self, check_regime: bool = True) -> ModelParams:
        return ModelParams(self.n, self.p, self.sign, self.epsilon_r0, check_regime=check_regime)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
        positive = ("dt", "T", "rmax", "width", "z_norm", "mu", "epsilon_r0")
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise ConfigError(name, f"must be a positive finite number, got {v!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n", "must be a positive integer")
        if self.T < self.dt:
            raise ConfigError("T", "must be >= dt")
        if int(self.m) != self.m or self.m < 64:
            raise ConfigError("m", "must be an integer >= 64")
        if not (0 < self.mu3 < 1):
            raise ConfigError("mu3", "must lie in (0, 1)")
        if not self.c_exp > 0:
            raise ConfigError("c_exp", "must be positive")
        if self.alpha not in (0, 1, 2):
            raise ConfigError("alpha", "must be 0, 1 or 2")
        if self.beta not in (0, 1, 2):
            raise ConfigError("beta", "must be 0, 1 or 2")
        if self.sign not in ("focusing", "defocusing"):
            raise ConfigError("sign", "must be 'focusing' or 'defocusing'")
        if self.data not in ("gaussian", "soliton"):
            raise ConfigError("data", "must be 'gaussian' or 'soliton'")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers", "must be a positive integer")
        if self.resolution not in range(0, 4):
            raise ConfigError("resolution", "must be 0..3")
        for name in ("q", "r"):
            try:
                parse_exponent(str(getattr(self, name)))
            except ValueError as e:
                raise ConfigError(name, str(e)) from None
        if self.experiment in ("evolve", "decompose"):
            steps = self.T / self.dt
            if abs(steps - round(steps)) > 1e-9 * steps:
                raise ConfigError("T", "must be an integer multiple of dt")
        if self.experiment in NEEDS_P:
            try:
                self.params()
            except (RegimeError, ValueError) as e:
                raise ConfigError("p", str(e)) from None
        if self.experiment in ("kernel-decay", "concentrate") and self.n < 3:
            raise ConfigError("n", "needs n >= 3")


def versions() -> dict:
    import mpmath
    import scipy

    return {
        "biharmonic_lab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------- experiments


def _grid(cfg: RunConfig):
    from .field import RadialGrid

    return RadialGrid(int(cfg.n), float(cfg.rmax), int(cfg.m))


def run_admissible(cfg: RunConfig) -> ExperimentReport:
    q, r = parse_exponent(cfg.q), parse_exponent(cfg.r)
    ok = is_B_admissible(q, r, cfg.n)
    rep = ExperimentReport(
        "admissible",
        columns={"q": [exponent_to_json(q)], "r": [exponent_to_json(r)]},
        inputs={"q": exponent_to_json(q), "r": exponent_to_json(r), "n": cfg.n},
    )
    rep.check("admissible", ok, passed=ok, reason=admissibility_reason(q, r, cfg.n))
    return rep


def run_exponents(cfg: RunConfig) -> ExperimentReport:
    d = derived_exponents(cfg.params())
    vals = d.as_dict()
    rep = ExperimentReport(
        "exponents",
        columns={"name": list(vals), "value": [float(v) for v in vals.values()]},
        fit=vals,
        inputs={"n": cfg.n, "p": cfg.p, "epsilon_r0": cfg.epsilon_r0},
    )
    rep.check("Q_range", d.Q, passed=2 <= d.Q < 2 * cfg.n / (cfg.n - 4))
    return rep


def run_dispersive(cfg: RunConfig) -> ExperimentReport:
    from .field import gaussian
    from .propagator import PropagatorJob, dispersive_fit

    f = gaussian(_grid(cfg), cfg.width, l1_normalized=True)
    rep = dispersive_fit(PropagatorJob(f, np.geomspace(1, 1000, 20), cfg.alpha))
    rep.fit["fitted_slope"] = rep.fit["slope"]
    return rep


def run_localized(cfg: RunConfig) -> ExperimentReport:
    from .field import RadialGrid, gaussian
    from .propagator import localized_dispersive_check

    f = gaussian(RadialGrid(int(cfg.n), 0.5, 256), 0.02, l1_normalized=True)
    return localized_dispersive_check(f, [1, 2, 4, 8], np.geomspace(300, 30000, 9))


def run_fundsol(cfg: RunConfig) -> ExperimentReport:
    from .oscillatory import decay_fit_I, eval_I, fundsol_table, radial_derivative_decay

    if cfg.beta:
        return radial_derivative_decay(cfg.beta, (10.0, 1000.0), int(cfg.n))
    rep = decay_fit_I(int(cfg.n))
    xs = np.geomspace(10, 1000, 5)
    other = [eval_I(float(x), int(cfg.n), "series") for x in xs]
    main = [eval_I(float(x), int(cfg.n)) for x in xs]
    agree = max(abs(a - b) / abs(b) for a, b in zip(main, other))
    rep.check("oracle_agreement", agree, 0.0, 1e-6)
    samples = fundsol_table(np.geomspace(0.1, 1000, 41), int(cfg.n))
    rep.columns = {
        "x_norm": [s.x_norm for s in samples],
        "re_I": [s.I_value.real for s in samples],
        "im_I": [s.I_value.imag for s in samples],
        "re_I_tilde": [s.I_tilde_value.real for s in samples],
        "im_I_tilde": [s.I_tilde_value.imag for s in samples],
        "err_est": [s.err_est for s in samples],
    }
    return rep


def run_kernel(cfg: RunConfig) -> ExperimentReport:
    from .bipolar_kernel import KernelConfig, SmoothCutoff, kernel_decay_fit

    base = KernelConfig(-0.5, 0.0, 0.5, z=(cfg.z_norm,), n=int(cfg.n), cutoff=SmoothCutoff(cfg.mu))
    return kernel_decay_fit(base, 2.0 ** np.arange(9), resolution=cfg.resolution, workers=int(cfg.workers))


def run_ground_state(cfg: RunConfig) -> ExperimentReport:
    from .field import lq_norm
    from .ground_state import fixed_point_residual, petviashvili_solve

    res = petviashvili_solve(cfg.params(), _grid(cfg))
    Q = res.Q
    dual = fixed_point_residual(Q, cfg.p)
    rep = ExperimentReport(
        "ground-state",
        columns={"r": Q.r.tolist(), "Q": Q.values.real.tolist()},
        fit={
            "residual": res.residual,
            "multiplier": res.multiplier,
            "iterations": res.iterations,
            "l2_norm": lq_norm(Q, 2),
            "Q0": float(Q.values[0].real),
            "fixed_point_residual": dual,
        },
        inputs={"grid": Q.grid.header(), "p": cfg.p, "seed": res.seed_description},
    )
    rep.check("residual", res.residual, 0.0, 1e-10)
    rep.check("multiplier", res.multiplier, 1.0, 1e-10)
    rep.check("fixed_point_residual", dual, 0.0, 1e-9)
    return rep


def _initial_data(cfg: RunConfig):
    from .field import gaussian
    from .ground_state import petviashvili_solve

    g = _grid(cfg)
    if cfg.data == "soliton":
        return petviashvili_solve(cfg.params(), g).Q
    return gaussian(g, cfg.width) * cfg.amplitude


def run_evolve(cfg: RunConfig) -> ExperimentReport:
    from .dynamics import duhamel_residual, evolve
    from .field import lq_norm

    u0 = _initial_data(cfg)
    stride = max(1, int(round(cfg.T / cfg.dt)) // 100)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = evolve(u0, cfg.params(), cfg.T, cfg.dt, save_every=stride)
    masses = [lq_norm(s, 2) for s in traj.states]
    drift = traj.mass_drift()
    rep = ExperimentReport(
        "evolve",
        columns={"t": traj.times.tolist(), "l2_norm": masses, "sup": [float(np.abs(s.values).max()) for s in traj.states]},
        fit={"mass_drift": drift, "duhamel_residual": duhamel_residual(traj)},
        inputs={"grid": u0.grid.header(), "dt": cfg.dt, "T": cfg.T, "data": cfg.data, "checkpoint_stride": stride},
        notes=[str(w.message) for w in caught],
    )
    rep.check("mass_drift", drift, 0.0, 1e-8)
    return rep


def run_decompose(cfg: RunConfig) -> ExperimentReport:
    from .dynamics import evolve, radiation_split

    u0 = _initial_data(cfg)
    stride = max(1, int(round(cfg.T / cfg.dt)) // 200)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = evolve(u0, cfg.params(), cfg.T, cfg.dt, save_every=stride)
    d = radiation_split(traj)
    h2 = d.v_norms(2)
    rep = ExperimentReport(
        "decompose",
        columns={"probe_t": d.probe_times.tolist(), "v_H2": h2.tolist(), "v_L2": d.v_norms(0).tolist()},
        fit={"window": list(d.window), "window_sensitivity": d.window_sensitivity},
        inputs={"grid": u0.grid.header(), "dt": cfg.dt, "T": cfg.T, "sign": cfg.sign, "data": cfg.data},
        notes=[str(w.message) for w in caught],
    )
    rep.check("identity", d.identity_defect, 0.0, 1e-12)
    if cfg.sign == "defocusing":
        rep.check("v_nonincreasing", None, passed=bool(np.all(np.diff(h2) <= 1e-12 * h2[0])))
    return rep


def run_concentrate(cfg: RunConfig) -> ExperimentReport:
    from .dynamics import band_restrict, concentration_points, verify_concentration
    from .field import RadialField, RadialGrid

    mu3, c = cfg.mu3, cfg.c_exp
    centers = (5.0, 5.0 + 3 / mu3)
    g = RadialGrid(int(cfg.n), max(cfg.rmax, centers[1] + 10), max(int(cfg.m), 512))
    h = 2 * mu3**c
    v = RadialField.from_function(g, lambda r: h * sum(np.exp(-((r - x) ** 2) / (2 * 0.05**2)) for x in centers))
    vN = band_restrict(v, cfg.dyadic_N)
    cs = concentration_points(vN, mu3, c)
    chk = verify_concentration(vN, cs)
    rep = ExperimentReport(
        "concentrate",
        columns={"point": cs.points, "abs_value": cs.values},
        fit={**chk, "J": cs.J, "threshold": cs.threshold},
        inputs={"mu3": mu3, "c_exp": c, "N": cfg.dyadic_N, "centers": list(centers), "grid": g.header()},
    )
    rep.check("count", cs.J, 2, 0)
    rep.check("separation", chk["min_separation"], passed=chk["separation_ok"])
    rep.check("maximality", chk["max_outside"], passed=chk["maximal"])
    near = all(min(abs(p - x) for p in cs.points) <= g.spacing for x in centers) if cs.points else False
    rep.check("located", None, passed=near)
    return rep


RUNNERS = {
    "admissible": run_admissible,
    "exponents": run_exponents,
    "dispersive": run_dispersive,
    "localized-dispersive": run_localized,
    "fundsol": run_fundsol,
    "kernel-decay": run_kernel,
    "ground-state": run_ground_state,
    "evolve": run_evolve,
    "decompose": run_decompose,
    "concentrate": run_concentrate,
}


# ---------------------------------------------------------------- artifacts


def summary_text(rep: ExperimentReport, cfg: RunConfig) -> str:
    lines = [f"experiment: {rep.experiment}", f"config_hash: {cfg.config_hash()}"]
    for c in rep.checks:
        lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: value={c.get('value')!r} target={c.get('target')!r}")
    lines.append(f"overall: {'PASS' if rep.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_artifacts(rep: ExperimentReport, cfg: RunConfig, out_root: Path) -> Path:
    doc = rep.to_dict(config_hash=cfg.config_hash(), versions=versions())
    doc["inputs"] = {**doc["inputs"], "config": cfg.semantic_dict()}
    validate_report(doc)
    final = out_root / cfg.experiment
    out_root.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{cfg.experiment}-", dir=out_root))
    try:
        (tmp / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        (tmp / "data.csv").write_text(rep.to_csv())
        (tmp / "summary.txt").write_text(summary_text(rep, cfg))
        if final.exists():
            shutil.rmtree(final)
        tmp.rename(final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return final


def run(cfg: RunConfig, out_root: Path | None = None) -> tuple[int, ExperimentReport]:
    cfg.validate()
    rep = RUNNERS[cfg.experiment](cfg)
    root = Path(out_root or cfg.out or os.environ.get(OUTPUT_ENV, "runs"))
    write_artifacts(rep, cfg, root)
    return (0 if rep.passed else 1), rep


# ---------------------------------------------------------------- argument parsing

FLAG_TYPES = {
    "n": int,
    "p": float,
    "sign": str,
    "dt": float,
    "T": float,
    "rmax": float,
    "m": int,
    "mu3": float,
    "epsilon_r0": float,
    "out": str,
    "workers": int,
    "c_exp": float,
    "alpha": int,
    "q": str,
    "r": str,
    "width": float,
    "amplitude": float,
    "data": str,
    "beta": int,
    "z_norm": float,
    "mu": float,
    "resolution": int,
    "dyadic_N": float,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biharmonic-lab", description="Biharmonic NLS numerical experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with base settings; flags override it")
        for key, typ in FLAG_TYPES.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    sch = sub.add_parser("report-schema")
    sch.add_argument("--out", default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", f"unreadable config file: {e}") from None
        if not isinstance(base, dict):
            raise ConfigError("config", "config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(base) - known
        if unknown:
            raise ConfigError("config", f"unknown keys {sorted(unknown)}")
    for key in FLAG_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    base["experiment"] = args.command
    return RunConfig(**base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report-schema":
        text = json.dumps(report_schema(), indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except (ConfigError, TypeError) as e:
        rec = e.record() if isinstance(e, ConfigError) else {"error": "invalid_config", "message": str(e)}
        sys.stderr.write(json.dumps(rec) + "\n")
        return 2
    status, rep = run(cfg)
    root = Path(cfg.out or os.environ.get(OUTPUT_ENV, "runs"))
    sys.stdout.write(summary_text(rep, cfg))
    sys.stdout.write(f"artifacts: {root / cfg.experiment}\n")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
