"""Evolve the ground state and track how far the orbit modulus drifts from |Q|.

Prints the deviation at checkpoints and a log-linear growth rate, for several time steps.
"""

import argparse

import numpy as np

from biharmonic_lab.dynamics import evolve
from biharmonic_lab.field import RadialField, apply_multiplier
from biharmonic_lab.ground_state import petviashvili_solve
from biharmonic_lab.params import ModelParams


def deviation_curve(Q, params, T: float, dt: float, save_every: int):
    traj = evolve(Q, params, T, dt, save_every=save_every, warn=False)
    dev = np.array([np.max(np.abs(np.abs(s.values) - np.abs(Q.values))) for s in traj.states])
    return np.asarray(traj.times), dev


def linearized_growth_rate(Q, p: float) -> float:
    """Largest real growth rate of perturbations of the orbit e^{-it}Q.

    With w = a + ib: a_t = -L_- b, b_t = L_+ a, so lambda^2 is the top eigenvalue of -L_- L_+,
    where L_+- = Delta^2 + 1 - (p or 1) Q^{p-1}.
    """
    g = Q.grid
    m = g.m
    eye = np.eye(m)
    bilap = np.column_stack([apply_multiplier(RadialField(g, eye[:, j]), lambda k: k**4 + 1).values.real for j in range(m)])
    q = np.abs(Q.values) ** (p - 1)
    Lp = bilap - np.diag(p * q)
    Lm = bilap - np.diag(q)
    ev = np.linalg.eigvals(-Lm @ Lp)
    return float(np.sqrt(np.max(ev.real)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=2 * np.pi)
    ap.add_argument("--dts", type=float, nargs="+", default=[1e-3, 1e-4])
    ap.add_argument("--p", type=float, default=3.0)
    args = ap.parse_args()

    params = ModelParams(5, args.p, "focusing")
    Q = petviashvili_solve(params).Q
    lam = linearized_growth_rate(Q, args.p)
    print(f"linearized growth rate {lam:.4f}, amplification over T: {np.exp(lam * args.T):.3g}")
    for dt in args.dts:
        steps = int(np.ceil(args.T / dt))
        h = args.T / steps
        every = max(1, steps // 200)
        t, dev = deviation_curve(Q, params, args.T, h, every)
        print(f"dt={h:.3e}")
        for tk in (0.1, 0.5, 1.0, 2.0, 4.0, args.T):
            i = int(np.argmin(np.abs(t - tk)))
            print(f"  t={t[i]:6.3f}  max||u|-|Q|| = {dev[i]:.3e}")
        # growth rate from the window between the splitting seed and saturation
        sel = (dev > 5e-3) & (dev < 0.3)
        if sel.sum() >= 5:
            rate = np.polyfit(t[sel], np.log(dev[sel]), 1)[0]
            print(f"  exponential growth rate ~ {rate:.3f}")


if __name__ == "__main__":
    main()
