"""Dyadic bump functions and Littlewood-Paley frequency projectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import RadialField, apply_multiplier, radial_fourier, spectral_l2
from .report import ExperimentReport, FitError, fit_power_law

MIN_EXPONENT, MAX_EXPONENT = -30, 30
KINDS = ("leq", "band", "gt", "geq")


def _transition(y):
    y = np.asarray(y, dtype=float)
    pos = y > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, y, 1.0)), 0.0)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    a, b = _transition(s), _transition(1.0 - s)
    return a / (a + b)


def phi(x):
    """Radial bump: 1 on [0, 1], 0 on [2, inf), nonincreasing."""
    return smooth_step(2.0 - np.abs(np.asarray(x, dtype=float)))


def psi(x):
    """Annular bump phi(x) - phi(2x), supported in [1/2, 2]."""
    x = np.asarray(x, dtype=float)
    return phi(x) - phi(2 * x)


@dataclass(frozen=True)
class BumpPair:
    """The (phi, psi) pair. Kept as an object so alternative profiles can be swapped in."""

    def phi(self, x):
        return phi(x)

    def psi(self, x):
        return psi(x)


def dyadic_exponent(N: float) -> int:
    e = np.log2(N) if N > 0 else np.nan
    if not np.isfinite(e) or abs(e - round(e)) > 1e-12:
        raise ValueError(f"N={N} is not a power of two")
    e = int(round(e))
    if not (MIN_EXPONENT <= e <= MAX_EXPONENT):
        raise ValueError(f"dyadic exponent {e} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]")
    return e


@dataclass(frozen=True)
class DyadicProjector:
    """Fourier multiplier at dyadic scale N.

    kind: 'leq' phi(k/N), 'band' psi(k/N), 'gt' 1 - phi(k/N), 'geq' 1 - phi(2k/N)
    ('geq' keeps all bands K >= N).
    """

    N: float
    kind: str = "leq"
    bump: BumpPair = BumpPair()

    def __post_init__(self):
        dyadic_exponent(self.N)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    def multiplier(self, k):
        x = np.asarray(k, dtype=float) / self.N
        if self.kind == "leq":
            return self.bump.phi(x)
        if self.kind == "band":
            return self.bump.psi(x)
        if self.kind == "gt":
            return 1.0 - self.bump.phi(x)
        return 1.0 - self.bump.phi(2 * x)

    __call__ = multiplier


def band_range_multiplier(lo: float, hi: float, bump: BumpPair = BumpPair()):
    """Sum of band projectors P_K over dyadic lo <= K <= hi: phi(k/hi) - phi(2k/lo)."""
    dyadic_exponent(lo)
    dyadic_exponent(hi)
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    return lambda k: bump.phi(np.asarray(k) / hi) - bump.phi(2 * np.asarray(k) / lo)


def apply_projector(P: DyadicProjector, f: RadialField) -> RadialField:
    return apply_multiplier(f, P.multiplier)


def partition_error(xi, top_exponent: int = 20) -> np.ndarray:
    """|phi(xi) + sum_{K=2..2^top} psi(xi/K) - 1| pointwise."""
    xi = np.asarray(xi, dtype=float)
    total = phi(xi)
    for j in range(1, top_exponent + 1):
        total = total + psi(xi / 2.0**j)
    return np.abs(total - 1.0)


def frequency_profile(v: RadialField, scales: Sequence[float], floor: float = 1e-10) -> ExperimentReport:
    """H^2 norms of the high part P_{>=N} v and the low part P_{<=N} v across dyadic N.

    A power law N^{-eta} is fitted to the high tail for N >= 1, using only samples above
    floor * ||v||_{H^2} (lower values are roundoff).
    """
    scales = [float(N) for N in scales]
    if len(scales) < 4:
        raise FitError("frequency_profile needs at least 4 scales")
    if scales != sorted(scales):
        raise ValueError("scales must be sorted")
    for N in scales:
        dyadic_exponent(N)
    F = radial_fourier(v)
    h2 = lambda k: (1 + k * k)
    total = spectral_l2(F, h2)
    low = [spectral_l2(F, lambda k, N=N: h2(k) * phi(k / N)) for N in scales]
    high = [spectral_l2(F, lambda k, N=N: h2(k) * (1 - phi(2 * k / N))) for N in scales]
    rep = ExperimentReport(
        experiment="frequency_profile",
        columns={"N": scales, "low_norm": low, "high_norm": high},
        inputs={"grid": v.grid.header(), "floor": floor},
    )
    Ns = np.array(scales)
    hs = np.array(high)
    keep = (Ns >= 1) & (hs > floor * max(total, 1e-300))
    if keep.sum() >= 2:
        fit = fit_power_law(Ns[keep], hs[keep])
        rep.fit = {**fit, "eta": -fit["slope"], "points": int(keep.sum())}
    else:
        rep.fit = {"eta": None, "points": int(keep.sum()), "note": "tail below floor"}
    return rep
