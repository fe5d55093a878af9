"""Exponent calculus for the mass-supercritical, energy-subcritical biharmonic NLS."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np


class RegimeError(ValueError):
    """Parameters fall outside the mass-supercritical / energy-subcritical window."""


class _Infinity:
    """Symbolic +infinity for Lebesgue exponents. Its reciprocal is exactly zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("biharmonic_lab.INF")


INF = _Infinity()

Exponent = Union[float, int, Fraction, _Infinity]


def is_infinite(q: Exponent) -> bool:
    return q is INF


def reciprocal(q: Exponent) -> float:
    """1/q with 1/INF = 0."""
    if q is INF:
        return 0.0
    return 1.0 / float(q)


def parse_exponent(text: str) -> Exponent:
    """Parse '3', '2.5', 'inf' into an exponent."""
    if str(text).strip().lower() in ("inf", "infinity", "oo"):
        return INF
    return float(text)


def exponent_to_json(q: Exponent):
    return "inf" if q is INF else float(q)


def critical_exponent(n: int, p: float) -> float:
    """Critical Sobolev index s_c = n/2 - 4/(p-1)."""
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return n / 2 - 4 / (p - 1)


def is_B_admissible(q: Exponent, r: Exponent, n: int, tol: float = 1e-12) -> bool:
    """Biharmonic Strichartz admissibility: 1/q + n/(4r) = n/8, 2 <= q, r <= inf, (q, r) != (2, inf)."""
    for e in (q, r):
        if e is not INF and float(e) < 2:
            return False
    if q is not INF and r is INF and float(q) == 2:
        return False
    return abs(reciprocal(q) + n * reciprocal(r) / 4 - n / 8) <= tol


def admissibility_reason(q: Exponent, r: Exponent, n: int) -> str:
    """Short machine-friendly reason string explaining an admissibility verdict."""
    if q is not INF and r is INF and float(q) == 2:
        return "excluded endpoint"
    for e in (q, r):
        if e is not INF and float(e) < 2:
            return "exponent below 2"
    if is_B_admissible(q, r, n):
        return "admissible"
    return "scaling relation violated"


@dataclass(frozen=True)
class ModelParams:
    """Dimension, nonlinearity exponent and sign of i u_t + Lap^2 u = s|u|^{p-1}u.

    sign='focusing' means s=+1, which is the sign admitting the standing wave e^{-it}Q.
    """

    n: int
    p: float
    sign: str = "focusing"
    epsilon_r0: float = 1e-3
    check_regime: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not np.isfinite(self.p) or self.p <= 1:
            raise ValueError(f"p must be a finite real > 1, got {self.p}")
        if self.sign not in ("focusing", "defocusing"):
            raise ValueError(f"sign must be 'focusing' or 'defocusing', got {self.sign!r}")
        if not (0 < self.epsilon_r0 <= 0.1):
            raise ValueError(f"epsilon_r0 must lie in (0, 0.1], got {self.epsilon_r0}")
        if self.check_regime:
            if self.n < 5:
                raise RegimeError(f"regime requires n >= 5, got n={self.n}")
            lo, hi = 1 + 8 / self.n, 1 + 8 / (self.n - 4)
            if not (lo < self.p < hi):
                raise RegimeError(f"p={self.p} outside ({lo:.6g}, {hi:.6g}) for n={self.n}")

    @property
    def s(self) -> float:
        """+1 for focusing, -1 for defocusing."""
        return 1.0 if self.sign == "focusing" else -1.0

    @property
    def s_c(self) -> float:
        return critical_exponent(self.n, self.p)


@dataclass(frozen=True)
class DerivedExponents:
    s_c: float
    r0: float
    r0_tilde: float
    q0: float
    Q: float
    p_tilde: float

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("s_c", "r0", "r0_tilde", "q0", "Q", "p_tilde")}


def p_tilde_of(p: float) -> float:
    return 2 / p if p <= 2 else 1.0


def exponents_for(n: int, p: float, epsilon_r0: float) -> DerivedExponents:
    """Solve the defining identities for (r0, r0~, q0, Q) without any range checks.

    epsilon_r0 = 0 is accepted here so limiting values can be inspected.
    """
    if n <= 4:
        raise RegimeError("exponent calculus needs n > 4")
    r0 = 2 * n / (n - 4) - epsilon_r0
    inv_rt = 1 / r0 - 1 / n
    r0_tilde = np.inf if inv_rt == 0 else 1 / inv_rt
    inv_q0 = n / 8 - n / (4 * r0)
    q0 = np.inf if inv_q0 == 0 else 1 / inv_q0
    denom = (n + 2) / (2 * n) - inv_rt
    Q = (p - 1) / denom
    return DerivedExponents(
        s_c=critical_exponent(n, p), r0=r0, r0_tilde=r0_tilde, q0=q0, Q=Q, p_tilde=p_tilde_of(p)
    )


def derived_exponents(params: ModelParams) -> DerivedExponents:
    """Derived exponents for params, validated against their range constraints."""
    if params.n < 5:
        raise RegimeError("derived exponents require n >= 5")
    d = exponents_for(params.n, params.p, params.epsilon_r0)
    Qmax = 2 * params.n / (params.n - 4)
    if not (2 <= d.Q < Qmax):
        raise RegimeError(f"Q={d.Q} leaves [2, {Qmax})")
    return d
