"""Capacity and rate bounds for PPIR and M-PPIR over replicated databases.

The closed forms are evaluated in exact rationals. Only the achievable rate for
η < Γ/2 needs complex floating point: it is built from the roots-of-unity
constants κ_i and the solution τ of a small complex linear system.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import ImaginaryResidue, SingularSystem

TOLERANCE = 1e-9

Rate = Union[Fraction, float]


@dataclass(frozen=True)
class ProblemConfig:
    n: int
    gamma_total: int
    eta: int = 1
    lam: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.gamma_total < 1:
            raise ValueError("gamma_total must be >= 1")
        if not 1 <= self.eta <= self.gamma_total:
            raise ValueError(f"eta must lie in [1, {self.gamma_total}], got {self.eta}")
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")

    @property
    def mu(self) -> int:
        return self.lam * self.eta

    @property
    def regime(self) -> str:
        if self.n == 1:
            return "single_server"
        if 2 * self.eta >= self.gamma_total:
            return "eta_ge_half"
        if self.gamma_total % self.eta == 0:
            return "eta_le_half_integer_ratio"
        return "eta_le_half_general"


@dataclass(frozen=True)
class CapacityReport:
    config: ProblemConfig
    upper: Rate
    lower: Rate
    regime: str
    exact: Optional[Rate] = None

    def as_dict(self) -> dict:
        return {
            "n": self.config.n,
            "gamma": self.config.gamma_total,
            "eta": self.config.eta,
            "lambda": self.config.lam,
            "upper": self.upper,
            "lower": self.lower,
            "exact": self.exact,
            "regime": self.regime,
        }


@dataclass(frozen=True)
class TauSolution:
    kappa: tuple[complex, ...]
    tau: tuple[complex, ...]
    residual: float


def ppir_capacity(n: int, gamma_total: int) -> Fraction:
    """(1 + 1/n + … + 1/n^(Γ−1))^(−1); equals 1/Γ for a single server."""
    if n < 1 or gamma_total < 1:
        raise ValueError("n and gamma_total must be positive")
    return 1 / sum(Fraction(1, n**k) for k in range(gamma_total))


def _upper_eta_ge_half(n: int, gamma: int, eta: int) -> Fraction:
    return 1 / (1 + Fraction(gamma - eta, n * eta))


def mppir_upper_bound(cfg: ProblemConfig) -> Fraction:
    n, gamma, eta = cfg.n, cfg.gamma_total, cfg.eta
    if n < 2:
        raise ValueError("upper bound formula needs n >= 2; use single_server_capacity")
    if 2 * eta >= gamma:
        return _upper_eta_ge_half(n, gamma, eta)
    q = gamma // eta
    frac = Fraction(gamma, eta) - q
    inv_n = Fraction(1, n)
    return 1 / ((1 - inv_n**q) / (1 - inv_n) + frac * inv_n**q)


def kappas(n: int, eta: int) -> tuple[complex, ...]:
    root = n ** (1 / eta)
    out = []
    for i in range(eta):
        w = cmath.exp(2j * cmath.pi * i / eta)
        out.append(w / (root - w))
    return tuple(out)


def solve_tau(n: int, gamma_total: int, eta: int) -> TauSolution:
    """Solve Σ_i τ_i κ_i^(−η) = (n−1)^(Γ−η) and Σ_i τ_i κ_i^(−k) = 0 for k < η."""
    if n < 2:
        raise ValueError("the tau system needs n >= 2")
    if eta < 1 or 2 * eta > gamma_total:
        raise ValueError(f"the tau system needs 1 <= eta <= gamma/2, got eta={eta}, gamma={gamma_total}")
    kap = np.array(kappas(n, eta), dtype=complex)
    a = np.array([kap ** (-k) for k in range(1, eta + 1)])
    b = np.zeros(eta, dtype=complex)
    b[-1] = float((n - 1) ** (gamma_total - eta))
    try:
        tau = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    residual = float(np.max(np.abs(a @ tau - b)))
    if not np.isfinite(residual):
        raise SingularSystem("non-finite solution of the tau system")
    return TauSolution(tuple(complex(k) for k in kap), tuple(complex(t) for t in tau), residual)


def _lower_complex(n: int, gamma: int, eta: int) -> complex:
    sol = solve_tau(n, gamma, eta)
    num = 0j
    den = 0j
    for k, t in zip(sol.kappa, sol.tau):
        base = t * k ** (gamma - eta)
        g = 1 + 1 / k
        num += base * (g**gamma - g ** (gamma - eta))
        den += base * (g**gamma - 1)
    return num / den


def mppir_lower_bound(cfg: ProblemConfig) -> Rate:
    """Achievable rate: exact rational for η ≥ Γ/2, real float from the τ system otherwise."""
    n, gamma, eta = cfg.n, cfg.gamma_total, cfg.eta
    if n < 2:
        raise ValueError("lower bound formula needs n >= 2; use single_server_capacity")
    if 2 * eta >= gamma:
        return _upper_eta_ge_half(n, gamma, eta)
    value = _lower_complex(n, gamma, eta)
    if abs(value.imag) >= TOLERANCE:
        raise ImaginaryResidue(f"imaginary part {value.imag:.3e} at n={n}, gamma={gamma}, eta={eta}")
    return float(value.real)


def lower_bound_imaginary_residue(cfg: ProblemConfig) -> float:
    if 2 * cfg.eta >= cfg.gamma_total:
        return 0.0
    return abs(_lower_complex(cfg.n, cfg.gamma_total, cfg.eta).imag)


def single_server_capacity(cfg: ProblemConfig) -> Fraction:
    if cfg.n != 1:
        raise ValueError("single_server_capacity is defined for n == 1")
    return Fraction(cfg.eta, cfg.gamma_total)


def divisible_capacity(n: int, gamma_total: int, eta: int) -> Fraction:
    """(1 − 1/n)/(1 − (1/n)^(Γ/η)), valid when η divides Γ."""
    if gamma_total % eta:
        raise ValueError("eta must divide gamma_total")
    inv_n = Fraction(1, n)
    return (1 - inv_n) / (1 - inv_n ** (gamma_total // eta))


def capacity_report(cfg: ProblemConfig) -> CapacityReport:
    if cfg.n == 1:
        c = single_server_capacity(cfg)
        return CapacityReport(cfg, c, c, cfg.regime, c)
    upper = mppir_upper_bound(cfg)
    lower = mppir_lower_bound(cfg)
    exact = upper if abs(float(upper) - float(lower)) < TOLERANCE else None
    return CapacityReport(cfg, upper, lower, cfg.regime, exact)
