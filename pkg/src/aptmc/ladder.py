"""Inverse-temperature ladders and their unconstrained parameterization.

A ladder 1 = beta_1 > ... > beta_L > 0 is parameterized by rho in R^{L-1}
through log beta_{l+1} = log beta_l - exp(rho_l), which makes every real
vector a valid ladder and turns the spacing tuning into an unconstrained
recursion.  Log-inverse-temperatures are the primary representation; betas
are derived, so arbitrarily cold levels never underflow the parameterization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TemperatureLadder:
    """Strictly decreasing inverse temperatures with beta_1 = 1."""

    log_betas: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.log_betas, float)
        object.__setattr__(self, "log_betas", lb)
        if lb.ndim != 1 or lb.size < 1:
            raise ValueError("log_betas must be a nonempty vector")
        if lb[0] != 0.0:
            raise ValueError("top level must have beta = 1 (log beta = 0)")
        if lb.size > 1 and not (np.diff(lb) < 0).all():
            raise ValueError("inverse temperatures must be strictly decreasing")

    @property
    def levels(self) -> int:
        return self.log_betas.size

    @property
    def betas(self) -> np.ndarray:
        return np.exp(self.log_betas)

    def gaps(self) -> np.ndarray:
        """Adjacent differences beta_l - beta_{l+1}, computed from log betas
        so tight ladders at tiny beta keep relative accuracy."""
        lb = self.log_betas
        return -np.exp(lb[:-1]) * np.expm1(lb[1:] - lb[:-1])


def betas_from_rho(rho: np.ndarray) -> TemperatureLadder:
    """Ladder with log beta_{l+1} = -(exp(rho_1) + ... + exp(rho_l))."""
    rho = np.asarray(rho, float)
    if rho.ndim != 1:
        raise ValueError("rho must be a vector")
    log_betas = np.empty(rho.size + 1)
    log_betas[0] = 0.0
    np.cumsum(-np.exp(rho), out=log_betas[1:])
    return TemperatureLadder(log_betas)


def rho_from_betas(ladder: TemperatureLadder) -> np.ndarray:
    """Inverse of ``betas_from_rho``: rho_l = log(log beta_l - log beta_{l+1})."""
    return np.log(-np.diff(ladder.log_betas))


def project_rho(rho: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    """Componentwise clamp of rho to [lo, hi]."""
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("rho bounds must satisfy lo < hi")
    return np.clip(rho, lo, hi)
