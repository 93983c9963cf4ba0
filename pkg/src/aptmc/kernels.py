"""Metropolis acceptance arithmetic for tempered moves and level swaps.

All acceptance probabilities are computed as exp(min(0, log ratio)), so the
ratio never overflows and zero-probability moves come out as exact 0.0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rwm_log_accept(log_pi_x: float, log_pi_y: float, beta: float):
    """Log acceptance probability of a symmetric-proposal move x -> y for the
    target tempered by ``beta``; vectorizes over aligned array inputs."""
    return np.minimum(0.0, beta * (np.asarray(log_pi_y) - log_pi_x))


def rwm_accept_prob(log_pi_x: float, log_pi_y: float, beta: float):
    return np.exp(rwm_log_accept(log_pi_x, log_pi_y, beta))


def swap_log_accept(log_pi_low: float, log_pi_high: float, beta_gap: float):
    """Log acceptance probability of exchanging the states of an adjacent
    level pair.  ``log_pi_low`` is the state at the colder level (larger
    beta), ``log_pi_high`` at the hotter, ``beta_gap`` their positive beta
    difference; vectorizes over aligned array inputs."""
    return np.minimum(0.0, beta_gap * (np.asarray(log_pi_high) - log_pi_low))


def swap_accept_prob(log_pi_low: float, log_pi_high: float, beta_gap: float):
    return np.exp(swap_log_accept(log_pi_low, log_pi_high, beta_gap))


@dataclass
class SwapOutcome:
    """One attempted adjacent swap; ``pair`` is 1-based, pairing levels
    (pair, pair + 1)."""

    pair: int
    accept_prob: float
    accepted: bool


@dataclass
class MoveOutcome:
    """Per-level within-temperature moves of one iteration."""

    accept_probs: np.ndarray
    accepted: np.ndarray
    increments: np.ndarray | None = None  # proposal minus current, continuous only
    sites: np.ndarray | None = None       # proposed flip sites, lattice only


def propose_swap(levels: int, rng: np.random.Generator) -> tuple[int, float]:
    """Uniform adjacent pair (1-based) and the acceptance uniform.

    The uniform is drawn even for degenerate one-pair ladders so the stream
    layout does not depend on values seen downstream.
    """
    pair = int(rng.integers(1, levels))
    u = float(rng.random())
    return pair, u
