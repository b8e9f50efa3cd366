"""Gaussian sequence model ``z_j = theta*_j + xi_j``, ``xi_j ~ N(0, 1/n)``.

Gradient flow on ``0.5 * sum_j (z_j - lambda_j^{1/2} beta_j)^2`` from zero
gives ``theta_{j,t} = (1 - exp(-lambda_j t)) z_j``, whose expected squared
error splits into a bias part ``sum_j exp(-2 lambda_j t) theta*_j^2`` and a
variance part ``n^{-1} sum_j (1 - exp(-lambda_j t))^2``.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import zeta

from ._random import keyed_normal
from .errors import InputError
from .fitting import fit_loglog
from .rates import kgf_curve_exponent


@dataclass(frozen=True)
class GsmInstance:
    theta_star: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    n: int
    seed: int = 0

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).ravel()
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        if theta.size < 1 or theta.size != lam.size:
            raise InputError("theta* and eigenvalues must be non-empty and of equal length")
        if np.any(lam <= 0):
            raise InputError("eigenvalues must be positive")
        if self.n < 1:
            raise InputError("n must be positive")
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def N(self):
        return self.theta_star.size


def sample(instance):
    """Observations ``Z``; the noise on coordinate ``j`` depends only on (seed, j)."""
    j = np.arange(1, instance.N + 1, dtype=np.uint64)
    return instance.theta_star + keyed_normal(instance.seed, j) / np.sqrt(instance.n)


def vanilla_flow(Z, lam, t):
    if t < 0:
        raise InputError("t must be non-negative")
    return -np.expm1(-np.asarray(lam) * t) * np.asarray(Z)


def vanilla_flow_euler(Z, lam, t, step):
    """Explicit Euler for ``d theta / dt = lambda (z - theta)`` (theta = lambda^{1/2} beta)."""
    Z = np.asarray(Z, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if step <= 0:
        raise InputError("step must be positive")
    steps = int(np.ceil(t / step)) if t > 0 else 0
    h = t / steps if steps else 0.0
    theta = np.zeros_like(Z)
    for _ in range(steps):
        theta += h * lam * (Z - theta)
    return theta


@dataclass(frozen=True)
class GsmTrajectory:
    times: np.ndarray
    estimates: np.ndarray
    risks: np.ndarray


def trajectory(instance, times):
    Z = sample(instance)
    times = np.asarray(times, dtype=float)
    est = np.array([vanilla_flow(Z, instance.eigenvalues, t) for t in times])
    risks = np.sum((est - instance.theta_star) ** 2, axis=1)
    return GsmTrajectory(times, est, risks)


class RiskParts(NamedTuple):
    bias: float
    variance: float

    @property
    def total(self):
        return self.bias + self.variance


def exact_risk(theta_star, lam, t, n, noise_var=1.0, tail_bias=0.0):
    """Expected ``||theta_t - theta*||^2`` with per-coordinate noise ``noise_var / n``.

    ``tail_bias`` is added to the bias to account for coordinates beyond the
    truncation (they are never fitted in finite time).
    """
    if t < 0 or n <= 0:
        raise InputError("need t >= 0 and n > 0")
    decay = np.exp(-np.asarray(lam) * t)
    bias = float(np.sum((decay * theta_star) ** 2)) + tail_bias
    variance = noise_var / n * float(np.sum(np.expm1(-np.asarray(lam) * t) ** 2))
    return RiskParts(bias, variance)


@dataclass(frozen=True)
class PowerLawFamily:
    """``lambda_j = scale j^-beta`` with boundary truth ``theta*_j = j^{-(s beta + 1)/2}``.

    ``s=None`` gives the zero signal.
    """

    beta: float
    s: Optional[float]
    scale: float = 1.0

    def __post_init__(self):
        if not self.beta > 1:
            raise InputError("beta must exceed 1")
        if self.s is not None and not self.s > 0:
            raise InputError("s must be positive")

    @property
    def truth_exponent(self):
        return (self.s * self.beta + 1.0) / 2.0

    def spectrum(self, N):
        return self.scale * np.arange(1, N + 1, dtype=float) ** -self.beta

    def truth(self, N):
        if self.s is None:
            return np.zeros(N)
        return np.arange(1, N + 1, dtype=float) ** -self.truth_exponent

    def tail_bias(self, N):
        return 0.0 if self.s is None else float(zeta(2.0 * self.truth_exponent, N + 1))


@dataclass(frozen=True)
class LearningCurve:
    n: np.ndarray
    t: np.ndarray
    bias: np.ndarray
    variance: np.ndarray
    slope: float
    predicted: object
    N: int

    @property
    def risk(self):
        return self.bias + self.variance


def default_truncation(beta, t_max, floor=4096, cap=2**23):
    # lambda_N * t_max <= 1e-3 keeps the unfitted variance tail negligible
    need = int(np.ceil((1e3 * t_max) ** (1.0 / beta)))
    return int(min(max(floor, need), cap))


def learning_curve(family, n_grid, theta_exponent, N=None, t_scale=1.0, noise_var=1.0):
    """Exact risks at ``t = t_scale * n^theta_exponent`` and their log-log slope."""
    n_grid = np.asarray(n_grid, dtype=float)
    if n_grid.size < 4:
        raise InputError("learning curve needs at least 4 grid points")
    if np.any(n_grid <= 0) or not theta_exponent > 0:
        raise InputError("n values and theta_exponent must be positive")
    t = t_scale * n_grid**theta_exponent
    N = default_truncation(family.beta, t.max()) if N is None else int(N)
    lam = family.spectrum(N)
    theta = family.truth(N)
    tail = family.tail_bias(N)
    parts = [exact_risk(theta, lam, ti, ni, noise_var, tail) for ni, ti in zip(n_grid, t)]
    bias = np.array([p.bias for p in parts])
    variance = np.array([p.variance for p in parts])
    slope = fit_loglog(n_grid, bias + variance).slope
    predicted = kgf_curve_exponent(family.s, family.beta, theta_exponent) if family.s else None
    return LearningCurve(n_grid, t, bias, variance, slope, predicted, N)
