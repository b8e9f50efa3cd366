"""Closed-form convergence exponents for kernel regression.

Exponents are returned as powers: a risk of order ``n^-0.75`` is reported as
``n_exponent = -0.75``. Logarithmic factors are dropped and mentioned in the
label only.
"""
import math
from dataclasses import dataclass
from typing import Optional

from .errors import InputError

FIXED_D = "fixed-d"
HIGH_D_KRR = "high-d-krr"
HIGH_D_INTERP = "high-d-interp"

# closed-interval endpoints are matched with this slack
_EPS = 1e-12


@dataclass(frozen=True)
class RateQuery:
    regime: str
    s: float
    beta: Optional[float] = None
    gamma: Optional[float] = None
    theta: Optional[float] = None
    estimator: str = "KGF"

    def __post_init__(self):
        if self.regime not in (FIXED_D, HIGH_D_KRR, HIGH_D_INTERP):
            raise InputError(f"unknown regime {self.regime!r}")
        if self.estimator not in ("KGF", "KRR"):
            raise InputError("estimator must be 'KGF' or 'KRR'")

    def evaluate(self):
        if self.regime == FIXED_D:
            if self.theta is None:
                return RateResult(-minimax_exponent(self.s, self.beta, self.estimator),
                                  label=f"minimax {self.estimator}")
            return kgf_curve_exponent(self.s, self.beta, self.theta, self.estimator)
        if self.regime == HIGH_D_KRR:
            return highdim_krr_exponents(self.s, self.gamma)
        return interpolation_exponent(self.s, self.gamma)


@dataclass(frozen=True)
class RateResult:
    n_exponent: Optional[float] = None
    d_exponent: Optional[float] = None
    saturated: bool = False
    inconsistent: bool = False
    period: Optional[int] = None
    branch: Optional[str] = None
    label: str = ""


def _check_fixed(s, beta):
    if not s > 0:
        raise InputError("s must be positive")
    if beta is None or not beta > 1:
        raise InputError("beta must exceed 1")


def _effective_s(s, estimator):
    # KRR saturates: smoothness beyond s = 2 is not exploited
    return min(s, 2.0) if estimator == "KRR" else s


def kgf_curve_exponent(s, beta, theta, estimator="KGF"):
    """Learning-curve exponent of early-stopped gradient flow with ``t ~ n^theta``.

    ``-min(s theta, 1 - theta/beta)`` for ``theta < beta``; saturated
    (risk bounded below, up to log factors) otherwise.
    """
    _check_fixed(s, beta)
    if not theta > 0:
        raise InputError("theta must be positive")
    if theta >= beta:
        return RateResult(saturated=True, label="interpolating regime, risk ~ Omega(1) up to logs")
    s_eff = _effective_s(s, estimator)
    bias = s_eff * theta
    variance = 1.0 - theta / beta
    which = "bias" if bias < variance else "variance" if variance < bias else "balanced"
    label = f"{estimator} bias and variance balanced" if which == "balanced" else f"{estimator} {which}-dominated"
    return RateResult(n_exponent=-min(bias, variance), branch=which, label=label)


def optimal_theta(s, beta, estimator="KGF"):
    _check_fixed(s, beta)
    s_eff = _effective_s(s, estimator)
    if math.isinf(s_eff):
        return 0.0
    return beta / (s_eff * beta + 1.0)


def minimax_exponent(s, beta, estimator="KGF"):
    """Optimal rate ``s beta / (s beta + 1)`` (positive number)."""
    _check_fixed(s, beta)
    s_eff = _effective_s(s, estimator)
    if math.isinf(s_eff):
        return 1.0
    return s_eff * beta / (s_eff * beta + 1.0)


def sobolev_source(r, m, d):
    """``(beta, s)`` for a W^{r,2} target learned with the W^{m,2} kernel on R^d."""
    if not m > d / 2:
        raise InputError("W^{m,2} is an RKHS only for m > d/2")
    return 2.0 * m / d, r / m


def _period(gamma, length):
    # gamma in (p * length, (p + 1) * length]
    p = max(int(math.ceil(gamma / length)) - 1, 0)
    while p > 0 and gamma <= p * length + _EPS:
        p -= 1
    while gamma > (p + 1) * length + _EPS:
        p += 1
    return p


def highdim_krr_exponents(s, gamma):
    """Best-tuned KRR risk exponents when ``n ~ d^gamma``.

    Returns the d-exponent of the risk together with the period index ``p``
    and the branch within that period. For ``s > 2`` the ``s = 2`` formulas
    apply.
    """
    if not s > 0 or not gamma > 0:
        raise InputError("s and gamma must be positive")
    s = min(float(s), 2.0)
    p = _period(gamma, 1.0 + s)
    base = p + p * s
    if s < 1:
        if gamma <= base + s + _EPS:
            branch, d_exp = "i", -(gamma - p)
        else:
            branch, d_exp = "ii", -(p + 1) * s
    else:
        if gamma <= base + 1 + _EPS:
            branch, d_exp = "i", -(gamma - p)
        elif gamma <= base + 2 * s - 1 + _EPS:
            branch, d_exp = "ii", -(gamma - p + p * s + 1) / 2.0
        else:
            branch, d_exp = "iii", -(p + 1) * s
    return RateResult(n_exponent=d_exp / gamma, d_exponent=d_exp, period=p, branch=branch,
                      label=f"period {p} branch ({branch})")


def interpolation_exponent(s, gamma):
    """Exponent of ``d^{l-gamma} + d^{gamma-l-1} + d^{-(l+1)s}``, ``l = floor(gamma)``."""
    if s < 0 or not gamma > 0:
        raise InputError("need s >= 0 and gamma > 0")
    l = math.floor(gamma + _EPS)
    d_exp = max(l - gamma, gamma - l - 1, -(l + 1) * s)
    d_exp = 0.0 if abs(d_exp) <= _EPS else d_exp
    return RateResult(n_exponent=d_exp / gamma, d_exponent=d_exp, inconsistent=d_exp == 0.0,
                      period=l, label="inconsistent" if d_exp == 0.0 else f"l = {l}")
