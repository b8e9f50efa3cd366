"""Log-log least squares for learning-curve exponents."""
from typing import NamedTuple

import numpy as np

from .errors import InputError


class PowerFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_loglog(x, y, drop_smallest=0):
    """OLS of ``log y`` on ``log x`` after dropping the ``drop_smallest`` smallest x."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise InputError("x and y differ in length")
    if drop_smallest < 0:
        raise InputError("drop_smallest must be non-negative")
    keep = np.argsort(x, kind="stable")[int(drop_smallest):]
    x, y = x[keep], y[keep]
    if x.size < 4:
        raise InputError("need at least 4 points for a slope fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InputError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, intercept])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return PowerFit(float(slope), float(intercept), r2)
