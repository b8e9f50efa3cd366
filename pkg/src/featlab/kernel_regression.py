"""Kernel ridge regression, kernel gradient flow and kernel interpolation.

All three estimators are linear smoothers ``f(x) = K(x, X) w`` with dual
weights ``w``:

* ridge:          ``w = (K + n lam I)^{-1} Y``
* gradient flow:  ``w = K^{-1} (I - exp(-K t / n)) Y``, ``f_0 = 0``
* interpolation:  ``w = K^{-1} Y``
"""
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .errors import IllConditionedError, InputError, StepSizeError
from .spectral import BROWNIAN_BRIDGE, MIN, CoefficientVector, eigensystem, kernel_eval

CONDITION_LIMIT = 1e12

KRR = "krr"
KGF = "kgf"
INTERPOLATION = "interpolation"


@dataclass(frozen=True)
class Dataset1D:
    X: np.ndarray
    Y: np.ndarray
    noise: float = 0.0
    truth: Optional[CoefficientVector] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).ravel()
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.size < 1 or X.size != Y.size:
            raise InputError("X and Y must be non-empty and of equal length")
        if self.noise < 0:
            raise InputError("noise level must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.size


def make_dataset(f, n, noise, seed, truth=None):
    """``n`` uniform inputs on [0, 1] with ``y = f(x) + noise * N(0, 1)``."""
    if n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=n)
    Y = np.asarray(f(X), dtype=float) + noise * rng.standard_normal(n)
    return Dataset1D(X, Y, noise, truth)


def gram(kernel, X, Z=None):
    """``K(X, Z)``; symmetric ``K(X, X)`` when ``Z`` is omitted."""
    X = np.asarray(X, dtype=float).ravel()
    Z = X if Z is None else np.asarray(Z, dtype=float).ravel()
    return kernel_eval(kernel, X[:, None], Z[None, :])


def min_eigenvalue(K):
    return float(linalg.eigh(K, eigvals_only=True, subset_by_index=[0, 0])[0])


@dataclass(frozen=True)
class KernelEstimator:
    kind: str
    kernel: object
    X: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    param: Optional[float] = None
    diagnostics: dict = field(default_factory=dict, repr=False)

    def predict(self, x, chunk=8192):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.size)
        for start in range(0, x.size, chunk):
            stop = start + chunk
            out[start:stop] = gram(self.kernel, x[start:stop], self.X) @ self.weights
        return out

    def __call__(self, x):
        return self.predict(x)

    def rkhs_norm_sq(self):
        return float(self.weights @ gram(self.kernel, self.X) @ self.weights)


def _factor(A, what):
    """Cholesky factor of ``A`` after checking its 1-norm condition estimate."""
    try:
        c, lower = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise IllConditionedError(f"{what} is not positive definite", condition=np.inf) from exc
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = linalg.lapack.dpocon(c, anorm, uplo="L")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if info != 0 or cond > CONDITION_LIMIT:
        raise IllConditionedError(f"{what} condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}",
                                  condition=cond)
    return (c, lower), cond


def krr_fit(kernel, data, lam):
    if not lam > 0:
        raise InputError("ridge parameter must be positive")
    n = data.n
    K = gram(kernel, data.X)
    factor, cond = _factor(K + n * lam * np.eye(n), "regularised Gram matrix")
    w = linalg.cho_solve(factor, data.Y)
    return KernelEstimator(KRR, kernel, data.X, w, float(lam), {"condition": cond})


def interpolate(kernel, data):
    if np.unique(data.X).size != data.n:
        raise InputError("interpolation requires distinct inputs")
    K = gram(kernel, data.X)
    factor, cond = _factor(K, "Gram matrix")
    w = linalg.cho_solve(factor, data.Y)
    return KernelEstimator(INTERPOLATION, kernel, data.X, w, None, {"condition": cond})


def _markov_spectrum(kernel, X):
    """Eigenpairs of ``K(X, X)`` through its tridiagonal inverse.

    Both closed-form kernels are covariances of Gauss-Markov processes
    (Brownian motion pinned at 0, and additionally at 1 for the bridge), so on
    sorted distinct interior points the precision matrix is tridiagonal with
    off-diagonal ``-1/h_i`` and diagonal ``1/h_{i-1} + 1/h_i`` where ``h`` are
    the gaps, ``h_{-1} = x_1`` and ``h_n = 1 - x_n`` (bridge) or infinity.
    Returns ``None`` when the shortcut does not apply.
    """
    if kernel.variant not in (BROWNIAN_BRIDGE, MIN):
        return None
    order = np.argsort(X, kind="stable")
    xs = X[order]
    right = 1.0 - xs[-1] if kernel.variant == BROWNIAN_BRIDGE else np.inf
    gaps = np.concatenate(([xs[0]], np.diff(xs), [right]))
    if np.any(gaps <= 1e-300):
        return None
    inv = 1.0 / gaps
    mu, V = linalg.eigh_tridiagonal(inv[:-1] + inv[1:], -inv[1:-1], lapack_driver="stemr")
    if np.any(mu <= 0):
        return None
    return 1.0 / mu, V, order


def kernel_spectrum(kernel, X):
    """Eigenvalues (any order) and orthonormal eigenvectors of ``K(X, X)``.

    The third return value tells whether the eigenvalues came from the
    tridiagonal precision matrix (accurate to high relative precision) rather
    than a dense eigensolve.
    """
    spec = _markov_spectrum(kernel, X)
    if spec is not None:
        lam, V, order = spec
        U = np.empty_like(V)
        U[order] = V
        return lam, U, True
    lam, V = linalg.eigh(gram(kernel, X))
    return lam, V, False


def _flow_filter(lam, t, n):
    # (1 - exp(-lam t / n)) / lam, continuous at lam = 0
    out = np.full(lam.shape, t / n)
    pos = lam > 0
    out[pos] = -np.expm1(-lam[pos] * t / n) / lam[pos]
    return out


def kgf_predict(kernel, data, t, mode="closed-form", step=None):
    """Kernel gradient flow estimator at time ``t``.

    ``closed-form`` applies the spectral filter of the Gram matrix. ``euler``
    integrates ``dw/dt = (Y - K w) / n`` from ``w = 0`` with step ``step``
    (default ``0.1 n / lambda_max``), which must not exceed
    ``n / lambda_max``.
    """
    if t < 0:
        raise InputError("t must be non-negative")
    n = data.n
    diag = {}
    if mode == "closed-form":
        lam, V, exact = kernel_spectrum(kernel, data.X)
        tiny = 0.0 if exact else lam.max() * n * np.finfo(float).eps
        if np.any(lam <= tiny):
            warnings.warn("Gram matrix is numerically singular; using the t/n filter limit "
                          "on its null space", RuntimeWarning, stacklevel=2)
            diag["singular"] = True
            lam = np.where(lam <= tiny, 0.0, lam)
        w = V @ (_flow_filter(lam, float(t), n) * (V.T @ data.Y))
        diag["min_eigenvalue"] = float(lam.min())
    elif mode == "euler":
        K = gram(kernel, data.X)
        lam_max = float(linalg.eigh(K, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])
        limit = n / lam_max
        h = 0.1 * limit if step is None else float(step)
        if not 0 < h <= limit:
            raise StepSizeError(f"Euler step {h:.3e} outside (0, n/lambda_max = {limit:.3e}]")
        steps = int(np.ceil(t / h)) if t > 0 else 0
        h = t / steps if steps else 0.0
        w = np.zeros(n)
        for _ in range(steps):
            w += h * (data.Y - K @ w) / n
        diag.update(steps=steps, step=h)
    else:
        raise InputError(f"unknown mode {mode!r}")
    return KernelEstimator(KGF, kernel, data.X, w, float(t), diag)


class RiskEstimate(NamedTuple):
    value: float
    stderr: float


def risk(estimator, truth, method="basis", J=None, M=200_000, seed=0):
    """Excess L2 risk ``E_x (f_hat(x) - f*(x))^2`` under the uniform measure.

    ``basis`` expands ``f_hat`` in the kernel eigenbasis up to ``J`` terms
    (default ``max(len(truth), 1024)``) and returns the exact truncated
    distance; ``monte-carlo`` averages over ``M`` uniform draws.
    """
    if method == "basis":
        if truth.basis.kernel != estimator.kernel:
            raise InputError("truth must be expressed in the estimator's kernel eigenbasis")
        J = max(len(truth), 1024) if J is None else int(J)
        if J < len(truth):
            raise InputError("J must cover the truth coefficients")
        basis = eigensystem(estimator.kernel, J)
        coef = basis.eigenvalues * (basis.functions(estimator.X).T @ estimator.weights)
        diff = coef.copy()
        diff[: len(truth)] -= truth.coeffs
        return RiskEstimate(float(diff @ diff), 0.0)
    if method == "monte-carlo":
        x = np.random.default_rng(seed).uniform(0.0, 1.0, size=int(M))
        sq = (estimator.predict(x) - truth.expand(x)) ** 2
        return RiskEstimate(float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(sq.size)))
    raise InputError(f"unknown risk method {method!r}")


class NtkComplexity(NamedTuple):
    value: float
    quadratic_form: float
    spectral_form: float


def ntk_complexity(K, Y):
    """``sqrt(Y^T K^{-1} Y / n)`` and the eigen-sum ``sum_j (v_j^T Y)^2 / lambda_j``."""
    K = np.asarray(K, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    n = Y.size
    if K.shape != (n, n):
        raise InputError("Gram matrix and labels disagree in size")
    factor, _ = _factor(K, "NTK Gram matrix")
    quad = float(Y @ linalg.cho_solve(factor, Y))
    lam, V = linalg.eigh(K)
    spectral = float(np.sum((V.T @ Y) ** 2 / lam))
    return NtkComplexity(float(np.sqrt(quad / n)), quad, spectral)
