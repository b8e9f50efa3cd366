"""Mercer kernels on [0, 1] with explicit eigensystems.

Two kernels have closed-form spectra under the uniform measure on [0, 1]:

* the Brownian-bridge kernel ``k1(x, y) = min(x, y) - x y`` with
  ``lambda_j = 1 / (pi j)^2`` and ``psi_j(x) = sqrt(2) sin(j pi x)``;
* the Brownian-motion (min) kernel ``k2(x, y) = min(x, y)`` with
  ``lambda_j = 4 / (pi (2j - 1))^2`` and
  ``psi_j(x) = sqrt(2) sin((2j - 1) pi x / 2)``.

A third, synthetic variant carries only a power-law spectrum
``scale * j**-beta`` and is used for sequence-space experiments.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import CapabilityError, InputError, QuadratureError

BROWNIAN_BRIDGE = "brownian_bridge"
MIN = "min"
POWER_LAW = "power_law"

_VARIANTS = (BROWNIAN_BRIDGE, MIN, POWER_LAW)


@dataclass(frozen=True)
class MercerKernel1D:
    variant: str
    beta: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise InputError(f"unknown kernel variant {self.variant!r}")
        if self.variant == POWER_LAW:
            if self.beta is None or self.beta <= 1:
                raise InputError("power-law kernel needs beta > 1")
            if self.scale <= 0:
                raise InputError("power-law scale must be positive")

    @property
    def has_closed_form(self):
        return self.variant != POWER_LAW

    def __call__(self, x, y):
        return kernel_eval(self, x, y)


K1 = MercerKernel1D(BROWNIAN_BRIDGE)
K2 = MercerKernel1D(MIN)


def power_law_kernel(beta, scale=1.0):
    return MercerKernel1D(POWER_LAW, beta=float(beta), scale=float(scale))


def _check_unit_interval(*arrays):
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.size and (not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0):
            raise InputError("kernel inputs must lie in [0, 1]")


def kernel_eval(kernel, x, y):
    """Evaluate ``kernel`` at broadcast pairs ``(x, y)``."""
    if not kernel.has_closed_form:
        raise CapabilityError("power-law kernel has no closed-form evaluator")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_unit_interval(x, y)
    lo = np.minimum(x, y)
    if kernel.variant == MIN:
        out = lo
    else:
        out = lo * (1.0 - np.maximum(x, y))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EigenSequence:
    """First ``J`` eigenpairs of a Mercer kernel.

    ``eigenvalues`` is non-increasing and strictly positive. Eigenfunctions
    are available through :meth:`functions` for the closed-form kernels only.
    """

    kernel: MercerKernel1D
    eigenvalues: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise InputError("need at least one eigenvalue")
        if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
            raise InputError("eigenvalues must be positive and non-increasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def J(self):
        return self.eigenvalues.size

    def frequencies(self, J=None):
        j = np.arange(1, (J or self.J) + 1, dtype=float)
        if self.kernel.variant == BROWNIAN_BRIDGE:
            return np.pi * j
        if self.kernel.variant == MIN:
            return np.pi * (2.0 * j - 1.0) / 2.0
        raise CapabilityError("power-law spectrum carries no eigenfunctions")

    def functions(self, x, J=None):
        """Matrix ``Psi[i, j] = psi_{j+1}(x_i)`` of shape ``(len(x), J)``."""
        omega = self.frequencies(J)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        _check_unit_interval(x)
        return np.sqrt(2.0) * np.sin(np.multiply.outer(x, omega))


def eigensystem(kernel, J):
    if int(J) != J or J < 1:
        raise InputError("J must be a positive integer")
    j = np.arange(1, int(J) + 1, dtype=float)
    if kernel.variant == BROWNIAN_BRIDGE:
        lam = 1.0 / (np.pi * j) ** 2
    elif kernel.variant == MIN:
        lam = 4.0 / (np.pi * (2.0 * j - 1.0)) ** 2
    elif kernel.variant == POWER_LAW:
        lam = kernel.scale * j ** (-kernel.beta)
    else:  # pragma: no cover - guarded by MercerKernel1D
        raise CapabilityError(kernel.variant)
    return EigenSequence(kernel, lam)


@dataclass(frozen=True)
class CoefficientVector:
    coeffs: np.ndarray
    basis: EigenSequence

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise InputError("coefficients must be one-dimensional")
        if c.size > self.basis.J:
            raise InputError("more coefficients than basis eigenpairs")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.size

    @property
    def eigenvalues(self):
        return self.basis.eigenvalues[: self.coeffs.size]

    def norm_sq(self):
        return float(self.coeffs @ self.coeffs)

    def expand(self, x):
        """Evaluate ``sum_j theta_j psi_j(x)``."""
        return self.basis.functions(x, len(self)) @ self.coeffs

    def rkhs_weights(self):
        """``beta_j = lambda_j^{-1/2} theta_j``."""
        return self.coeffs / np.sqrt(self.eigenvalues)


@dataclass(frozen=True)
class SourceProfile:
    s: float
    R: float = np.inf

    def __post_init__(self):
        if not self.s >= 0:
            raise InputError("source condition s must be non-negative")

    def admits(self, coeffs):
        if np.isinf(self.s):
            return False
        norm = power_norm(coeffs, self.s)
        return not norm.diverging and norm.value <= self.R


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def gauss_legendre(panels, order=16):
    """Nodes and weights of composite Gauss-Legendre on [0, 1]."""
    if order == 16:
        t, w = _GL_NODES, _GL_WEIGHTS
    else:
        t, w = np.polynomial.legendre.leggauss(order)
    h = 1.0 / panels
    left = np.arange(panels) * h
    nodes = (left[:, None] + 0.5 * h * (t + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, panels)
    return nodes, weights


def project(f, basis, J=None, tol=1e-12, max_panels=2**15):
    """L2 coefficients ``theta_j = <f, psi_j>`` for ``j <= J``.

    Composite 16-point Gauss-Legendre, doubling the panel count until two
    successive estimates agree to ``tol`` in every coefficient.
    """
    J = basis.J if J is None else int(J)
    if J < 1 or J > basis.J:
        raise InputError("J must be between 1 and the basis size")
    omega = basis.frequencies(J)
    panels = 1 << max(0, int(np.ceil(np.log2(max(J, 1) / 4.0))))

    def estimate(p):
        x, w = gauss_legendre(p)
        fx = np.asarray(f(x), dtype=float)
        if fx.shape != x.shape:
            fx = np.broadcast_to(fx, x.shape)
        return np.sqrt(2.0) * (np.sin(np.multiply.outer(omega, x)) @ (w * fx))

    prev = estimate(panels)
    gap = np.inf
    while panels < max_panels:
        panels *= 2
        cur = estimate(panels)
        gap = float(np.max(np.abs(cur - prev)))
        if gap <= tol:
            return CoefficientVector(cur, basis)
        prev = cur
    raise QuadratureError(f"projection did not converge: gap {gap:.3e}", achieved=gap)


class PowerNorm(NamedTuple):
    value: float
    diverging: bool


def power_norm(coeffs, s, shrink=1.05):
    """``(sum_j lambda_j^{-s} theta_j^2)^{1/2}`` with a tail-growth flag.

    The terms are grouped into dyadic windows ``[2^k, 2^{k+1})``; the sum is
    flagged as diverging when either of the last two window ratios fails to
    shrink by at least ``shrink``.
    """
    if s < 0:
        raise InputError("s must be non-negative")
    theta = coeffs.coeffs
    terms = coeffs.eigenvalues ** (-float(s)) * theta**2
    value = float(np.sqrt(terms.sum()))
    edges = [0]
    while edges[-1] < terms.size:
        edges.append(min(2 * edges[-1] + 1, terms.size))
    windows = np.add.reduceat(terms, edges[:-1]) if terms.size else np.zeros(0)
    diverging = False
    # the last window may be partial; compare complete ones only
    full = windows[: len(edges) - 2] if edges[-1] != 2 * edges[-2] + 1 else windows
    for prev, cur in zip(full[-3:-1], full[-2:]):
        if prev > 0 and cur * shrink > prev:
            diverging = True
    return PowerNorm(value, diverging)
