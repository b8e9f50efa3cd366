"""Over-parameterised Gaussian sequence model.

The truth is estimated as ``A D alpha`` with ``A`` orthogonal, ``D``
diagonal and ``alpha`` a vector, by gradient descent on
``L = ||Z - A D alpha||^2``. ``A`` moves along the orthogonal group: its
Euclidean gradient is projected onto the tangent space at ``A`` and the
step is mapped back with a QR retraction.

Also contains the diagonal-only variant ``theta_j = a_j beta_j`` trained on
``0.5 * sum_j (z_j - a_j beta_j)^2``.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import InputError, InstabilityError, StepSizeError
from .gsm import GsmInstance, sample

LOSS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class OpGsmState:
    A: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    step: int = 0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        d = np.asarray(self.d, dtype=float).ravel()
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        N = d.size
        if A.shape != (N, N) or alpha.size != N:
            raise InputError("A must be N x N and d, alpha of length N")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "alpha", alpha)

    @property
    def N(self):
        return self.d.size

    @property
    def D(self):
        return np.diag(self.d)

    def estimate(self):
        return self.A @ (self.d * self.alpha)

    def orthogonality_drift(self):
        return orthogonality_drift(self.A)


def orthogonality_drift(A):
    return float(np.linalg.norm(A.T @ A - np.eye(A.shape[1])))


def initial_state(eigenvalues, A0=None):
    """``A0`` (identity by default), ``D0 = diag(lambda^{1/2})``, ``alpha0 = 0``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < 0):
        raise InputError("D0 must be non-negative")
    A0 = np.eye(lam.size) if A0 is None else np.asarray(A0, dtype=float)
    return OpGsmState(A0, np.sqrt(lam), np.zeros(lam.size))


def _check_dims(state, Z):
    Z = np.asarray(Z, dtype=float).ravel()
    if Z.size != state.N:
        raise InputError(f"Z has length {Z.size}, state has N = {state.N}")
    return Z


def loss(state, Z):
    Z = _check_dims(state, Z)
    r = Z - state.estimate()
    return float(r @ r)


def qr_retraction(M):
    """Orthogonal factor of ``M`` with the signs fixed so that ``diag(R) > 0``."""
    Q, R = np.linalg.qr(M)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs


def _retract_rank2(A, U, V):
    """``qr_retraction(A + U V^T)`` for orthogonal ``A`` via a low-rank QR update.

    ``A = A I`` is already a QR factorisation, so updating it costs O(N^2)
    instead of a fresh O(N^3) decomposition.
    """
    if A.shape[0] <= U.shape[1]:
        return qr_retraction(A + U @ V.T)
    Q, R = linalg.qr_update(A, np.eye(A.shape[0]), U, V, check_finite=False)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def gradients(state, Z):
    """Euclidean gradients of ``L`` and the Riemannian gradient of ``A``.

    ``dL/dA = -2 r q^T`` with ``r = Z - A D alpha`` and ``q = D alpha``; its
    tangent component at ``A`` is ``A skew(A^T G)``, which for this rank-one
    gradient equals ``-(r q^T - (A q) p^T)`` with ``p = A^T r``.
    """
    Z = _check_dims(state, Z)
    q = state.d * state.alpha
    r = Z - state.A @ q
    p = state.A.T @ r
    grad_alpha = -2.0 * state.d * p
    grad_d = -2.0 * p * state.alpha
    grad_A = -(np.outer(r, q) - np.outer(state.A @ q, p))
    return grad_A, grad_d, grad_alpha, float(r @ r)


def constrained_step(state, Z, eta, freeze_A=False, freeze_D=False, check=True):
    """One simultaneous descent step on (A, D, alpha).

    Raises :class:`StepSizeError` if the loss grows by more than 1e-12.
    """
    if not eta > 0:
        raise InputError("learning rate must be positive")
    grad_A, grad_d, grad_alpha, before = gradients(state, Z)
    if freeze_A:
        A = state.A
    else:
        # A - eta grad_A = A + eta (r q^T - (A q) p^T)
        q = state.d * state.alpha
        Aq = state.A @ q
        r = _check_dims(state, Z) - Aq
        U = np.column_stack([eta * r, -eta * Aq])
        V = np.column_stack([q, state.A.T @ r])
        A = _retract_rank2(state.A, U, V)
    d = state.d if freeze_D else state.d - eta * grad_d
    alpha = state.alpha - eta * grad_alpha
    new = OpGsmState(A, d, alpha, state.step + 1)
    if check:
        after = loss(new, Z)
        if after > before + LOSS_TOLERANCE:
            raise StepSizeError(f"loss rose from {before:.6e} to {after:.6e} at step {new.step}; "
                                f"reduce eta below {eta}")
    return new


def sorted_projections(state, theta_star):
    """``f_j = u_{(j)}^T theta*`` with columns ordered by descending diagonal of D.

    Ties keep ascending column index.
    """
    order = np.argsort(-state.d, kind="stable")
    return state.A[:, order].T @ np.asarray(theta_star, dtype=float)


def _fractions(f, ps):
    cum = np.cumsum(f**2)
    total = cum[-1]
    if total == 0:
        raise InputError("alignment fraction is undefined for theta* = 0")
    return np.array([cum[p - 1] / total for p in ps])


def alignment(state, theta_star, p):
    """Share of ``||theta*||^2`` carried by the ``p`` directions with largest D."""
    if not 1 <= p <= state.N:
        raise InputError("p must lie in [1, N]")
    return float(_fractions(sorted_projections(state, theta_star), [p])[0])


def paper_truth(N):
    """``theta*_j = 1 / (N - j + 2)``: increasing, hence misaligned with a decreasing spectrum."""
    j = np.arange(1, N + 1, dtype=float)
    return 1.0 / (N - j + 2.0)


def paper_spectrum(N):
    j = np.arange(1, N + 1, dtype=float)
    return 1.0 / (j + 5.0) ** 2


@dataclass(frozen=True)
class OpGsmConfig:
    N: int = 500
    n: int = 4000
    eta: float = 0.5
    steps: int = 2000
    theta_star: Optional[np.ndarray] = field(default=None, repr=False)
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)
    A0: Optional[np.ndarray] = field(default=None, repr=False)
    p_list: Sequence[int] = (10, 100, 300)
    seed: int = 0
    freeze_A: bool = False
    freeze_D: bool = False
    Z: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.eta > 0 or self.steps < 0 or self.N < 1:
            raise InputError("need eta > 0, steps >= 0 and N >= 1")
        if any(not 1 <= p <= self.N for p in self.p_list):
            raise InputError("every p must lie in [1, N]")

    def truth(self):
        return paper_truth(self.N) if self.theta_star is None else np.asarray(self.theta_star, dtype=float)

    def spectrum(self):
        return paper_spectrum(self.N) if self.eigenvalues is None else np.asarray(self.eigenvalues, dtype=float)

    def observations(self):
        if self.Z is not None:
            return np.asarray(self.Z, dtype=float)
        return sample(GsmInstance(self.truth(), self.spectrum(), self.n, self.seed))


@dataclass(frozen=True)
class AlignmentReport:
    p_list: tuple
    loss: np.ndarray
    fractions: np.ndarray
    min_diag: np.ndarray
    max_diag: np.ndarray
    drift: np.ndarray
    sign_flips: np.ndarray
    estimates: np.ndarray = field(repr=False)
    projections: np.ndarray = field(repr=False)
    final_state: OpGsmState = field(repr=False)

    def fraction(self, p):
        return self.fractions[:, self.p_list.index(p)]

    def rows(self):
        """Per-step records ``(step, loss, fraction_p..., min_diag, max_diag, drift)``."""
        for k in range(self.loss.size):
            yield (k, self.loss[k], *self.fractions[k], self.min_diag[k], self.max_diag[k], self.drift[k])


def simulate(config, record_estimates=False):
    """Run ``config.steps`` constrained steps from the configured initial state.

    Records loss, alignment fractions, the extent of D and the orthogonality
    drift after every step (row 0 is the initial state).
    """
    theta = config.truth()
    Z = config.observations()
    state = initial_state(config.spectrum(), config.A0)
    ps = tuple(int(p) for p in config.p_list)
    T = config.steps
    losses = np.empty(T + 1)
    fracs = np.empty((T + 1, len(ps)))
    dmin, dmax, drift, flips = (np.empty(T + 1) for _ in range(4))
    estimates = np.empty((T + 1, config.N)) if record_estimates else None

    def record(k, s):
        losses[k] = loss(s, Z)
        fracs[k] = _fractions(sorted_projections(s, theta), ps)
        dmin[k], dmax[k] = s.d.min(), s.d.max()
        drift[k] = s.orthogonality_drift()
        flips[k] = np.count_nonzero(s.d < 0)
        if estimates is not None:
            estimates[k] = s.d * s.alpha

    record(0, state)
    for k in range(1, T + 1):
        state = constrained_step(state, Z, config.eta, config.freeze_A, config.freeze_D)
        record(k, state)
    return AlignmentReport(ps, losses, fracs, dmin, dmax, drift, flips, estimates,
                           sorted_projections(state, theta), state)


@dataclass(frozen=True)
class DiagonalFlow:
    a: np.ndarray
    beta: np.ndarray

    @property
    def theta(self):
        return self.a * self.beta

    @property
    def conserved(self):
        return self.a**2 - self.beta**2


def diag_only_flow(Z, a0, eta, T, blowup=1e12):
    """Gradient descent on ``0.5 * sum (z_j - a_j beta_j)^2`` from ``(a0, 0)``.

    Returns the full trajectory, rows ``0..T``.
    """
    Z = np.asarray(Z, dtype=float).ravel()
    a = np.asarray(a0, dtype=float).ravel().copy()
    if a.size != Z.size or np.any(a <= 0):
        raise InputError("a0 must be positive and match Z")
    if not eta > 0:
        raise InputError("learning rate must be positive")
    b = np.zeros_like(a)
    A_hist = np.empty((T + 1, a.size))
    B_hist = np.empty((T + 1, a.size))
    A_hist[0], B_hist[0] = a, b
    for k in range(1, T + 1):
        r = Z - a * b
        a, b = a + eta * r * b, b + eta * r * a
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))) or max(np.abs(a).max(), np.abs(b).max()) > blowup:
            raise InstabilityError(f"diagonal flow diverged at step {k}")
        A_hist[k], B_hist[k] = a, b
    return DiagonalFlow(A_hist, B_hist)


def rotate(config, Q):
    """Config with ``(Z, theta*, A0)`` replaced by ``(Q^T Z, Q^T theta*, Q^T A0)``."""
    A0 = np.eye(config.N) if config.A0 is None else config.A0
    return replace(config, Z=Q.T @ config.observations(), theta_star=Q.T @ config.truth(), A0=Q.T @ A0)
