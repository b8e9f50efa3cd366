"""Two-layer ReLU network ``f(x) = a^T relu(W^T x) / sqrt(m)`` on single-index data.

Provides full-batch gradient descent, the label/feature alignment fraction
of the hidden representation, and one-step gradient diagnostics.
"""
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import InputError, InstabilityError


def relu(z):
    return np.maximum(z, 0.0)


def default_link(z):
    return z + 0.5 * z**2


@dataclass(frozen=True)
class TwoLayerNet:
    W: np.ndarray = field(repr=False)  # d x m
    a: np.ndarray = field(repr=False)  # m

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        a = np.asarray(self.a, dtype=float).ravel()
        if W.ndim != 2 or W.shape[1] != a.size or a.size < 1:
            raise InputError("W must be d x m and a of length m")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(a))):
            raise InputError("weights must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)

    @property
    def d(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.W.shape[1]

    def features(self, X):
        """Hidden representation ``relu(X W) / sqrt(m)``, shape ``(n, m)``."""
        return relu(np.atleast_2d(X) @ self.W) / np.sqrt(self.m)

    def __call__(self, X):
        return forward(self, X)


def forward(net, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != net.d:
        raise InputError(f"inputs have dimension {X.shape[-1]}, network expects {net.d}")
    out = net.features(X) @ net.a
    return out if X.ndim > 1 else float(out[0])


def init_net(d, m, seed, symmetric=False, readout_std=1.0):
    """Gaussian initialisation: ``W_ij ~ N(0, 1/d)``, ``a_r ~ N(0, readout_std^2)``.

    ``symmetric`` duplicates the first ``m/2`` units with negated readout so
    the initial output is identically zero. ``readout_std = 1/sqrt(m)`` is the
    small-readout scaling under which one large first-layer step develops a
    spike along the target direction.
    """
    if d < 1 or m < 1 or not readout_std > 0:
        raise InputError("need d, m >= 1 and a positive readout scale")
    rng = np.random.default_rng(seed)
    if symmetric:
        if m < 2 or m % 2:
            raise InputError("symmetric initialisation needs an even width m >= 2")
        W = rng.standard_normal((d, m // 2)) / np.sqrt(d)
        a = readout_std * rng.standard_normal(m // 2)
        return TwoLayerNet(np.hstack([W, W]), np.concatenate([a, -a]))
    return TwoLayerNet(rng.standard_normal((d, m)) / np.sqrt(d), readout_std * rng.standard_normal(m))


def mse(net, X, Y):
    r = forward(net, X) - Y
    return 0.5 * float(r @ r) / Y.size


def gradients(net, X, Y):
    """Gradients of ``0.5 * mean((f(X) - Y)^2)`` w.r.t. ``(W, a)``.

    The ReLU derivative at 0 is taken as 0.
    """
    n = Y.size
    pre = X @ net.W
    act = relu(pre)
    res = act @ net.a / np.sqrt(net.m) - Y
    grad_a = act.T @ res / (n * np.sqrt(net.m))
    grad_W = X.T @ ((pre > 0) * np.outer(res, net.a)) / (n * np.sqrt(net.m))
    return grad_W, grad_a


@dataclass(frozen=True)
class SingleIndexTask:
    d: int
    n: int
    noise: float = 0.0
    seed: int = 0
    link: Callable = field(default=default_link, repr=False)
    beta_star: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.beta_star is None:
            v = np.random.default_rng([self.seed, 1]).standard_normal(self.d)
            object.__setattr__(self, "beta_star", v / np.linalg.norm(v))
        b = np.asarray(self.beta_star, dtype=float)
        if b.shape != (self.d,) or abs(np.linalg.norm(b) - 1.0) > 1e-12:
            raise InputError("beta_star must be a unit vector of length d")

    def sample(self):
        """``x ~ N(0, I_d)``, ``y = link(<x, beta*>) + noise * eps``."""
        rng = np.random.default_rng([self.seed, 0])
        X = rng.standard_normal((self.n, self.d))
        Y = self.link(X @ self.beta_star) + self.noise * rng.standard_normal(self.n)
        return X, Y


@dataclass(frozen=True)
class Trajectory:
    steps: np.ndarray
    losses: np.ndarray
    nets: list = field(repr=False)


def train_gd(net, X, Y, eta, steps, record_every=1, blowup=1e6):
    """Full-batch gradient descent on half mean squared error.

    ``losses[k]`` is the training loss after ``k`` steps; snapshots are kept
    every ``record_every`` steps (and at the end).
    """
    if eta < 0 or steps < 0 or record_every < 1:
        raise InputError("need eta >= 0, steps >= 0, record_every >= 1")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    losses = np.empty(steps + 1)
    losses[0] = mse(net, X, Y)
    kept_steps, nets = [0], [net]
    W, a = net.W.copy(), net.a.copy()
    cur = net
    for k in range(1, steps + 1):
        gW, ga = gradients(cur, X, Y)
        W, a = W - eta * gW, a - eta * ga
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(a))):
            raise InstabilityError(f"weights became non-finite at step {k}")
        cur = TwoLayerNet(W, a)
        losses[k] = mse(cur, X, Y)
        if losses[k] > blowup * max(losses[0], 1e-12):
            raise InstabilityError(f"training loss diverged at step {k}; reduce eta")
        if k % record_every == 0 or k == steps:
            kept_steps.append(k)
            nets.append(cur)
    return Trajectory(np.array(kept_steps), losses, nets)


def label_projections(Phi, Y, rtol=None):
    """``f_j = v_j^T Y / sqrt(n)`` along the sample-space singular vectors of ``Phi``.

    ``Phi`` is ``(n, m)``; singular vectors come in descending singular-value
    order and those with numerically zero singular value give ``f_j = 0``.
    """
    n = Y.size
    U, s, _ = np.linalg.svd(Phi, full_matrices=False)
    if rtol is None:
        rtol = max(Phi.shape) * np.finfo(float).eps
    f = U.T @ Y / np.sqrt(n)
    f[s <= rtol * (s[0] if s.size else 0.0)] = 0.0
    return f, s


def feature_alignment(net, X, Y, p):
    """Share of the label mass in the top-``p`` singular directions of the features."""
    ps = np.atleast_1d(p)
    if np.any(ps < 1) or np.any(ps > net.m):
        raise InputError("p must lie in [1, m]")
    f, _ = label_projections(net.features(X), np.asarray(Y, dtype=float))
    cum = np.cumsum(f**2)
    total = cum[-1]
    if total == 0:
        raise InputError("labels are orthogonal to the feature row space")
    out = cum[np.minimum(ps, cum.size) - 1] / total
    return float(out[0]) if np.ndim(p) == 0 else out


class OneStepDiagnostics(NamedTuple):
    rank1_residual: float
    leading_alignment: float
    W1: np.ndarray


def one_step_analysis(net0, X, Y, eta, beta_star):
    """Spike structure after one large first-layer step ``W1 = W0 + eta sqrt(m) G0``.

    ``G0`` is the negative gradient of the training loss w.r.t. ``W``.
    ``rank1_residual`` is ``||G0 - s1 u1 v1^T||_F / ||G0||_F`` and
    ``leading_alignment`` is ``<u1(W1), beta*>^2`` for the top left singular
    vector of ``W1``.
    """
    gW, _ = gradients(net0, np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
    G0 = -gW
    s = np.linalg.svd(G0, compute_uv=False)
    total = float(np.sqrt(np.sum(s**2)))
    if total == 0:
        raise InputError("first-step gradient vanishes")
    residual = float(np.sqrt(np.sum(s[1:] ** 2))) / total
    W1 = net0.W + eta * np.sqrt(net0.m) * G0
    u1 = np.linalg.svd(W1, full_matrices=False)[0][:, 0]
    return OneStepDiagnostics(residual, float(np.dot(u1, beta_star) ** 2), W1)
