"""Incremental gradient learning rules for in-parameter-linear models.

Each step function applies the textbook recursion to the weights and also
returns the same update written as a time-variant linear system

    state(k+1) = A(k) @ state(k) + B(k) @ u(k)

so the stability monitor can inspect the local matrix of dynamics ``A(k)``.
For GD, NGD and RLS the state is ``w``; for ADAM it is the extended vector
``[w(k-1), w(k), m(k-1), m(k)]``.

All rules minimise ``Q = e**2 / 2`` with ``e = y - w.g``, so the gradient is
``-e * g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Union

import numpy as np

from . import _specs
from .errors import ConfigError, DivergenceError, DomainError
from .linalg import Mat, Vec, as_mat, as_vec


@dataclass(frozen=True)
class SampleStep:
    k: int
    y: float
    g: Vec
    e: float
    eta: Union[float, Vec]


@dataclass(frozen=True)
class StateSpaceStep:
    """One update as ``A @ state + B @ u``.

    When ``A == I - a b^T`` for vectors ``a``, ``b`` the factors are kept in
    ``rank1`` so monitors can use closed forms instead of iterative solvers.
    """

    A: Mat
    B: Mat
    u: Vec
    extended: bool = False
    rank1: Optional[tuple[Vec, Vec]] = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def apply(self, state: Vec) -> Vec:
        return self.A @ state + self.B @ self.u


class StepResult(NamedTuple):
    w: Vec
    ss: StateSpaceStep
    sample: SampleStep
    state: "LearnerState"


@dataclass(frozen=True)
class GdState:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError("gd needs mu > 0")


@dataclass(frozen=True)
class NgdState:
    """Normalised GD (NLMS). Stable in the excited direction for ``0 < mu < 2``."""

    mu: float
    eps: float = 1e-8

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError("ngd needs mu > 0")
        if not self.eps >= 0:
            raise ConfigError("ngd needs eps >= 0")


@dataclass(frozen=True)
class RlsState:
    """Exponentially weighted RLS; ``P`` estimates the inverse correlation matrix."""

    P: Mat
    mu: float = 0.99
    delta: float = 100.0

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ConfigError("rls forgetting factor mu must be in (0, 1]")
        if not self.delta > 0:
            raise ConfigError("rls needs delta > 0")

    @classmethod
    def initial(cls, n: int, mu: float = 0.99, delta: float = 100.0) -> "RlsState":
        return cls(P=delta * np.eye(n), mu=mu, delta=delta)


@dataclass(frozen=True)
class AdamState:
    """ADAM moments plus the one-step-delayed values the extended form needs.

    ``k`` counts updates applied so far. ``prev_w``/``prev_m``/``prev_eta`` are
    ``w(k-1)``, ``m(k-1)`` and ``eta(k-1)``; before the first update they are
    chosen so that ``w(0) = w(-1) - eta(-1) * m(-1)`` holds (``prev_w = None``
    stands for "same as current w").
    """

    m: Vec
    v: Vec
    mu: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mode: str = "scalar"
    k: int = 0
    prev_eta: Union[float, Vec] = 0.0
    prev_m: Optional[Vec] = None
    prev_w: Optional[Vec] = None

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("adam needs beta1, beta2 in [0, 1)")
        if not (self.eps > 0 and self.mu > 0):
            raise ConfigError("adam needs eps > 0 and mu > 0")
        if self.mode not in ("scalar", "elementwise"):
            raise ConfigError("adam mode must be scalar or elementwise")

    @classmethod
    def initial(cls, n: int, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), **kwargs)

    def step_size(self) -> Union[float, Vec]:
        """``eta(k)`` for the update that uses ``m(k)``.

        ``m(k)`` and ``v(k)`` both hold the gradients of steps ``0..k-1``; the
        bias corrections use that count. With no gradients yet ``m`` is zero and
        the step size is defined as 0.
        """
        if self.k == 0:
            return 0.0 if self.mode == "scalar" else np.zeros_like(self.v)
        v_hat = self.v / (1.0 - self.beta2**self.k)
        scale = self.mu / (1.0 - self.beta1**self.k)
        if self.mode == "scalar":
            return scale / (np.sqrt(np.mean(v_hat)) + self.eps)
        return scale / (np.sqrt(v_hat) + self.eps)


LearnerState = Union[GdState, NgdState, RlsState, AdamState]


def _prepare(w, g, y) -> tuple[Vec, Vec, float]:
    w = as_vec(w, "weights")
    g = as_vec(g, "features")
    if w.size != g.size:
        raise DomainError(f"weights ({w.size}) and features ({g.size}) differ in length")
    y = float(y)
    if not math.isfinite(y):
        raise DomainError("target is not finite")
    return w, g, y


def _finite(k: int, *arrays) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise DivergenceError(k)


def _rank1_gd(w: Vec, g: Vec, y: float, eta: float, k: int) -> tuple[Vec, StateSpaceStep, SampleStep]:
    n = w.size
    with np.errstate(over="ignore", invalid="ignore"):
        e = y - float(g @ w)
        w_next = w + eta * e * g
        A = np.eye(n) - eta * np.outer(g, g)
    _finite(k, w_next, A)
    ss = StateSpaceStep(A=A, B=eta * np.eye(n), u=y * g, rank1=(eta * g, g))
    return w_next, ss, SampleStep(k=k, y=y, g=g, e=e, eta=eta)


def gd_step(w, g, y, s: GdState, k: int = 0) -> StepResult:
    """Fixed-rate gradient step ``w + mu * e * g``."""
    w, g, y = _prepare(w, g, y)
    w_next, ss, sample = _rank1_gd(w, g, y, s.mu, k)
    return StepResult(w_next, ss, sample, s)


def ngd_step(w, g, y, s: NgdState, k: int = 0) -> StepResult:
    """NLMS step with ``eta = mu / (||g||^2 + eps)``."""
    w, g, y = _prepare(w, g, y)
    denom = float(g @ g) + s.eps
    if denom == 0.0:
        raise DomainError("zero feature vector with eps = 0 gives an undefined step size")
    w_next, ss, sample = _rank1_gd(w, g, y, s.mu / denom, k)
    return StepResult(w_next, ss, sample, s)


def rls_step(w, g, y, s: RlsState, k: int = 0) -> StepResult:
    """Exponentially weighted RLS via the matrix inversion lemma.

    The update ``w + kv * e`` is the system ``A = I - kv g^T``, ``B = kv``
    (one column), ``u = [y]``.
    """
    w, g, y = _prepare(w, g, y)
    P = s.P
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        Pg = P @ g
        kv = Pg / (s.mu + float(g @ Pg))
        e = y - float(g @ w)
        w_next = w + kv * e
        P_next = (P - np.outer(kv, g @ P)) / s.mu
        P_next = 0.5 * (P_next + P_next.T)
        A = np.eye(w.size) - np.outer(kv, g)
    _finite(k, w_next, P_next, A)
    ss = StateSpaceStep(A=A, B=kv[:, None], u=np.array([y]), rank1=(kv, g))
    return StepResult(w_next, ss, SampleStep(k=k, y=y, g=g, e=e, eta=kv), replace(s, P=P_next))


def _as_diag(eta: Union[float, Vec], n: int) -> Mat:
    return np.diag(eta) if np.ndim(eta) else eta * np.eye(n)


def adam_extended_matrix(g: Vec, eta: Union[float, Vec], prev_eta: Union[float, Vec], beta1: float) -> Mat:
    """Block local matrix of dynamics for ADAM over ``[w(k-1), w(k), m(k-1), m(k)]``.

    Rows, in blocks: ``w(k)``; ``w(k+1) = w(k) - eta(k) m(k)``; ``m(k)``; and
    ``m(k+1)`` with the error rewritten through ``w(k) = w(k-1) - eta(k-1) m(k-1)``.
    """
    n = g.size
    eye, zero = np.eye(n), np.zeros((n, n))
    ggt = (beta1 - 1.0) * np.outer(g, g)
    return np.block(
        [
            [zero, eye, zero, zero],
            [zero, eye, zero, -_as_diag(eta, n)],
            [zero, zero, zero, eye],
            [-ggt, zero, ggt @ _as_diag(prev_eta, n), beta1 * eye],
        ]
    )


def adam_step(w, g, y, s: AdamState, k: int = 0) -> StepResult:
    """ADAM step with a one-sample lag: ``w(k+1) = w(k) - eta(k) * m(k)``.

    The moment update is ``m(k+1) = beta1 m(k) + (beta1 - 1) g e(k)``, the same
    as ``beta1 m + (1 - beta1) * grad`` with ``grad = -e g``. The returned
    ``ss`` is the extended-state system; ``ss.apply(xi)`` with
    ``xi = [w(k-1), w(k), m(k-1), m(k)]`` reproduces the step.
    """
    w, g, y = _prepare(w, g, y)
    n = w.size
    if s.m.size != n:
        raise DomainError(f"adam state has dimension {s.m.size}, weights have {n}")
    eta = s.step_size()
    with np.errstate(over="ignore", invalid="ignore"):
        e = y - float(g @ w)
        grad = -e * g
        w_next = w - eta * s.m
        m_next = s.beta1 * s.m + (s.beta1 - 1.0) * g * e
        v_next = s.beta2 * s.v + (1.0 - s.beta2) * grad * grad
        A = adam_extended_matrix(g, eta, s.prev_eta, s.beta1)
    _finite(k, w_next, m_next, v_next, A)
    B = np.vstack([np.zeros((3 * n, n)), (s.beta1 - 1.0) * np.eye(n)])
    ss = StateSpaceStep(A=A, B=B, u=y * g, extended=True)
    s_next = replace(s, m=m_next, v=v_next, k=s.k + 1, prev_eta=eta, prev_m=s.m, prev_w=w)
    return StepResult(w_next, ss, SampleStep(k=k, y=y, g=g, e=e, eta=eta), s_next)


def adam_extended_state(w: Vec, s: AdamState) -> Vec:
    """``[w(k-1), w(k), m(k-1), m(k)]`` for the current weights and state."""
    prev_w = w if s.prev_w is None else s.prev_w
    prev_m = np.zeros_like(s.m) if s.prev_m is None else s.prev_m
    return np.concatenate([prev_w, w, prev_m, s.m])


class BatchResult(NamedTuple):
    w: Vec
    ss: StateSpaceStep


def batch_gd_step(w, G, ys, s: Union[GdState, NgdState], k: int = 0) -> BatchResult:
    """One step on the summed gradient of a batch of feature rows ``G``.

    NGD normalises by the squared Frobenius norm of ``G``.
    """
    w = as_vec(w, "weights")
    G = as_mat(G, "feature batch")
    ys = as_vec(ys, "targets")
    if G.shape != (ys.size, w.size):
        raise DomainError(f"batch of shape {G.shape} does not match {ys.size} targets and {w.size} weights")
    if isinstance(s, NgdState):
        denom = float(np.sum(G * G)) + s.eps
        if denom == 0.0:
            raise DomainError("zero batch with eps = 0 gives an undefined step size")
        eta = s.mu / denom
    else:
        eta = s.mu
    with np.errstate(over="ignore", invalid="ignore"):
        w_next = w + eta * (G.T @ (ys - G @ w))
        A = np.eye(w.size) - eta * (G.T @ G)
    _finite(k, w_next, A)
    return BatchResult(w_next, StateSpaceStep(A=A, B=eta * np.eye(w.size), u=G.T @ ys))


STEPS = {GdState: gd_step, NgdState: ngd_step, RlsState: rls_step, AdamState: adam_step}


def learner_step(w, g, y, s: LearnerState, k: int = 0) -> StepResult:
    return STEPS[type(s)](w, g, y, s, k)


def parse_learner(text: str, n: int) -> LearnerState:
    """Initial learner state for ``n`` weights from a spec string.

    Grammar: ``gd:mu=<f>``, ``ngd:mu=<f>,eps=<f>``, ``rls:mu=<f>,delta=<f>``,
    ``adam:mu=<f>,beta1=<f>,beta2=<f>,eps=<f>[,mode=<scalar|elementwise>]``.
    """
    kind, p = _specs.split_spec(text)
    f = lambda key: _specs.to_float(text, key, p[key])  # noqa: E731
    if kind == "gd":
        _specs.check_keys(text, p, {"mu"})
        return GdState(mu=f("mu"))
    if kind == "ngd":
        _specs.check_keys(text, p, {"mu", "eps"})
        return NgdState(mu=f("mu"), eps=f("eps"))
    if kind == "rls":
        _specs.check_keys(text, p, {"mu", "delta"})
        return RlsState.initial(n, mu=f("mu"), delta=f("delta"))
    if kind == "adam":
        _specs.check_keys(text, p, {"mu", "beta1", "beta2", "eps"}, {"mode"})
        return AdamState.initial(
            n, mu=f("mu"), beta1=f("beta1"), beta2=f("beta2"), eps=f("eps"), mode=p.get("mode", "scalar")
        )
    raise ConfigError(f"unknown learner kind {kind!r}; expected gd, ngd, rls or adam")
