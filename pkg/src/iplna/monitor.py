"""Online stability monitoring of weight-update systems.

The monitor consumes the :class:`~iplna.learners.StateSpaceStep` of every
update and tracks

* the per-step spectral radius and Frobenius / spectral norms of ``A(k)``,
* the norm of the product of the last ``p`` local matrices (newest on the left),
* running suprema of ``||A||``, ``||B||`` and ``||u||``,
* a BIBS bound ``||w0|| + M_B L_u / (1 - q)`` whenever a contraction factor
  ``q < 1`` is certified, and
* the ISS split ``||w(k+1)|| <= beta + gamma`` accumulated from per-step norms.

Per-step norms of rank-one updates ``I - eta g g^T`` sit at or above 1 once the
dimension exceeds one, so the window product is the operative test: it alarms
immediately, while the per-step indicator only alarms after ``p`` consecutive
exceedances.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .learners import StateSpaceStep
from .linalg import (
    Mat,
    rank1_update_norm2,
    rank1_update_radius,
    spectral_radius,
    window_product,
)

NORM_KINDS = ("frobenius", "spectral")
ALARM_REASONS = ("per_step_norm", "window_product", "divergence")
SPEC_LOG_MAX_DIM = 64


@dataclass(frozen=True)
class MonitorConfig:
    window_p: int = 50
    eval_stride: int = 1
    norm_kind: str = "frobenius"
    alarm_threshold: float = 1.05
    history_cap: int = 100_000
    divergence_cap: float = 1e12

    def __post_init__(self):
        if self.window_p < 1 or self.eval_stride < 1 or self.history_cap < 1:
            raise ConfigError("window_p, eval_stride and history_cap must be >= 1")
        if self.norm_kind not in NORM_KINDS:
            raise ConfigError(f"norm_kind must be one of {NORM_KINDS}")
        if not self.alarm_threshold >= 1:
            raise ConfigError("alarm_threshold must be >= 1")


@dataclass(frozen=True)
class IssBound:
    beta_term: float
    gamma_term: float

    @property
    def total(self) -> float:
        return self.beta_term + self.gamma_term


@dataclass(frozen=True)
class StabilityReport:
    k: int
    rho_analytic: float
    lmd_frob: float
    lmd_spec: Optional[float]
    window_norm: Optional[float]
    running_MA: float
    running_MB: float
    running_Lu: float
    bibs_bound: Optional[float]
    alarm: bool
    alarm_reason: Optional[str]
    iss: IssBound
    q: Optional[float] = None

    def to_record(self, e: float, w_norm: float) -> dict:
        """Flat dict in the JSON-lines log layout."""
        return {
            "k": self.k,
            "e": e,
            "w_norm": w_norm,
            "rho": self.rho_analytic,
            "frob": self.lmd_frob,
            "spec": self.lmd_spec,
            "window_norm": self.window_norm,
            "MA": self.running_MA,
            "MB": self.running_MB,
            "Lu": self.running_Lu,
            "bibs_bound": self.bibs_bound,
            "alarm": self.alarm,
            "alarm_reason": self.alarm_reason,
            "iss_beta": self.iss.beta_term,
            "iss_gamma": self.iss.gamma_term,
        }


def _mul(a: float, b: float) -> float:
    # 0 * inf is taken as 0: a zero factor kills the term whatever the other bound
    return 0.0 if a == 0.0 or b == 0.0 else a * b


def matrix_norm(m: Mat, norm_kind: str) -> float:
    """Frobenius norm, or the exact largest singular value (LAPACK SVD)."""
    if norm_kind == "frobenius":
        return float(np.sqrt(np.sum(m * m)))
    return float(np.linalg.norm(m, 2))


def window_condition(cfg: MonitorConfig, window: Sequence[Mat]) -> float:
    """Norm (per ``cfg.norm_kind``) of the product of the window's matrices."""
    return matrix_norm(window_product(window), cfg.norm_kind)


def bibs_bound(w0_norm: float, MA: float, MB: float, Lu: float) -> Optional[float]:
    """``w0_norm + MB * Lu / (1 - MA)``, or ``None`` when ``MA >= 1``."""
    if min(w0_norm, MA, MB, Lu) < 0:
        raise ValueError("bound constants must be nonnegative")
    if MA >= 1:
        return None
    return w0_norm + _mul(MB, Lu) / (1.0 - MA)


def iss_bounds(w0_norm: float, a_norms: Sequence[float], b_norms: Sequence[float], u_sup: float) -> IssBound:
    """ISS split of the bound on ``||w(k+1)||`` from per-step norms.

    ``beta = prod(a) * w0_norm`` and ``gamma = u_sup * sum_i prod(a_j, j > i) * b_i``.
    """
    if len(a_norms) != len(b_norms) or not a_norms:
        raise ValueError("need equally long, non-empty norm lists")
    beta, acc = w0_norm, 0.0
    for a, b in zip(a_norms, b_norms):
        beta = _mul(a, beta)
        acc = _mul(a, acc) + b
    return IssBound(beta, _mul(u_sup, acc))


class Monitor:
    """Sequential stability monitor for one run.

    Call :meth:`start` with ``||w(k0)||`` (or pass ``w0_norm``) before the first
    :meth:`observe`. ``state_norm`` passed to ``observe`` is the norm of the state
    after the step; for ADAM that is the extended state.
    """

    def __init__(self, cfg: MonitorConfig = MonitorConfig(), w0_norm: Optional[float] = None):
        self.cfg = cfg
        self.history: deque[StabilityReport] = deque(maxlen=cfg.history_cap)
        self.w0_norm: Optional[float] = None
        if w0_norm is not None:
            self.start(w0_norm)

    def start(self, w0_norm: float) -> None:
        if not w0_norm >= 0:
            raise ValueError("w0_norm must be nonnegative")
        self.w0_norm = float(w0_norm)
        self._ring: Optional[np.ndarray] = None
        self._n_seen = 0
        self._over_streak = 0
        self.MA = self.MB = self.Lu = 0.0
        self.window_sup: Optional[float] = None
        self._beta = self.w0_norm
        self._gamma_acc = 0.0
        self._last: Optional[StabilityReport] = None

    def _require_started(self) -> None:
        if self.w0_norm is None:
            raise UsageError("monitor not started; call start(w0_norm) first")

    def _step_norms(self, ss: StateSpaceStep) -> tuple[float, float, Optional[float]]:
        A = ss.A
        n = A.shape[0]
        frob = matrix_norm(A, "frobenius")
        if ss.rank1 is not None:
            a, b = ss.rank1
            rho = rank1_update_radius(a, b)
            spec = rank1_update_norm2(a, b)
        else:
            rho = spectral_radius(A)
            spec = None
            if n <= SPEC_LOG_MAX_DIM or self.cfg.norm_kind == "spectral":
                spec = matrix_norm(A, "spectral")
        return rho, frob, spec

    def _push(self, A: Mat) -> bool:
        """Store ``A`` in the ring buffer; True once the window is full."""
        p = self.cfg.window_p
        if self._ring is None or self._ring.shape[1:] != A.shape:
            if self._ring is not None:
                raise ValueError(f"state dimension changed from {self._ring.shape[1]} to {A.shape[0]}")
            self._ring = np.empty((p,) + A.shape)
        self._ring[(self._n_seen - 1) % p] = A
        return self._n_seen >= p

    def window(self) -> np.ndarray:
        """Stored local matrices of the current window, oldest first."""
        if self._ring is None:
            return np.empty((0, 0, 0))
        p = self.cfg.window_p
        if self._n_seen < p:
            return self._ring[: self._n_seen].copy()
        head = self._n_seen % p
        return np.concatenate([self._ring[head:], self._ring[:head]])

    def _certified_q(self) -> Optional[float]:
        if self.MA < 1:
            return self.MA
        if self.window_sup is not None and self.window_sup < 1:
            return self.window_sup ** (1.0 / self.cfg.window_p)
        return None

    def observe(self, ss: StateSpaceStep, state_norm: float, k: Optional[int] = None) -> StabilityReport:
        self._require_started()
        cfg = self.cfg
        k = self._n_seen if k is None else k
        self._n_seen += 1

        rho, frob, spec = self._step_norms(ss)
        step_norm = frob if cfg.norm_kind == "frobenius" else spec
        b_norm = matrix_norm(ss.B, cfg.norm_kind)
        u_norm = float(np.linalg.norm(ss.u))
        self.MA = max(self.MA, step_norm)
        self.MB = max(self.MB, b_norm)
        self.Lu = max(self.Lu, u_norm)

        self._beta = _mul(step_norm, self._beta)
        self._gamma_acc = _mul(step_norm, self._gamma_acc) + b_norm
        iss = IssBound(self._beta, _mul(self.Lu, self._gamma_acc))

        window_norm = None
        if self._push(ss.A) and (self._n_seen - cfg.window_p) % cfg.eval_stride == 0:
            window_norm = window_condition(cfg, self.window())
            self.window_sup = window_norm if self.window_sup is None else max(self.window_sup, window_norm)

        self._over_streak = self._over_streak + 1 if rho > cfg.alarm_threshold else 0
        reason = None
        if not state_norm <= cfg.divergence_cap:
            reason = "divergence"
        elif window_norm is not None and window_norm > cfg.alarm_threshold:
            reason = "window_product"
        elif self._over_streak >= cfg.window_p:
            reason = "per_step_norm"

        q = None if reason == "divergence" else self._certified_q()
        bound = None if q is None else self.w0_norm + _mul(self.MB, self.Lu) / (1.0 - q)
        report = StabilityReport(
            k=k,
            rho_analytic=rho,
            lmd_frob=frob,
            lmd_spec=spec,
            window_norm=window_norm,
            running_MA=self.MA,
            running_MB=self.MB,
            running_Lu=self.Lu,
            bibs_bound=bound,
            alarm=reason is not None,
            alarm_reason=reason,
            iss=iss,
            q=q,
        )
        self._last = report
        self.history.append(report)
        return report

    def signal_divergence(self, k: int) -> StabilityReport:
        """Report for a step the learner could not complete (non-finite state).

        Per-step indicators repeat the last observed step; the window is not
        evaluated and no bound is certified.
        """
        self._require_started()
        last = self._last
        report = StabilityReport(
            k=k,
            rho_analytic=math.inf if last is None else last.rho_analytic,
            lmd_frob=math.inf if last is None else last.lmd_frob,
            lmd_spec=None if last is None else last.lmd_spec,
            window_norm=None,
            running_MA=self.MA,
            running_MB=self.MB,
            running_Lu=self.Lu,
            bibs_bound=None,
            alarm=True,
            alarm_reason="divergence",
            iss=IssBound(math.inf, math.inf),
        )
        self._last = report
        self.history.append(report)
        return report
