"""Optimizer family built around the update w_{t+1} = w_t - alpha_t * eta_t (*) m_t.

All methods share the momentum buffer m and (where adaptive) the second-moment
buffer v. They differ only in how the parameter-wise rates eta_t are formed:

  sgd / momentum_sgd   eta = 1
  adam / adamw         eta = 1 / (sqrt(v_t) + eps)       v_t includes g_t
  amsgrad              eta = 1 / (sqrt(vhat_t) + eps)    vhat = running max of v
  delayed_adam         eta = 1 / (sqrt(v_{t-1}) + eps)   v updated after the step
  avagrad / avagradw   delayed eta, then rescaled by sqrt(d) / ||eta||

The delayed variants make eta_t independent of the sample drawn at step t,
which removes the correlation between the rate and the current gradient.
No bias correction is applied to m or v anywhere: the state machine follows
the plain recursions with m_0 = v_0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import NonFiniteError, Schedule, ensure_vector, schedule_eval


class Method(str, Enum):
    SGD = "sgd"
    MOMENTUM_SGD = "momentum_sgd"
    ADAM = "adam"
    AMSGRAD = "amsgrad"
    ADAMW = "adamw"
    DELAYED_ADAM = "delayed_adam"
    AVAGRAD = "avagrad"
    AVAGRADW = "avagradw"


class DecayMode(str, Enum):
    NONE = "none"
    COUPLED_L2 = "coupled_l2"
    DECOUPLED = "decoupled"


#: methods whose eta_t is computed from v_{t-1}, before v absorbs g_t
DELAYED_METHODS = frozenset({Method.DELAYED_ADAM, Method.AVAGRAD, Method.AVAGRADW})

#: methods that always apply decoupled weight decay, whatever hp.decay_mode says
_FORCED_DECOUPLED = frozenset({Method.ADAMW, Method.AVAGRADW})


class DivergenceError(NonFiniteError):
    """A step produced NaN/inf in the iterate or a state buffer."""


def _validate_beta_schedule(s: Schedule, name: str) -> None:
    # constant and inverse_sqrt peak at t=1 (value = base); inverse_t stays in [0, 1)
    if s.kind in ("constant", "inverse_sqrt") and not (0.0 <= s.base < 1.0):
        raise ValueError(f"{name} must evaluate into [0, 1); got base {s.base}")


@dataclass(frozen=True)
class HyperParams:
    """Per-run optimizer settings.

    alpha is the global learning-rate schedule, epsilon the additive constant
    in the rate denominator (large epsilon suppresses adaptivity), beta1/beta2
    the momentum and second-moment schedules. decay_mode picks how
    weight_decay enters; adamw/avagradw force decoupled decay regardless.
    """

    alpha: Schedule
    epsilon: float
    beta1: Schedule = field(default_factory=lambda: Schedule.constant(0.9))
    beta2: Schedule = field(default_factory=lambda: Schedule.constant(0.999))
    weight_decay: float = 0.0
    decay_mode: DecayMode = DecayMode.NONE

    def __post_init__(self):
        if not (self.epsilon > 0.0) or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be a positive finite float, got {self.epsilon}")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")
        _validate_beta_schedule(self.beta1, "beta1")
        _validate_beta_schedule(self.beta2, "beta2")


@dataclass
class OptimizerState:
    """Buffers for one trial: m, v, and (amsgrad only) the running max of v.

    States are treated as immutable snapshots; step() returns a fresh one.
    t counts completed steps, so a state with t = k is about to take step k+1.
    """

    method: Method
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray | None
    t: int


@dataclass(frozen=True)
class StepReport:
    """Rates actually used by one step.

    eta is the raw parameter-wise rate vector (ones for the sgd variants);
    alpha_eff is the global multiplier really applied: alpha_t, except for
    avagrad where it is alpha_t * sqrt(d) / ||eta||.
    """

    eta: np.ndarray
    alpha_eff: float
    eta_min: float
    eta_l2: float


def init_state(method: Method, d: int) -> OptimizerState:
    """Zero-initialised buffers for a d-dimensional parameter vector."""
    method = Method(method)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    v_hat = np.zeros(d) if method is Method.AMSGRAD else None
    return OptimizerState(method=method, m=np.zeros(d), v=np.zeros(d), v_hat=v_hat, t=0)


def step(
    state: OptimizerState, hp: HyperParams, w: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, OptimizerState, StepReport]:
    """Advance one optimization step; returns (w_next, state_next, report).

    Raises DivergenceError when the produced iterate or buffers are
    non-finite (the caller decides whether that aborts the trial).
    """
    d = state.m.shape[0]
    if w.shape != (d,) or g.shape != (d,):
        raise ValueError(f"dimension mismatch: state d={d}, w {w.shape}, g {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DivergenceError("gradient contains NaN or infinity")

    t = state.t + 1
    b1 = schedule_eval(hp.beta1, t)
    b2 = schedule_eval(hp.beta2, t)
    alpha = schedule_eval(hp.alpha, t)
    eps = hp.epsilon
    lam = hp.weight_decay
    method = state.method
    mode = DecayMode.DECOUPLED if method in _FORCED_DECOUPLED else hp.decay_mode

    # overflow to inf is an expected divergence signal, caught below
    with np.errstate(over="ignore", invalid="ignore"):
        if mode is DecayMode.COUPLED_L2 and lam > 0.0:
            g_eff = g + lam * w
        else:
            g_eff = g

        v_next = state.v
        v_hat_next = state.v_hat

        if method is Method.SGD:
            m_next = state.m
            w_next = w - alpha * g_eff
            eta = np.ones(d)
            alpha_eff = alpha
        elif method is Method.MOMENTUM_SGD:
            m_next = b1 * state.m + (1.0 - b1) * g_eff
            w_next = w - alpha * m_next
            eta = np.ones(d)
            alpha_eff = alpha
        elif method in (Method.ADAM, Method.ADAMW, Method.AMSGRAD):
            m_next = b1 * state.m + (1.0 - b1) * g_eff
            v_next = b2 * state.v + (1.0 - b2) * (g_eff * g_eff)
            if method is Method.AMSGRAD:
                v_hat_next = np.maximum(state.v_hat, v_next)
                eta = 1.0 / (np.sqrt(v_hat_next) + eps)
            else:
                eta = 1.0 / (np.sqrt(v_next) + eps)
            w_next = w - alpha * (eta * m_next)
            alpha_eff = alpha
        else:  # delayed_adam, avagrad, avagradw: rates from v_{t-1}, v updated after
            m_next = b1 * state.m + (1.0 - b1) * g_eff
            eta = 1.0 / (np.sqrt(state.v) + eps)
            if method is Method.DELAYED_ADAM:
                w_next = w - alpha * (eta * m_next)
                alpha_eff = alpha
            else:
                scaled_norm = float(np.sqrt(np.sum(eta * eta))) / math.sqrt(d)  # ||eta/sqrt(d)||
                w_next = w - alpha * ((eta / scaled_norm) * m_next)
                alpha_eff = alpha / scaled_norm
            v_next = b2 * state.v + (1.0 - b2) * (g_eff * g_eff)

        if mode is DecayMode.DECOUPLED and lam > 0.0:
            w_next = w_next - (alpha * lam) * w

    ok = np.all(np.isfinite(w_next)) and np.all(np.isfinite(m_next)) and np.all(np.isfinite(v_next))
    if ok and v_hat_next is not None:
        ok = np.all(np.isfinite(v_hat_next))
    if not ok:
        raise DivergenceError(f"step {t} produced non-finite values ({method.value})")

    state_next = OptimizerState(method=method, m=m_next, v=v_next, v_hat=v_hat_next, t=t)
    report = StepReport(
        eta=eta,
        alpha_eff=alpha_eff,
        eta_min=float(np.min(eta)),
        eta_l2=float(np.sqrt(np.sum(eta * eta))),
    )
    return w_next, state_next, report


def eta_bounds(hp: HyperParams, g2: float) -> tuple[float, float]:
    """Deterministic range of the delayed rates: 1/(G2+eps) <= eta_i <= 1/eps."""
    if g2 < 0.0:
        raise ValueError("g2 must be >= 0")
    if hp.epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    return 1.0 / (g2 + hp.epsilon), 1.0 / hp.epsilon


def normalized_eta(eta) -> np.ndarray:
    """Rescale a positive rate vector so that ||result / sqrt(d)|| = 1.

    Invariant under uniform rescaling of eta, which is what makes the
    avagrad global step insensitive to the overall scale of the
    second-moment estimate. Accepts any positive vector (epsilon = 0
    analysis included), rejecting non-positive coordinates.
    """
    eta = ensure_vector(eta, "eta")
    if np.any(eta <= 0.0):
        raise ValueError("eta must be coordinate-wise positive")
    d = eta.shape[0]
    scaled_norm = float(np.sqrt(np.sum(eta * eta))) / math.sqrt(d)
    if scaled_norm == 0.0:
        raise ValueError("eta has zero norm")
    return eta / scaled_norm
