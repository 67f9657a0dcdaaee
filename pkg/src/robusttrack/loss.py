"""Tracking losses and the negative-loss payoff used by the solvers.

Three loss kinds on the shortfall x = B - R'u:

    quadratic:        l(x) = x^2
    smoothed_pos_sq:  l(x) = (x^2 + eps^2) Phi(x/eps) + x eps phi(x/eps),
                      a Gaussian smoothing of x^2 1{x>0}
    smoothed_plus:    l(x) = x + eps log(1 + exp(-x/eps)),
                      the smooth-plus surrogate for max(x, 0)

The payoff is H(u) = -l(B - R'u); for the quadratic kind this equals
-(R'u - B)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

QUADRATIC = "quadratic"
SMOOTHED_POS_SQ = "smoothed_pos_sq"
SMOOTHED_PLUS = "smoothed_plus"
_KINDS = (QUADRATIC, SMOOTHED_POS_SQ, SMOOTHED_PLUS)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class LossSpec:
    """Loss selector; eps is the smoothing width for the smoothed kinds."""

    kind: str = QUADRATIC
    epsilon: float = 0.01

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind != QUADRATIC and not (self.epsilon > 0):
            raise ValueError("smoothed losses require epsilon > 0")

    @classmethod
    def quadratic(cls) -> "LossSpec":
        return cls(kind=QUADRATIC)

    @classmethod
    def smoothed_pos_sq(cls, epsilon: float = 0.01) -> "LossSpec":
        return cls(kind=SMOOTHED_POS_SQ, epsilon=epsilon)

    @classmethod
    def smoothed_plus(cls, epsilon: float = 0.01) -> "LossSpec":
        return cls(kind=SMOOTHED_PLUS, epsilon=epsilon)

    @property
    def is_one_sided(self) -> bool:
        return self.kind != QUADRATIC


def _phi(t):
    return np.exp(-0.5 * t * t) / _SQRT_2PI


def loss_value(spec: LossSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.kind == QUADRATIC:
        out = x * x
    elif spec.kind == SMOOTHED_POS_SQ:
        t = x / spec.epsilon
        out = (x * x + spec.epsilon**2) * ndtr(t) + x * spec.epsilon * _phi(t)
    else:
        # stable form of x + eps*log(1+exp(-x/eps)); exact for both tails
        t = np.abs(x) / spec.epsilon
        out = np.maximum(x, 0.0) + spec.epsilon * np.log1p(np.exp(-t))
    return float(out) if out.ndim == 0 else out


def loss_deriv1(spec: LossSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.kind == QUADRATIC:
        out = 2.0 * x
    elif spec.kind == SMOOTHED_POS_SQ:
        t = x / spec.epsilon
        out = 2.0 * x * ndtr(t) + 2.0 * spec.epsilon * _phi(t)
    else:
        # logistic 1/(1+exp(-x/eps)), evaluated without overflow
        t = x / spec.epsilon
        out = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                       np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
    return float(out) if out.ndim == 0 else out


def loss_deriv2(spec: LossSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.kind == QUADRATIC:
        out = np.full_like(x, 2.0)
    elif spec.kind == SMOOTHED_POS_SQ:
        out = 2.0 * ndtr(x / spec.epsilon)
    else:
        # symmetric stable form of exp(t/eps) / (eps (1+exp(t/eps))^2)
        w = np.exp(-np.abs(x) / spec.epsilon)
        out = w / (spec.epsilon * np.square(1.0 + w))
    return float(out) if out.ndim == 0 else out


def raw_loss_value(spec: LossSpec, x):
    """Unsmoothed counterpart used for performance comparisons.

    quadratic -> x^2, smoothed_pos_sq -> max(x,0)^2, smoothed_plus -> max(x,0).
    The one-sided raw losses are exactly zero whenever the portfolio return
    is at or above the index return, which makes "both losses zero" ties
    well defined.
    """
    x = np.asarray(x, dtype=float)
    if spec.kind == QUADRATIC:
        out = x * x
    elif spec.kind == SMOOTHED_POS_SQ:
        out = np.square(np.maximum(x, 0.0))
    else:
        out = np.maximum(x, 0.0)
    return float(out) if out.ndim == 0 else out


def payoff_H(spec: LossSpec, u, R_row, B_row):
    """Payoff value and gradient for one scenario.

    value = -l(B - R'u); gradient dH/du = l'(B - R'u) * R.
    """
    u = np.asarray(u, dtype=float)
    R_row = np.asarray(R_row, dtype=float)
    if u.shape != R_row.shape:
        raise ValueError("u and R_row dimensions do not agree")
    x = float(B_row) - float(R_row @ u)
    return -loss_value(spec, x), loss_deriv1(spec, x) * R_row
