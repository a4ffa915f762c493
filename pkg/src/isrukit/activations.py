"""Exact activation functions and their derivatives.

The inverse-square-root family:

    isrlu(x) = x                     for x >= 0
             = x / sqrt(1 + a*x^2)   for x <  0

    isru(x)  = x / sqrt(1 + a*x^2)   everywhere

Both share the same derivative on the curved branch, (1 + a*x^2)^(-3/2),
which is the cube of the inverse square root already computed for the
forward value. ELU, ReLU and tanh are provided as baselines, plus a
shifted/scaled ISRU that mimics the logistic sigmoid.

Every function accepts Python floats or numpy arrays and evaluates in
64-bit precision (the reference path). The ``*_f32`` wrappers evaluate
the same formulas and round once to 32-bit; that rounded path is what
the batched kernels reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "DomainError",
    "ActivationKind",
    "ActivationSpec",
    "MIN_LEARNABLE_ALPHA",
    "isrlu",
    "isrlu_prime",
    "isrlu_dalpha",
    "isru",
    "isru_prime",
    "isru_dalpha",
    "elu",
    "elu_prime",
    "relu",
    "relu_prime",
    "tanh",
    "tanh_prime",
    "isru_sigmoid",
    "isru_sigmoid_prime",
    "forward",
    "derivative",
    "alpha_gradient",
    "forward_f32",
    "derivative_f32",
    "saturation_limit",
]

# Learnable alpha is clamped here to keep 1/sqrt(alpha) finite during training.
# Fixed-alpha evaluation accepts any strictly positive alpha.
MIN_LEARNABLE_ALPHA = 1e-6


class DomainError(ValueError):
    """Raised when an input violates a function's domain contract."""


class ActivationKind(Enum):
    ISRLU = "isrlu"
    ISRU = "isru"
    ELU = "elu"
    RELU = "relu"
    TANH = "tanh"
    ISRU_SIGMOID = "isru-sigmoid"


# Kinds whose curved branch is built on an inverse square root; only these
# support the approximate evaluation tier.
RSQRT_KINDS = frozenset(
    {ActivationKind.ISRLU, ActivationKind.ISRU, ActivationKind.ISRU_SIGMOID}
)

# Kinds whose output does not depend on alpha.
ALPHA_FREE_KINDS = frozenset(
    {ActivationKind.RELU, ActivationKind.TANH, ActivationKind.ISRU_SIGMOID}
)


@dataclass(frozen=True)
class ActivationSpec:
    """Which activation to evaluate, with what alpha, on which tier.

    tier "exact" evaluates the closed form; tier "approx" replaces the
    inverse square root with the bit-trick estimate refined by
    ``refinement_steps`` Newton-Raphson steps (0, 1 or 2).
    """

    kind: ActivationKind
    alpha: float = 1.0
    tier: str = "exact"
    refinement_steps: int = 0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.tier not in ("exact", "approx"):
            raise DomainError(f"unknown tier {self.tier!r}")
        if self.refinement_steps not in (0, 1, 2):
            raise DomainError(
                f"refinement_steps must be 0, 1 or 2, got {self.refinement_steps}"
            )
        if self.tier == "approx" and self.kind not in RSQRT_KINDS:
            raise DomainError(
                f"approx tier is only defined for {sorted(k.value for k in RSQRT_KINDS)}, "
                f"not {self.kind.value}"
            )

    def label(self) -> str:
        """Human-readable row name, e.g. 'ISRLU (approx.)'."""
        name = {
            ActivationKind.ISRLU: "ISRLU",
            ActivationKind.ISRU: "ISRU",
            ActivationKind.ELU: "ELU",
            ActivationKind.RELU: "ReLU",
            ActivationKind.TANH: "Tanh",
            ActivationKind.ISRU_SIGMOID: "ISRU-sigmoid",
        }[self.kind]
        if self.tier == "approx":
            return f"{name} (approx.)"
        return name


def _check_alpha(alpha) -> None:
    if not np.isscalar(alpha) and np.ndim(alpha) != 0:
        raise DomainError("alpha must be a scalar")
    a = float(alpha)
    if not math.isfinite(a) or a <= 0.0:
        raise DomainError(f"alpha must be finite and > 0, got {alpha!r}")


def _prep(x):
    """Validate finiteness and return (float64 array, was_scalar)."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("input must be finite")
    return arr, arr.ndim == 0


def _ret(y, scalar: bool):
    return float(y) if scalar else y


def _inv_sqrt_term(x: np.ndarray, alpha: float):
    """(t, overflow_mask) with t = 1 + alpha*x^2; overflow means t hit inf."""
    with np.errstate(over="ignore"):
        t = 1.0 + alpha * np.square(x)
    return t, np.isinf(t)


def isru(x, alpha):
    """x / sqrt(1 + alpha*x^2): odd, increasing, saturates at +-1/sqrt(alpha)."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    t, over = _inv_sqrt_term(arr, alpha)
    with np.errstate(invalid="ignore"):
        y = np.where(over, np.copysign(1.0 / math.sqrt(alpha), arr), arr / np.sqrt(t))
    return _ret(y, scalar)


def isru_prime(x, alpha):
    """(1 + alpha*x^2)^(-3/2): even, equals 1 at x=0, decays to 0."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    t, _ = _inv_sqrt_term(arr, alpha)
    r = 1.0 / np.sqrt(t)
    return _ret(r * r * r, scalar)


def isru_dalpha(x, alpha):
    """Partial derivative of isru with respect to alpha.

    -x^3 / (2*(1 + alpha*x^2)^(3/2)), computed as -isru(x)^3 / 2, an exact
    algebraic identity that stays finite for any x.
    """
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    f = np.asarray(isru(arr, alpha))
    return _ret(-0.5 * f * f * f, scalar)


def isrlu(x, alpha):
    """Identity for x >= 0, isru branch for x < 0; range (-1/sqrt(alpha), inf)."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    y = np.where(arr >= 0.0, arr, np.asarray(isru(arr, alpha)))
    return _ret(y, scalar)


def isrlu_prime(x, alpha):
    """1 for x >= 0, (1 + alpha*x^2)^(-3/2) for x < 0; both branches give 1 at 0."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    y = np.where(arr >= 0.0, 1.0, np.asarray(isru_prime(arr, alpha)))
    return _ret(y, scalar)


def isrlu_dalpha(x, alpha):
    """Partial derivative of isrlu with respect to alpha: 0 for x >= 0,
    -x^3 / (2*(1 + alpha*x^2)^(3/2)) for x < 0 (non-negative there: raising
    alpha lifts the saturating branch toward 0)."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    y = np.where(arr >= 0.0, 0.0, np.asarray(isru_dalpha(arr, alpha)))
    return _ret(y, scalar)


def elu(x, alpha):
    """Identity for x >= 0, alpha*(exp(x) - 1) for x < 0."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    neg = np.minimum(arr, 0.0)  # keep expm1 off the positive branch
    y = np.where(arr >= 0.0, arr, alpha * np.expm1(neg))
    return _ret(y, scalar)


def elu_prime(x, alpha):
    """1 for x >= 0, alpha*exp(x) for x < 0."""
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    neg = np.minimum(arr, 0.0)
    y = np.where(arr >= 0.0, 1.0, alpha * np.exp(neg))
    return _ret(y, scalar)


def _elu_dalpha(x, alpha):
    _check_alpha(alpha)
    arr, scalar = _prep(x)
    neg = np.minimum(arr, 0.0)
    y = np.where(arr >= 0.0, 0.0, np.expm1(neg))
    return _ret(y, scalar)


def relu(x):
    arr, scalar = _prep(x)
    return _ret(np.maximum(arr, 0.0), scalar)


def relu_prime(x):
    """Subgradient convention: relu_prime(0) = 0."""
    arr, scalar = _prep(x)
    return _ret(np.where(arr > 0.0, 1.0, 0.0), scalar)


def tanh(x):
    arr, scalar = _prep(x)
    return _ret(np.tanh(arr), scalar)


def tanh_prime(x):
    # sech^2 form: 1 - tanh^2 cancels catastrophically near saturation
    arr, scalar = _prep(x)
    with np.errstate(over="ignore"):  # cosh overflow -> derivative 0
        c = np.cosh(arr)
        y = 1.0 / (c * c)
    return _ret(y, scalar)


def isru_sigmoid(x):
    """0.5 + 0.5*isru(0.5*x, 1): range (0, 1), value 0.5 and slope 0.25 at 0,
    matching the logistic sigmoid at the origin."""
    arr, scalar = _prep(x)
    y = 0.5 + 0.5 * np.asarray(isru(0.5 * arr, 1.0))
    return _ret(y, scalar)


def isru_sigmoid_prime(x):
    arr, scalar = _prep(x)
    y = 0.25 * np.asarray(isru_prime(0.5 * arr, 1.0))
    return _ret(y, scalar)


def _zeros_like(x, alpha=None):
    arr, scalar = _prep(x)
    return _ret(np.zeros_like(arr), scalar)


_FORWARD = {
    ActivationKind.ISRLU: isrlu,
    ActivationKind.ISRU: isru,
    ActivationKind.ELU: elu,
    ActivationKind.RELU: lambda x, alpha: relu(x),
    ActivationKind.TANH: lambda x, alpha: tanh(x),
    ActivationKind.ISRU_SIGMOID: lambda x, alpha: isru_sigmoid(x),
}

_DERIVATIVE = {
    ActivationKind.ISRLU: isrlu_prime,
    ActivationKind.ISRU: isru_prime,
    ActivationKind.ELU: elu_prime,
    ActivationKind.RELU: lambda x, alpha: relu_prime(x),
    ActivationKind.TANH: lambda x, alpha: tanh_prime(x),
    ActivationKind.ISRU_SIGMOID: lambda x, alpha: isru_sigmoid_prime(x),
}

# d(forward)/d(alpha); zero for kinds whose output ignores alpha.
_DALPHA = {
    ActivationKind.ISRLU: isrlu_dalpha,
    ActivationKind.ISRU: isru_dalpha,
    ActivationKind.ELU: _elu_dalpha,
    ActivationKind.RELU: _zeros_like,
    ActivationKind.TANH: _zeros_like,
    ActivationKind.ISRU_SIGMOID: _zeros_like,
}


def forward(kind: ActivationKind, x, alpha: float = 1.0):
    """64-bit forward value of the given activation kind."""
    return _FORWARD[kind](x, alpha)


def derivative(kind: ActivationKind, x, alpha: float = 1.0):
    """64-bit first derivative of the given activation kind."""
    return _DERIVATIVE[kind](x, alpha)


def alpha_gradient(kind: ActivationKind, x, alpha: float = 1.0):
    """64-bit partial derivative with respect to alpha (0 where alpha is unused)."""
    return _DALPHA[kind](x, alpha)


def forward_f32(kind: ActivationKind, x, alpha: float = 1.0):
    """32-bit forward path: evaluate in 64-bit, round once to float32.

    This is the scalar reference the batched kernels must reproduce
    element for element.
    """
    x32 = np.asarray(x, dtype=np.float32)
    y = forward(kind, x32.astype(np.float64), float(np.float32(alpha)))
    y32 = np.asarray(y, dtype=np.float32)
    return np.float32(y32) if x32.ndim == 0 else y32


def derivative_f32(kind: ActivationKind, x, alpha: float = 1.0):
    """32-bit derivative path; see forward_f32."""
    x32 = np.asarray(x, dtype=np.float32)
    y = derivative(kind, x32.astype(np.float64), float(np.float32(alpha)))
    y32 = np.asarray(y, dtype=np.float32)
    return np.float32(y32) if x32.ndim == 0 else y32


def saturation_limit(kind: ActivationKind, alpha: float = 1.0) -> float:
    """Asymptotic output level: signed for the one-sided kinds (ISRLU, ELU),
    magnitude for the symmetric ones (ISRU, tanh)."""
    _check_alpha(alpha)
    if kind is ActivationKind.ISRLU:
        return -1.0 / math.sqrt(alpha)
    if kind is ActivationKind.ISRU:
        return 1.0 / math.sqrt(alpha)
    if kind is ActivationKind.ELU:
        return -float(alpha)
    if kind is ActivationKind.RELU:
        return 0.0
    if kind is ActivationKind.TANH:
        return 1.0
    if kind is ActivationKind.ISRU_SIGMOID:
        return 1.0
    raise DomainError(f"unknown activation kind {kind!r}")
