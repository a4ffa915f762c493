"""Batched activation kernels and the microbenchmark harness.

Each kernel is a single fused pass over a contiguous float32 buffer,
JIT-compiled with numba so that per-element cost reflects the arithmetic
(one memory sweep) rather than a chain of temporaries. Exact-tier kernels
evaluate elementwise in 64-bit and round once, reproducing the scalar
``forward_f32``/``derivative_f32`` path bit for bit. Approximate-tier
kernels reproduce the op sequence of ``rsqrt.rsqrt_approx_array``.

The bit reinterpretations in the approximate tier are register-level LLVM
bitcasts (no memory round-trip), so the whole loop stays auto-vectorizable;
that is what puts approximate ISRLU within a few percent of ReLU.

Backward kernels follow the shared-intermediate scheme: the inverse square
root r of 1 + alpha*x^2 is computed once and the derivative is its cube,
so one approximation serves both directions.
"""

from __future__ import annotations

import math
import platform
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

from .activations import ActivationKind, ActivationSpec, DomainError
from .rsqrt import _A0, _A1, _B0, _B1, ApproxPolicy

__all__ = [
    "apply_forward",
    "apply_backward",
    "BenchConfig",
    "BenchRow",
    "BenchReport",
    "make_bench_input",
    "run_bench",
    "format_report",
    "TABLE3_SPECS",
]

F32 = np.float32
F64 = np.float64


@intrinsic
def _f32_bits(typingctx, val):
    """Reinterpret a float32 as uint32 in a register."""
    if val != types.float32:
        return None
    sig = types.uint32(types.float32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.IntType(32))

    return sig, codegen


@intrinsic
def _bits_f32(typingctx, val):
    """Reinterpret a uint32 as float32 in a register."""
    if val != types.uint32:
        return None
    sig = types.float32(types.uint32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.FloatType())

    return sig, codegen


# ---------------------------------------------------------------------------
# exact tier (elementwise float64, one rounding)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _relu_fwd(x, out, alpha):
    zero = F32(0.0)
    for i in range(x.size):
        out[i] = max(x[i], zero)


@njit(cache=True)
def _relu_bwd(x, up, out, alpha):
    zero = F32(0.0)
    for i in range(x.size):
        out[i] = up[i] if x[i] > zero else zero


@njit(cache=True)
def _isrlu_fwd(x, out, alpha):
    a = F64(alpha)
    sat = -1.0 / np.sqrt(a)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = v
        else:
            x64 = F64(v)
            t = 1.0 + a * (x64 * x64)
            if np.isinf(t):
                out[i] = F32(sat)
            else:
                out[i] = F32(x64 / np.sqrt(t))


@njit(cache=True)
def _isrlu_bwd(x, up, out, alpha):
    a = F64(alpha)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = up[i]
        else:
            x64 = F64(v)
            t = 1.0 + a * (x64 * x64)
            r = 1.0 / np.sqrt(t)
            out[i] = up[i] * F32(r * r * r)


@njit(cache=True)
def _isru_fwd(x, out, alpha):
    a = F64(alpha)
    sat = 1.0 / np.sqrt(a)
    for i in range(x.size):
        x64 = F64(x[i])
        t = 1.0 + a * (x64 * x64)
        if np.isinf(t):
            out[i] = F32(np.copysign(sat, x64))
        else:
            out[i] = F32(x64 / np.sqrt(t))


@njit(cache=True)
def _isru_bwd(x, up, out, alpha):
    a = F64(alpha)
    for i in range(x.size):
        x64 = F64(x[i])
        t = 1.0 + a * (x64 * x64)
        r = 1.0 / np.sqrt(t)
        out[i] = up[i] * F32(r * r * r)


@njit(cache=True)
def _elu_fwd(x, out, alpha):
    a = F64(alpha)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = v
        else:
            out[i] = F32(a * np.expm1(F64(v)))


@njit(cache=True)
def _elu_bwd(x, up, out, alpha):
    a = F64(alpha)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = up[i]
        else:
            out[i] = up[i] * F32(a * np.exp(F64(v)))


@njit(cache=True)
def _tanh_fwd(x, out, alpha):
    for i in range(x.size):
        out[i] = F32(np.tanh(F64(x[i])))


@njit(cache=True)
def _tanh_bwd(x, up, out, alpha):
    # sech^2 form; see activations.tanh_prime
    for i in range(x.size):
        c = np.cosh(F64(x[i]))
        out[i] = up[i] * F32(1.0 / (c * c))


@njit(cache=True)
def _isru_sigmoid_fwd(x, out, alpha):
    for i in range(x.size):
        h = 0.5 * F64(x[i])
        t = 1.0 + 1.0 * (h * h)
        out[i] = F32(0.5 + 0.5 * (h / np.sqrt(t)))


@njit(cache=True)
def _isru_sigmoid_bwd(x, up, out, alpha):
    for i in range(x.size):
        h = 0.5 * F64(x[i])
        t = 1.0 + 1.0 * (h * h)
        r = 1.0 / np.sqrt(t)
        out[i] = up[i] * F32(0.25 * (r * r * r))


# ---------------------------------------------------------------------------
# approximate tier (bit-trick rsqrt; mirrors rsqrt.rsqrt_approx_array)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1):
    """Fast rsqrt of one positive float32; identical op order to the
    vectorized reference in rsqrt.py."""
    u = np.uint32(magic - (_f32_bits(t) >> np.uint32(1)))
    y = _bits_f32(u)
    y = y * (a0 - b0 * t * y * y)
    if steps == 0:
        return y
    y64 = F64(y)
    t64 = F64(t)
    y64 = y64 * (a1 - b1 * t64 * y64 * y64)
    if steps >= 2:
        y64 = y64 * (1.5 - 0.5 * t64 * y64 * y64)
    return F32(y64)


@njit(cache=True)
def _isrlu_approx_fwd(x, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = v
        else:
            t = one + alpha * v * v
            r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
            out[i] = v * r


@njit(cache=True)
def _isrlu_approx_bwd(x, up, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    zero = F32(0.0)
    for i in range(x.size):
        v = x[i]
        if v >= zero:
            out[i] = up[i]
        else:
            t = one + alpha * v * v
            r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
            out[i] = up[i] * (r * r * r)


@njit(cache=True)
def _isru_approx_fwd(x, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    for i in range(x.size):
        v = x[i]
        t = one + alpha * v * v
        r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
        out[i] = v * r


@njit(cache=True)
def _isru_approx_bwd(x, up, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    for i in range(x.size):
        v = x[i]
        t = one + alpha * v * v
        r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
        out[i] = up[i] * (r * r * r)


@njit(cache=True)
def _isru_sigmoid_approx_fwd(x, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    half = F32(0.5)
    for i in range(x.size):
        h = half * x[i]
        t = one + one * h * h
        r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
        out[i] = half + half * (h * r)


@njit(cache=True)
def _isru_sigmoid_approx_bwd(x, up, out, alpha, magic, steps, a0, b0, a1, b1):
    one = F32(1.0)
    half = F32(0.5)
    quarter = F32(0.25)
    for i in range(x.size):
        h = half * x[i]
        t = one + one * h * h
        r = _rsqrt_scalar(t, magic, steps, a0, b0, a1, b1)
        out[i] = up[i] * (quarter * (r * r * r))


_EXACT_FWD = {
    ActivationKind.RELU: _relu_fwd,
    ActivationKind.ISRLU: _isrlu_fwd,
    ActivationKind.ISRU: _isru_fwd,
    ActivationKind.ELU: _elu_fwd,
    ActivationKind.TANH: _tanh_fwd,
    ActivationKind.ISRU_SIGMOID: _isru_sigmoid_fwd,
}

_EXACT_BWD = {
    ActivationKind.RELU: _relu_bwd,
    ActivationKind.ISRLU: _isrlu_bwd,
    ActivationKind.ISRU: _isru_bwd,
    ActivationKind.ELU: _elu_bwd,
    ActivationKind.TANH: _tanh_bwd,
    ActivationKind.ISRU_SIGMOID: _isru_sigmoid_bwd,
}

_APPROX_FWD = {
    ActivationKind.ISRLU: _isrlu_approx_fwd,
    ActivationKind.ISRU: _isru_approx_fwd,
    ActivationKind.ISRU_SIGMOID: _isru_sigmoid_approx_fwd,
}

_APPROX_BWD = {
    ActivationKind.ISRLU: _isrlu_approx_bwd,
    ActivationKind.ISRU: _isru_approx_bwd,
    ActivationKind.ISRU_SIGMOID: _isru_sigmoid_approx_bwd,
}


def _check_buffer(name, a):
    if not isinstance(a, np.ndarray) or a.dtype != np.float32 or a.ndim != 1:
        raise ValueError(f"{name} must be a 1-D float32 ndarray")
    if not a.flags.c_contiguous:
        raise ValueError(f"{name} must be contiguous")


def _approx_args(spec: ActivationSpec):
    policy = ApproxPolicy(nr_steps=spec.refinement_steps)
    return (
        np.uint32(policy.magic),
        np.int64(policy.nr_steps),
        _A0,
        _B0,
        _A1,
        _B1,
    )


def apply_forward(spec: ActivationSpec, input: np.ndarray, output: np.ndarray) -> None:
    """output[i] = spec's forward function of input[i].

    Buffers must be equal-length contiguous float32; in-place operation
    (output is input) is allowed. All elements are assumed finite.
    """
    _check_buffer("input", input)
    _check_buffer("output", output)
    if input.size != output.size:
        raise ValueError(
            f"length mismatch: input has {input.size} elements, output has {output.size}"
        )
    alpha = float(np.float32(spec.alpha))
    if spec.tier == "exact":
        _EXACT_FWD[spec.kind](input, output, alpha)
    else:
        _APPROX_FWD[spec.kind](input, output, np.float32(alpha), *_approx_args(spec))


def apply_backward(
    spec: ActivationSpec,
    input: np.ndarray,
    upstream_grad: np.ndarray,
    output_grad: np.ndarray,
) -> None:
    """output_grad[i] = upstream_grad[i] * f'(input[i]).

    On the approximate tier the inverse square root is evaluated once per
    element and cubed, the same shared intermediate the forward pass uses.
    """
    _check_buffer("input", input)
    _check_buffer("upstream_grad", upstream_grad)
    _check_buffer("output_grad", output_grad)
    if not (input.size == upstream_grad.size == output_grad.size):
        raise ValueError(
            f"length mismatch: input {input.size}, upstream_grad {upstream_grad.size}, "
            f"output_grad {output_grad.size}"
        )
    alpha = float(np.float32(spec.alpha))
    if spec.tier == "exact":
        _EXACT_BWD[spec.kind](input, upstream_grad, output_grad, alpha)
    else:
        _APPROX_BWD[spec.kind](
            input, upstream_grad, output_grad, np.float32(alpha), *_approx_args(spec)
        )


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

# Default row set of the published vector-performance comparison.
TABLE3_SPECS = (
    ActivationSpec(ActivationKind.RELU),
    ActivationSpec(ActivationKind.ISRU, alpha=1.0, tier="approx", refinement_steps=0),
    ActivationSpec(ActivationKind.ISRLU, alpha=1.0, tier="approx", refinement_steps=0),
    ActivationSpec(ActivationKind.ISRLU, alpha=1.0),
    ActivationSpec(ActivationKind.ELU, alpha=1.0),
)


@dataclass(frozen=True)
class BenchConfig:
    """Input mix and timing discipline for run_bench."""

    n_elements: int = 1 << 24
    negative_fraction: float = 0.5
    warmup_runs: int = 3
    timed_runs: int = 10
    value_lo: float = 1e-3
    value_hi: float = 8.0
    seed: int = 42

    def __post_init__(self):
        if self.n_elements <= 0:
            raise DomainError(f"n_elements must be > 0, got {self.n_elements}")
        if self.timed_runs < 3:
            raise DomainError(f"timed_runs must be >= 3, got {self.timed_runs}")
        if self.warmup_runs < 0:
            raise DomainError("warmup_runs must be >= 0")
        if not 0.0 <= self.negative_fraction <= 1.0:
            raise DomainError("negative_fraction must lie in [0, 1]")
        if not 0.0 < self.value_lo < self.value_hi:
            raise DomainError("need 0 < value_lo < value_hi")


@dataclass(frozen=True)
class BenchRow:
    spec: ActivationSpec
    ns_per_element: float
    ratio_vs_isrlu: float
    ratio_vs_isrlu_approx: float
    checksum: float


@dataclass(frozen=True)
class BenchReport:
    rows: tuple
    config: BenchConfig
    platform_note: str = field(default="")


def make_bench_input(config: BenchConfig) -> np.ndarray:
    """Seeded benchmark buffer: log-uniform magnitudes in [value_lo, value_hi],
    exactly floor(negative_fraction * n) negative elements, order shuffled."""
    rng = np.random.default_rng(config.seed)
    n = config.n_elements
    mags = np.exp(
        rng.uniform(math.log(config.value_lo), math.log(config.value_hi), n)
    )
    n_neg = int(math.floor(config.negative_fraction * n))
    signs = np.ones(n)
    signs[:n_neg] = -1.0
    x = mags * signs
    return x[rng.permutation(n)].astype(np.float32)


def _warm_kernels(specs, x):
    # first call JIT-compiles; keep that out of the timed region
    out = np.empty_like(x)
    for spec in specs:
        apply_forward(spec, x, out)


def run_bench(config: BenchConfig, specs) -> BenchReport:
    """Time apply_forward for each spec over one shared input buffer.

    Per spec: warmup_runs untimed passes, then timed_runs timed passes;
    ns_per_element is the median run time divided by n_elements. The float
    sum of every output is accumulated as a checksum so the work cannot be
    optimized away and reruns can be compared.
    """
    specs = list(specs)
    if not specs:
        raise DomainError("run_bench needs at least one ActivationSpec")
    x = make_bench_input(config)
    tiny = x[: min(x.size, 1024)].copy()
    _warm_kernels(specs, tiny)

    out = np.empty_like(x)
    raw = []
    for spec in specs:
        for _ in range(config.warmup_runs):
            apply_forward(spec, x, out)
        times = []
        checksum = 0.0
        for _ in range(config.timed_runs):
            t0 = time.perf_counter_ns()
            apply_forward(spec, x, out)
            times.append(time.perf_counter_ns() - t0)
            checksum += float(np.sum(out, dtype=np.float64))
        ns = statistics.median(times) / config.n_elements
        raw.append((spec, ns, checksum))

    def _ref_ns(kind, tier):
        for spec, ns, _ in raw:
            if spec.kind is kind and spec.tier == tier:
                return ns
        return math.nan

    isrlu_ns = _ref_ns(ActivationKind.ISRLU, "exact")
    approx_ns = _ref_ns(ActivationKind.ISRLU, "approx")
    rows = tuple(
        BenchRow(
            spec=spec,
            ns_per_element=ns,
            ratio_vs_isrlu=ns / isrlu_ns if isrlu_ns == isrlu_ns else math.nan,
            ratio_vs_isrlu_approx=ns / approx_ns if approx_ns == approx_ns else math.nan,
            checksum=checksum,
        )
        for spec, ns, checksum in raw
    )
    note = (
        f"{platform.machine()} {platform.system()}, python {platform.python_version()}, "
        f"numpy {np.__version__}, single-threaded kernels"
    )
    return BenchReport(rows=rows, config=config, platform_note=note)


def _fmt_ratio(r: float) -> str:
    return "-" if r != r else f"{r:.2f}x"


def format_report(report: BenchReport, style: str = "markdown") -> str:
    """Render the timing table; column order is fixed."""
    header = ("function", "ns_per_element", "ratio_vs_isrlu", "ratio_vs_isrlu_approx")
    body = [
        (
            row.spec.label(),
            f"{row.ns_per_element:.3f}",
            _fmt_ratio(row.ratio_vs_isrlu),
            _fmt_ratio(row.ratio_vs_isrlu_approx),
        )
        for row in report.rows
    ]
    if style == "csv":
        lines = [",".join(header)]
        lines += [",".join(r) for r in body]
        return "\n".join(lines) + "\n"
    if style == "markdown":
        widths = [
            max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
            for i in range(4)
        ]
        def fmt(cells):
            return "| " + " | ".join(c.ljust(widths[i]) for i, c in enumerate(cells)) + " |"

        lines = [fmt(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        lines += [fmt(r) for r in body]
        return "\n".join(lines) + "\n"
    raise DomainError(f"unknown report style {style!r}; use 'csv' or 'markdown'")
