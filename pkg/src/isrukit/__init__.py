"""isrukit: inverse-square-root activation functions, three ways.

Exact scalar math (64- and 32-bit reference paths), a fast bit-trick
inverse square root with Newton refinement, fused batched kernels with a
timing harness, and a small CNN trainer for MNIST-scale experiments.
"""

from .activations import (
    ActivationKind,
    ActivationSpec,
    DomainError,
    MIN_LEARNABLE_ALPHA,
    alpha_gradient,
    derivative,
    derivative_f32,
    elu,
    elu_prime,
    forward,
    forward_f32,
    isrlu,
    isrlu_dalpha,
    isrlu_prime,
    isru,
    isru_dalpha,
    isru_prime,
    isru_sigmoid,
    isru_sigmoid_prime,
    relu,
    relu_prime,
    saturation_limit,
    tanh,
    tanh_prime,
)
from .kernels import (
    BenchConfig,
    BenchReport,
    BenchRow,
    TABLE3_SPECS,
    apply_backward,
    apply_forward,
    format_report,
    make_bench_input,
    run_bench,
)
from .rsqrt import (
    ApproxPolicy,
    DEFAULT_MAGIC,
    ErrorReport,
    isrlu_approx,
    isru_approx,
    measure_error,
    rsqrt_approx,
    rsqrt_approx_array,
)
from .ulp import max_ulp_diff_f32, ulp_diff_f32

__version__ = "0.1.0"
