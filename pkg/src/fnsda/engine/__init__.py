from .tensor import (
    Tensor,
    absolute,
    add,
    clamp,
    contract,
    expand,
    gather_pairs,
    grad_enabled,
    gradients,
    hard_sigmoid,
    matmul,
    mul,
    narrow,
    no_grad,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    scatter_pairs,
    sigmoid,
    sub,
    swish,
    transpose,
    zero_pad,
)
from .fft import (
    ComplexTensor,
    complex_mode_mul,
    fft_1d,
    fft_2d,
    ifft_1d,
    ifft_2d,
    irfft_1d,
    irfft_2d,
    rfft_1d,
    rfft_2d,
    to_complex,
)
from .gradcheck import GradCheckReport, finite_diff_check
