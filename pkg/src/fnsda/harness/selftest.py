"""Engine self-checks behind the ``gradcheck`` CLI verb."""

from __future__ import annotations

import numpy as np

from ..engine import (
    ComplexTensor,
    Tensor,
    absolute,
    clamp,
    complex_mode_mul,
    contract,
    expand,
    fft_1d,
    finite_diff_check,
    hard_sigmoid,
    ifft_1d,
    irfft_1d,
    matmul,
    narrow,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    rfft_1d,
    sigmoid,
    swish,
    transpose,
    zero_pad,
)
from ..model import EnvContext, ModelConfig, init_params, model_forward

GRADCHECK_TOL = 1e-4


def fft_roundtrip_errors(sizes=(2, 4, 8, 16, 32, 64), seed=0):
    rng = np.random.default_rng(seed)
    errors = {}
    for n in sizes:
        x = rng.standard_normal(n)
        back = ifft_1d(fft_1d(Tensor(x), axis=0), axis=0)
        err = max(np.max(np.abs(back.re.data - x)), np.max(np.abs(back.im.data)))
        X = fft_1d(Tensor(x), axis=0).value()
        parseval = abs(np.sum(x**2) - np.sum(np.abs(X) ** 2) / n) / max(np.sum(x**2), 1e-12)
        errors[n] = max(err, parseval)
    return errors


def op_gradchecks(seed=0):
    """Finite-difference checks per differentiable op, away from kinks."""
    rng = np.random.default_rng(seed)
    reports = {}

    def check(name, f, params, max_coords=24):
        reports[name] = finite_diff_check(f, params, max_coords=max_coords).max_rel_error

    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    check("add/mul", lambda: reduce_sum((a + b) * a - b * 0.5), {"a": a, "b": b})

    w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    check("matmul", lambda: reduce_sum(matmul(a, w) * matmul(a, w)), {"a": a, "w": w})

    t = Tensor(rng.standard_normal((2, 3, 4, 5)), requires_grad=True)
    c = Tensor(rng.standard_normal(5), requires_grad=True)

    def contraction():
        r = contract(t, c, ([3], [0]))
        return reduce_sum(r * r)

    check("contract", contraction, {"t": t, "c": c})

    check(
        "reduce/expand",
        lambda: reduce_mean(expand(reshape(reduce_sum(a, axis=1), (3, 1)), (3, 4)) * b),
        {"a": a, "b": b},
    )

    p = Tensor(rng.uniform(-2.4, 2.4, 9), requires_grad=True)
    beta = Tensor(0.8, requires_grad=True)
    check("sigmoid", lambda: reduce_sum(sigmoid(p)), {"p": p})
    check("hard_sigmoid", lambda: reduce_sum(hard_sigmoid(p)), {"p": p})
    check("swish", lambda: reduce_sum(swish(p, beta)), {"p": p, "beta": beta})
    check("relu/abs/clamp", lambda: reduce_sum(relu(p) + absolute(p) + clamp(p, -1.5, 1.5)), {"p": p})

    x = Tensor(rng.standard_normal((2, 8, 3)), requires_grad=True)

    def fft_path():
        z = rfft_1d(x, axis=1)
        zt = ComplexTensor(narrow(z.re, 1, 0, 3), narrow(z.im, 1, 0, 3))
        zp = ComplexTensor(zero_pad(zt.re, 1, 5, 0), zero_pad(zt.im, 1, 5, 0))
        y = irfft_1d(zp, 8, axis=1)
        return reduce_sum(y * y)

    check("fft_path", fft_path, {"x": x})

    wr = Tensor(rng.standard_normal((3, 4, 4)) * 0.4, requires_grad=True)
    wi = Tensor(rng.standard_normal((3, 4, 4)) * 0.4, requires_grad=True)
    zc = ComplexTensor(Tensor(rng.standard_normal((2, 3, 4))), Tensor(rng.standard_normal((2, 3, 4))))

    def mode_mul():
        out = complex_mode_mul(ComplexTensor(wr, wi), zc)
        return reduce_sum(out.re * out.re + out.im * out.im)

    check("complex_mode_mul", mode_mul, {"wr": wr, "wi": wi})

    tr = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
    check("transpose", lambda: reduce_sum(transpose(tr, (2, 0, 1)) * transpose(tr, (2, 0, 1))), {"t": tr})
    return reports


def tiny_model_gradcheck(seed=0):
    """Full forward/backward check on the smallest spectral config."""
    rng = np.random.default_rng(seed)
    config = ModelConfig(
        family="lv", layers=1, width=4, modes=2, context_dim=3, state_channels=2
    )
    params = init_params(config)
    ctx = EnvContext.fresh(config)
    ctx.c.data[:] = rng.standard_normal(3) * 0.5
    u = rng.uniform(1.0, 3.0, (3, 2))
    target = rng.standard_normal((3, 2))

    def f():
        d = model_forward(u, ctx, params, config) - Tensor(target)
        return reduce_mean(d * d)

    group = dict(params)
    group["ctx.c"] = ctx.c
    group["ctx.beta"] = ctx.beta
    return finite_diff_check(f, group, max_coords=20)


def run_selftest(verbose=True):
    ok = True
    for n, err in fft_roundtrip_errors().items():
        good = err < 1e-10
        ok &= good
        if verbose:
            print(f"fft roundtrip+parseval n={n:<3d} err={err:.3e} {'ok' if good else 'FAIL'}")
    for name, err in op_gradchecks().items():
        good = err < GRADCHECK_TOL
        ok &= good
        if verbose:
            print(f"gradcheck {name:<18s} err={err:.3e} {'ok' if good else 'FAIL'}")
    rep = tiny_model_gradcheck()
    good = rep.ok(GRADCHECK_TOL)
    ok &= good
    if verbose:
        print(f"gradcheck full-model      err={rep.max_rel_error:.3e} {'ok' if good else 'FAIL'}")
    return ok
