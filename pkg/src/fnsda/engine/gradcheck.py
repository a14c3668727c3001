"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import gradients


@dataclass
class GradCheckReport:
    max_rel_error: float = 0.0
    per_param: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def ok(self, tol):
        return self.max_rel_error < tol


def finite_diff_check(f, params, h=1e-6, tol=1e-4, max_coords=None, seed=0):
    """Compare tape gradients of ``f()`` against central differences.

    ``f`` must be deterministic and rebuild its graph from the current
    ``params`` values on every call. When ``max_coords`` is set, a seeded
    random subset of coordinates is probed per parameter. The relative
    error uses a small additive floor so near-zero gradients compare on
    an absolute scale.
    """
    analytic = gradients(f(), params)
    rng = np.random.default_rng(seed)
    report = GradCheckReport()
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        worst = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            f_plus = f().item()
            flat[idx] = orig - h
            f_minus = f().item()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic[name].reshape(-1)[idx]
            rel = abs(a - numeric) / (max(abs(a), abs(numeric)) + 1e-4)
            if rel > worst:
                worst = rel
            if rel > tol:
                report.failures.append((name, int(idx), float(a), float(numeric), float(rel)))
        report.per_param[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    return report
