"""Central finite-difference gradient checking for engine ops."""

import numpy as np

from fmim.engine import Tensor


def finite_difference(fn, arr: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of scalar fn() w.r.t. arr (perturbed in place)."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = fn()
        flat[i] = orig - eps
        f_minus = fn()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Relative error with a unit floor so near-zero entries compare absolutely."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_op(build, arrays: dict[str, np.ndarray], eps: float = 1e-4) -> float:
    """Gradient-check a scalar-valued graph builder.

    build(tensors) must construct a fresh graph from the given
    {name: Tensor} mapping and return the scalar output Tensor. Returns
    the worst relative error across all checked arrays.
    """
    tensors = {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}
    out = build(tensors)
    out.backward()
    worst = 0.0
    for name, arr in arrays.items():
        def scalar():
            fresh = {n: Tensor(a) for n, a in arrays.items()}
            return float(build(fresh).data)
        numeric = finite_difference(scalar, arr, eps)
        worst = max(worst, max_rel_err(tensors[name].grad, numeric))
    return worst
