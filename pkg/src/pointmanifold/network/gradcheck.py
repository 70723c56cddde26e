"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple | None  # (name, index, analytic, numeric)
    tolerance: float
    n_checked: int
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        state = "ok" if self.passed else f"FAILED ({len(self.failures)} entries)"
        return f"gradcheck {state}: max rel err {self.max_rel_error:.3e} over {self.n_checked} entries"


def relative_error(analytic, numeric, floor=1e-5):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps noise on ~zero gradients from dominating."""
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def grad_check(loss_fn, arrays, grads, h=1e-5, tolerance=1e-4, max_entries=None, seed=0, floor=1e-5):
    """Compare analytic gradients with central differences.

    Parameters
    ----------
    loss_fn : callable
        ``loss_fn()`` returns a scalar computed from the current contents of
        ``arrays``; entries are perturbed in place and restored.
    arrays : mapping of name -> ndarray
        Tensors to differentiate with respect to.
    grads : mapping of name -> ndarray
        Analytic gradients, same shapes as ``arrays``.
    max_entries : int, optional
        Check a random subset of at most this many entries per tensor.
    """
    rng = np.random.default_rng(seed)
    worst = None
    max_err = 0.0
    failures = []
    checked = 0
    for name, arr in arrays.items():
        analytic = np.asarray(grads[name])
        if analytic.shape != arr.shape:
            failures.append((name, None, "shape", analytic.shape, arr.shape))
            continue
        flat_indices = np.arange(arr.size)
        if max_entries is not None and arr.size > max_entries:
            flat_indices = np.sort(rng.choice(arr.size, size=max_entries, replace=False))
        for flat in flat_indices:
            index = np.unravel_index(flat, arr.shape)
            old = arr[index]
            arr[index] = old + h
            plus = loss_fn()
            arr[index] = old - h
            minus = loss_fn()
            arr[index] = old
            numeric = (plus - minus) / (2.0 * h)
            a = float(analytic[index])
            err = float(relative_error(a, numeric, floor))
            checked += 1
            if worst is None or err > max_err:
                max_err = err
                worst = (name, tuple(int(i) for i in index), a, float(numeric))
            if err > tolerance:
                failures.append((name, tuple(int(i) for i in index), a, float(numeric)))
    return GradCheckReport(max_err, worst, tolerance, checked, failures)


def check_layer(layer, x, forward=None, h=1e-5, tolerance=1e-4, seed=0, check_input=True, max_entries=None):
    """Gradient-check a layer against a random linear functional of its output.

    ``forward(x)`` defaults to ``layer.forward(x)``. Returns the report for all
    layer parameters plus (optionally) the input.
    """
    forward = forward or layer.forward
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(np.shape(forward(x)))

    def loss():
        return float((forward(x) * weights).sum())

    layer.zero_grad()
    forward(x)
    gx = layer.backward(weights)
    arrays = {name: p.value for name, p in layer.named_parameters()}
    grads = {name: p.grad.copy() for name, p in layer.named_parameters()}
    if check_input:
        arrays["input"] = x
        grads["input"] = gx
    return grad_check(loss, arrays, grads, h=h, tolerance=tolerance, seed=seed, max_entries=max_entries)
