"""Shared test fixtures: central finite-difference gradient oracles.

The gradient checks treat the tape engine as the object under test, so the
oracle side never touches Tensor internals: it re-evaluates the loss as a
plain function of flat parameter vectors.
"""

import numpy as np

FD_STEP = 1e-6
REL_TOL = 1e-5
ABS_FLOOR = 1e-8


def finite_diff_grad(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_grad_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest relative error with an absolute floor for near-zero entries."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_mlp_gradients(net, loss_fn, rel_tol: float = REL_TOL) -> float:
    """Compare analytic gradients of loss_fn(net) against central differences.

    loss_fn builds a fresh scalar Tensor graph from the network each call;
    parameters are perturbed in place for the numeric side. Returns the worst
    relative error over every parameter entry.
    """
    loss = loss_fn()
    loss.backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in net.parameters()]
    worst = 0.0
    for p, a in zip(net.parameters(), analytic):
        if a is None:
            a = np.zeros_like(p.data)

        def f(_arr, p=p):
            return float(loss_fn().data)

        numeric = np.zeros_like(p.data)
        flat = p.data.ravel()
        nf = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + FD_STEP
            fp = f(None)
            flat[i] = orig - FD_STEP
            fm = f(None)
            flat[i] = orig
            nf[i] = (fp - fm) / (2.0 * FD_STEP)
        worst = max(worst, max_grad_error(a, numeric))
        p.grad = None
    assert worst < rel_tol, f"gradient mismatch: worst rel err {worst:.3e}"
    return worst
