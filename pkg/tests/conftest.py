import numpy as np
import pytest

import sprkit.autodiff as ad


def gradcheck(fn, params, h=1e-5, rtol=1e-4):
    """Compare analytic gradients of a scalar-valued fn() against central
    finite differences for every entry of every parameter.

    fn must be a pure function of the parameter values. Relative error is
    measured against the largest gradient magnitude per parameter.
    """
    for p in params:
        p.grad = None
    loss = fn()
    ad.backward(loss)
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter missing from graph"
        analytic = p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with ad.no_grad():
                fp = fn().item()
            flat[i] = orig - h
            with ad.no_grad():
                fm = fn().item()
            flat[i] = orig
            nflat[i] = (fp - fm) / (2.0 * h)
        denom = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
        rel = np.max(np.abs(analytic - numeric)) / denom
        worst = max(worst, rel)
        assert rel < rtol, f"gradcheck failed: rel err {rel:.3e} (rtol {rtol})"
    for p in params:
        p.grad = None
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
