import numpy as np

from icdcoder.numerics.tensor import Tape


def gradient_check(f, params, eps=1e-4, max_coords=None, rng=None):
    """
    Compare tape gradients of a scalar function with central differences.

    :param f: callable without arguments returning a scalar ``Tensor``
        computed from ``params``.
    :param params: the ``Tensor`` leaves to check; each coordinate is
        perturbed by ``+eps`` and ``-eps`` in turn.
    :param max_coords: check at most this many coordinates per parameter,
        drawn with ``rng``; all coordinates when ``None``.

    Returns the largest relative error
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.
    """
    with Tape() as tape:
        loss = f()
    analytic = [g.copy() for g in tape.backward(loss, params=params)]
    worst = 0.0
    for param, grad in zip(params, analytic):
        coords = list(np.ndindex(*param.shape))
        if max_coords is not None and len(coords) > max_coords:
            rng = rng or np.random.default_rng(0)
            picked = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(picked)]
        for idx in coords:
            original = param.data[idx]
            param.data[idx] = original + eps
            up = f().item()
            param.data[idx] = original - eps
            down = f().item()
            param.data[idx] = original
            numeric = (up - down) / (2 * eps)
            exact = grad[idx]
            error = abs(exact - numeric) / max(1e-8, abs(exact) + abs(numeric))
            worst = max(worst, error)
    return worst
