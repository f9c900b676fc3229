"""Finite-difference gradient oracle, independent of the analytic backward pass."""

import numpy as np

from semshard.core import Rng
from semshard.dqn import QNetwork, loss_and_gradients

OBS = 8


def numeric_gradients(net, obs, actions, targets, h=1e-5):
    """Central finite differences over every parameter."""
    grads = {}
    for name, param in net.parameters().items():
        grad = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = param[idx]
            param[idx] = original + h
            up, _ = loss_and_gradients(net, obs, actions, targets)
            param[idx] = original - h
            down, _ = loss_and_gradients(net, obs, actions, targets)
            param[idx] = original
            grad[idx] = (up - down) / (2 * h)
            it.iternext()
        grads[name] = grad
    return grads


def gradient_check_instance(seed, hidden=10, batch=4):
    """A random instance kept away from the ReLU kink (|z1| > 1e-4),
    where the finite-difference quotient is ill-defined; returns None when
    the draw lands too close."""
    rng = Rng(seed)
    net = QNetwork(OBS, hidden, 5, rng)
    obs = rng.uniform(0.05, 1.0, (batch, OBS))
    z1 = obs @ net.w1 + net.b1
    if np.min(np.abs(z1)) < 1e-4:
        return None
    actions = rng.integers(0, 4, size=batch)
    targets = rng.uniform(-1.0, 1.0, batch)
    return net, obs, actions, targets


def max_relative_gradient_error(net, obs, actions, targets):
    _, analytic = loss_and_gradients(net, obs, actions, targets)
    numeric = numeric_gradients(net, obs, actions, targets)
    worst = 0.0
    for name in analytic:
        denom = np.maximum(np.abs(analytic[name]) + np.abs(numeric[name]),
                           1e-8)
        worst = max(worst, float(np.max(np.abs(analytic[name] - numeric[name])
                                        / denom)))
    return worst
