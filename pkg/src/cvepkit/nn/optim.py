"""Adam optimizer with coupled L2 regularization."""

from __future__ import annotations

import numpy as np

from .layers import Parameter


class Adam:
    """Adam with bias-corrected moments.

    The L2 penalty is added to the gradient before the moment updates
    (coupled weight decay), matching the common framework default.

    Parameters
    ----------
    params : list of Parameter
    lr : float
        Step size.
    weight_decay : float
        L2 coefficient applied to every parameter, biases included.
    betas : tuple of float
        Exponential decay rates of the two moment estimates.
    eps : float
        Denominator floor.
    """

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 weight_decay: float = 1e-4, betas: tuple = (0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad[...] = 0.0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.value
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
