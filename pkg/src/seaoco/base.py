"""Common learner interface used by the harness.

A learner serves a batch of B independent episodes. ``play`` returns the
(B, d) iterates for round t and ``observe`` consumes the round's samples.
Gradients handed back in ``RoundInfo`` are those of the unscaled loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossFamily, Sample


@dataclass
class RoundInfo:
    g: np.ndarray  # grad f(x_t, xi_t)
    step: np.ndarray  # step size in force at round t (eta_t, gamma_t, ...)
    pair: np.ndarray  # y_t, where the optimistic gradient was evaluated
    optimism: np.ndarray  # grad f(y_t, xi_{t-1}); zero at t = 1


class Learner:
    name = "abstract"

    def __init__(self, domain, family: LossFamily, batch: int = 1, loss_scale=None):
        self.domain = domain
        self.family = family
        self.B = int(batch)
        self.dim = domain.dim
        self.D = domain.diameter()
        self.loss_scale = loss_scale or (lambda t: 1.0)
        self.history: dict = {}

    def play(self, t: int, env) -> np.ndarray:
        raise NotImplementedError

    def observe(self, t: int, sample: Sample) -> RoundInfo:
        raise NotImplementedError

    def zeros(self, *shape):
        return np.zeros((self.B,) + shape)
