"""Closed-form diagnostics: stopping-time bounds and worst-case answer likelihoods.

These are analytic companions to the empirical runs.  The stopping-time
bracket depends on the outcome-space size N of the chosen query shape and on
a per-query information floor L supplied by the caller (the floor is posited,
not constructed; an empirical plug-in such as the minimum observed proxy gain
is a labeled estimate, not a guarantee).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .responses import QueryKind, ResponseParams, outcome_space_size


@dataclass(frozen=True)
class BoundInput:
    d: int  # ambient dimension
    M: float  # prior hypercube half-width
    epsilon: float  # per-dimension stopping threshold
    kind: QueryKind
    set_size: int
    L: float  # per-query information floor, bits

    def __post_init__(self):
        if self.M <= 0.5:
            raise ValueError("M must exceed 0.5")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def N(self) -> int:
        return outcome_space_size(self.kind, self.set_size)


@dataclass(frozen=True)
class StoppingBounds:
    lower_raw: float  # may be negative
    lower: float  # clipped at zero
    upper: float


@dataclass(frozen=True)
class LikelihoodFloor:
    gamma1: float  # worst-case choice probability, in (0, 1]
    gamma2: float  # worst-case label probability, in (0, 1)
    gammaL: float  # log2 of the combined per-answer floor


def stopping_bounds(inp: BoundInput) -> StoppingBounds:
    """Bracket on the expected number of interactions before stopping.

    lower = (d/2) * log2(2 M^2 / (pi e eps)) / log2(N)
    upper = (d / 2L) * log2(e^4 d^2 M^2 / (2 sqrt(2) (d+2) eps)) - 1
    """
    d, M, eps = inp.d, inp.M, inp.epsilon
    N = inp.N
    if N < 2:
        raise ValueError("outcome space must have at least 2 answers")
    lower_raw = 0.5 * d * math.log2(2.0 * M * M / (math.pi * math.e * eps)) / math.log2(N)
    upper = (
        0.5
        * d
        / inp.L
        * math.log2(math.e**4 * d * d * M * M / (2.0 * math.sqrt(2.0) * (d + 2) * eps))
        - 1.0
    )
    return StoppingBounds(lower_raw=lower_raw, lower=max(lower_raw, 0.0), upper=upper)


def likelihood_floor(
    params: ResponseParams,
    M: float,
    d: int,
    set_size: int,
    P_x: float = 2.0,
) -> LikelihoodFloor:
    """Worst-case probabilities of any single choice and any single label.

    ``P_x`` bounds the squared item norm; augmented unit items fix it at 2.
    The choice floor gamma1 is the softmax probability of the most
    disadvantaged item at the extreme score separation allowed by the prior
    box; the label floor gamma2 is the matching logistic extreme.  gammaL
    combines them across a ranking's stages in log2.
    """
    if set_size < 1:
        raise ValueError("set_size must be at least 1")
    if P_x <= 0:
        raise ValueError("P_x must be positive")
    c = abs(params.K) * M * math.sqrt(P_x * d)
    if set_size == 1:
        log_gamma1 = 0.0
    else:
        # gamma1 = e^{-c} / (e^{-c} + (m-1) e^{c})
        log_gamma1 = -np.logaddexp(0.0, math.log(set_size - 1) + 2.0 * c)
    cw = abs(params.w) * M * math.sqrt(P_x * d)
    log_gamma2 = -np.logaddexp(0.0, cw)
    gammaL = ((set_size - 1) * log_gamma1 + set_size * log_gamma2) / math.log(2.0)
    return LikelihoodFloor(
        gamma1=float(math.exp(log_gamma1)),
        gamma2=float(math.exp(log_gamma2)),
        gammaL=float(gammaL),
    )
