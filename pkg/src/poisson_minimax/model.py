"""Hypothesis pair, costs, and the closed-form likelihood/posterior processes.

Under H0 the observed counting process has intensity ``lambda0``; under H1 it
has ``lambda1 > lambda0``.  After ``n`` events in elapsed time ``t`` the
likelihood ratio of H1 against H0 is

    L = exp(n * log(lambda1 / lambda0) - (lambda1 - lambda0) * t)

and the posterior odds of H1 are ``psi * L`` for prior odds ``psi``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class Regime(str, enum.Enum):
    TRIVIAL = "Trivial"
    NONTRIVIAL = "NonTrivial"


class Decision(str, enum.Enum):
    ACCEPT_H0 = "H0"
    ACCEPT_H1 = "H1"


@dataclass(frozen=True)
class Model:
    """Intensities under the two simple hypotheses."""

    lambda0: float
    lambda1: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda0) and self.lambda0 > 0):
            raise ConfigError(f"lambda0 must be positive, got {self.lambda0}", field="lambda0")
        if not (math.isfinite(self.lambda1) and self.lambda1 > self.lambda0):
            raise ConfigError(
                f"lambda1 must exceed lambda0={self.lambda0}, got {self.lambda1}",
                field="lambda1",
            )

    @property
    def drift(self) -> float:
        """Decay rate of log L between events."""
        return self.lambda1 - self.lambda0

    @property
    def jump_ratio(self) -> float:
        """Factor applied to L at every event."""
        return self.lambda1 / self.lambda0

    @property
    def log_jump(self) -> float:
        return math.log(self.lambda1 / self.lambda0)


@dataclass(frozen=True)
class Costs:
    """Penalties for a wrong terminal decision.

    ``a`` is charged for accepting H0 when H1 holds, ``b`` for accepting H1
    when H0 holds.
    """

    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"cost {name} must be positive, got {v}", field=name)

    @property
    def threshold(self) -> float:
        """Posterior odds b/a at which both decisions cost the same."""
        return self.b / self.a

    def gain(self, phi):
        """Terminal cost min(a*phi, b); works elementwise on arrays."""
        if isinstance(phi, float | int):
            return min(self.a * phi, self.b)
        return np.minimum(self.a * np.asarray(phi, dtype=float), self.b)


@dataclass(frozen=True)
class PriorOdds:
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.psi) and self.psi > 0):
            raise ConfigError(f"prior odds must be positive, got {self.psi}", field="psi")

    @property
    def pi(self) -> float:
        return self.psi / (1.0 + self.psi)

    @classmethod
    def from_probability(cls, pi: float) -> "PriorOdds":
        if not 0.0 < pi < 1.0:
            raise ConfigError(f"prior probability must lie in (0, 1), got {pi}", field="pi")
        return cls(pi / (1.0 - pi))


@dataclass(frozen=True)
class LikelihoodState:
    t: float
    n: int
    l: float
    psi_t: float
    pi_t: float

    def to_dict(self) -> dict:
        return {"t": self.t, "n": self.n, "l": self.l, "psi": self.psi_t, "pi": self.pi_t}


def classify_regime(model: Model, costs: Costs) -> Regime:
    """Stopping at once is optimal when lambda1 - lambda0 <= 1/a + 1/b."""
    if model.lambda1 - model.lambda0 <= 1.0 / costs.a + 1.0 / costs.b:
        return Regime.TRIVIAL
    return Regime.NONTRIVIAL


def log_likelihood(model: Model, t: float, n: int) -> float:
    return n * model.log_jump - model.drift * t


def likelihood(model: Model, t: float, n: int) -> float:
    if t < 0 or n < 0:
        raise ValueError("likelihood needs t >= 0 and n >= 0")
    return math.exp(log_likelihood(model, t, n))


def posterior(prior: PriorOdds, l: float) -> tuple[float, float]:
    """Return (posterior odds, posterior probability of H1) given likelihood ratio ``l``."""
    if not l > 0:
        raise ValueError(f"likelihood ratio must be positive, got {l}")
    psi_t = prior.psi * l
    # 1/(1+1/x) keeps pi_t < 1 representable for large odds
    pi_t = psi_t / (1.0 + psi_t) if psi_t <= 1.0 else 1.0 / (1.0 + 1.0 / psi_t)
    return psi_t, pi_t


def state_at(model: Model, prior: PriorOdds, t: float, n: int) -> LikelihoodState:
    l = likelihood(model, t, n)
    psi_t, pi_t = posterior(prior, l)
    return LikelihoodState(t=t, n=n, l=l, psi_t=psi_t, pi_t=pi_t)


def decide(costs: Costs, psi_at_stop: float) -> Decision:
    """Terminal decision; a tie at psi == b/a goes to H0."""
    if psi_at_stop < 0:
        raise ValueError("posterior odds must be nonnegative")
    if costs.a * psi_at_stop > costs.b:
        return Decision.ACCEPT_H1
    return Decision.ACCEPT_H0
