"""Online sequential test over a stream of event timestamps.

The detector tracks log L in closed form from (elapsed time, event count),
with the same arithmetic as the path simulator, so a stream replayed from a
simulated path stops at the identical time on the identical side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

from .boundary import Boundaries
from .errors import PreconditionError, UndecidedError
from .model import Costs, Decision, Model, PriorOdds, decide, posterior
from .model import LikelihoodState
from .pathsim import Side


@dataclass(frozen=True)
class DetectionOutcome:
    stopped_at: float
    decision: Decision
    psi_at_stop: float
    exit_side: Side
    events_consumed: int
    stopped_at_start: bool = False

    def to_dict(self) -> dict:
        return {
            "stopped_at": self.stopped_at,
            "decision": self.decision.value,
            "psi": self.psi_at_stop,
            "events_consumed": self.events_consumed,
            "exit_side": self.exit_side.value,
            "stopped_at_start": self.stopped_at_start,
        }


class SequentialDetector:
    """Stateful test for one stream.

    Feed event times with :meth:`observe`; call :meth:`advance_to` when the
    clock moves without events.  Both return a :class:`DetectionOutcome` once
    the posterior odds leave (alpha*, beta*), and ``None`` before that.
    """

    def __init__(self, model: Model, boundaries: Boundaries, prior: PriorOdds,
                 costs: Costs | None = None):
        self.model = model
        self.boundaries = boundaries
        self.prior = prior
        self.costs = costs
        self.t = 0.0
        self.n = 0
        self._last_event = -math.inf
        self.outcome: DetectionOutcome | None = None
        psi = prior.psi
        if not boundaries.contains(psi):
            side = Side.LOWER if psi <= boundaries.alpha_star else Side.UPPER
            if costs is not None:
                dec = decide(costs, psi)
            else:
                dec = Decision.ACCEPT_H0 if side is Side.LOWER else Decision.ACCEPT_H1
            self.outcome = DetectionOutcome(0.0, dec, psi, side, 0, stopped_at_start=True)
            return
        # L-space bounds; must match the simulator's Interval(alpha/psi, beta/psi)
        self._lower = boundaries.alpha_star / psi
        self._log_a = math.log(self._lower)
        self._log_b = math.log(boundaries.beta_star / psi)

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def _lower_hit_time(self) -> float:
        return (0.0 + self.n * self.model.log_jump - self._log_a) / self.model.drift

    def advance_to(self, t: float) -> DetectionOutcome | None:
        if self.outcome is not None:
            return self.outcome
        if t < self.t:
            raise PreconditionError(f"time went backwards: {t} < {self.t}")
        t_hit = self._lower_hit_time()
        if t > t_hit:
            self.t = t_hit
            self.outcome = DetectionOutcome(
                stopped_at=t_hit,
                decision=Decision.ACCEPT_H0,
                psi_at_stop=self.boundaries.alpha_star,
                exit_side=Side.LOWER,
                events_consumed=self.n,
            )
            return self.outcome
        self.t = t
        return None

    def observe(self, t: float) -> DetectionOutcome | None:
        """Process one event at absolute time ``t``."""
        if self.outcome is not None:
            return self.outcome
        if not (math.isfinite(t) and t >= 0):
            raise PreconditionError(f"event time must be finite and nonnegative, got {t}")
        if t <= self._last_event:
            raise PreconditionError(
                f"event times must be strictly increasing: {t} after {self._last_event}"
            )
        if self.advance_to(t) is not None:
            return self.outcome
        self._last_event = t
        self.n += 1
        log_after = 0.0 + self.n * self.model.log_jump - self.model.drift * t
        if log_after >= self._log_b:
            psi = self.prior.psi * math.exp(log_after)
            self.outcome = DetectionOutcome(t, Decision.ACCEPT_H1, psi, Side.UPPER, self.n)
        return self.outcome

    def state(self) -> LikelihoodState:
        l = math.exp(self.n * self.model.log_jump - self.model.drift * self.t)
        psi_t, pi_t = posterior(self.prior, l)
        return LikelihoodState(self.t, self.n, l, psi_t, pi_t)


def detect(
    model: Model,
    boundaries: Boundaries,
    prior: PriorOdds,
    stream: Iterable[float],
    costs: Costs | None = None,
    horizon: float | None = None,
) -> DetectionOutcome:
    """Run the test over ``stream``.

    ``horizon`` is the time up to which the stream is known to be complete
    (``math.inf`` for "no further events").  Without it, a stream that ends
    before an exit raises :class:`UndecidedError`.
    """
    det = SequentialDetector(model, boundaries, prior, costs)
    if det.done:
        return det.outcome
    for t in stream:
        if det.observe(float(t)) is not None:
            return det.outcome
    if horizon is not None and det.advance_to(max(horizon, det.t)) is not None:
        return det.outcome
    raise UndecidedError(f"undecided; stream ended at t={det.t}", det.state())


def read_timestamps(fh: TextIO) -> Iterable[float]:
    """Yield one timestamp per non-blank line."""
    for lineno, line in enumerate(fh, 1):
        s = line.strip()
        if not s:
            continue
        try:
            yield float(s)
        except ValueError:
            raise PreconditionError(f"line {lineno}: not a number: {s!r}") from None


def outcome_json(outcome: DetectionOutcome) -> str:
    return json.dumps(outcome.to_dict())
