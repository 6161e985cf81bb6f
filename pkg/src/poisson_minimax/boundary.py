"""Optimal stopping boundaries by value iteration on a log-uniform grid.

The value function in posterior-odds space is

    V(phi) = inf_tau E0[ int_0^tau (1 + Psi_t) dt + min(a Psi_tau, b) ],  Psi_0 = phi,

with terminal cost g(phi) = min(a phi, b).  One explicit time step of length
dt gives the operator

    V(phi) <- min{ g(phi), (1 + phi) dt + (1 - lambda0 dt) V(phi e^{-(lambda1-lambda0) dt})
                                        + lambda0 dt V(phi lambda1 / lambda0) }.

On a log-uniform grid both shifted arguments are fixed index offsets with
constant interpolation weights, so each sweep is a handful of vector ops.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError
from .model import Costs, Model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DpConfig:
    grid_points: int = 4001
    phi_min: float | None = None
    phi_max: float | None = None
    dt: float | None = None
    tol: float = 1e-9
    max_iters: int = 5_000_000
    contact_tol: float = 1e-6

    def __post_init__(self):
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2", field="grid_points")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive", field="dt")
        if not self.tol > 0:
            raise ConfigError("tol must be positive", field="tol")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive", field="max_iters")
        if not self.contact_tol > 0:
            raise ConfigError("contact_tol must be positive", field="contact_tol")

    def resolve(self, model: Model, costs: Costs) -> "DpConfig":
        """Fill in the model-dependent defaults."""
        alpha_guess = costs.threshold / 20.0
        phi_min = self.phi_min if self.phi_min is not None else alpha_guess / 10.0
        phi_max = (self.phi_max if self.phi_max is not None
                   else costs.threshold * model.jump_ratio * 10.0)
        dt = self.dt if self.dt is not None else 1e-4 / model.drift
        if not 0 < phi_min < phi_max:
            raise ConfigError(f"need 0 < phi_min < phi_max, got {phi_min}, {phi_max}",
                              field="phi_min")
        if dt * model.lambda0 >= 1:
            raise ConfigError(
                f"dt * lambda0 = {dt * model.lambda0} >= 1 gives a negative weight", field="dt"
            )
        return DpConfig(self.grid_points, phi_min, phi_max, dt, self.tol, self.max_iters,
                        self.contact_tol)


@dataclass(frozen=True)
class Boundaries:
    alpha_star: float
    beta_star: float

    @property
    def ratio(self) -> float:
        return self.alpha_star / self.beta_star

    def contains(self, phi: float) -> bool:
        return self.alpha_star < phi < self.beta_star


@dataclass
class ValueGrid:
    phis: np.ndarray
    values: np.ndarray
    gains: np.ndarray
    costs: Costs
    iterations: int = 0
    last_delta: float = 0.0

    def value_at(self, phi: float) -> float:
        """Linear interpolation in log phi; the gain outside the grid."""
        if phi < self.phis[0] or phi > self.phis[-1]:
            return self.costs.gain(float(phi))
        return float(np.interp(math.log(phi), np.log(self.phis), self.values))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "value", "gain"])
            for p, v, g in zip(self.phis, self.values, self.gains):
                w.writerow([f"{p:.17g}", f"{v:.17g}", f"{g:.17g}"])


def _shift_weights(x: np.ndarray, shift: float):
    """Index and weight for linear interpolation at x + shift; mask of out-of-grid points."""
    h = x[1] - x[0]
    pos = (x + shift - x[0]) / h
    outside = (pos < 0) | (pos > len(x) - 1)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, len(x) - 2)
    w = np.clip(pos - i0, 0.0, 1.0)
    return i0, w, outside


def solve_value(model: Model, costs: Costs, config: DpConfig | None = None) -> ValueGrid:
    """Fixed point of the one-step operator, iterated from V = g.

    Raises ``SolverError`` if ``max_iters`` sweeps do not bring the sup-norm
    change below ``tol``.
    """
    cfg = (config or DpConfig()).resolve(model, costs)
    x = np.linspace(math.log(cfg.phi_min), math.log(cfg.phi_max), cfg.grid_points)
    phis = np.exp(x)
    g = np.minimum(costs.a * phis, costs.b)
    dt = cfg.dt

    def gain_at(shift):
        return np.minimum(costs.a * np.exp(x + shift), costs.b)

    sd = -model.drift * dt
    sj = model.log_jump
    di, dw, dout = _shift_weights(x, sd)
    ji, jw, jout = _shift_weights(x, sj)
    gd, gj = gain_at(sd), gain_at(sj)
    running = (1.0 + phis) * dt
    p_stay = 1.0 - model.lambda0 * dt
    p_jump = model.lambda0 * dt

    v = g.copy()
    delta = math.inf
    for it in range(1, cfg.max_iters + 1):
        vd = (1.0 - dw) * v[di] + dw * v[di + 1]
        vd[dout] = gd[dout]
        vj = (1.0 - jw) * v[ji] + jw * v[ji + 1]
        vj[jout] = gj[jout]
        vn = np.minimum(g, running + p_stay * vd + p_jump * vj)
        if np.any(vn > v):
            raise SolverError("value iteration lost monotonicity", iteration=it)
        delta = float(np.max(v - vn))
        v = vn
        if delta < cfg.tol:
            log.debug("value iteration converged after %d sweeps", it)
            return ValueGrid(phis, v, g, costs, it, delta)
    raise SolverError(
        f"value iteration did not converge in {cfg.max_iters} sweeps (last delta {delta:.3g})",
        last_delta=delta,
    )


def extract_boundaries(grid: ValueGrid, contact_tol: float = 1e-6) -> Boundaries:
    """Edges of the continuation region {g - V > contact_tol} around b/a."""
    gap = grid.gains - grid.values
    phis = grid.phis
    thr = grid.costs.threshold
    contact = gap <= contact_tol

    below = np.nonzero(contact & (phis < thr))[0]
    above = np.nonzero(contact & (phis > thr))[0]
    if below.size == 0 or above.size == 0:
        raise SolverError("degenerate continuation region")
    i = below[-1]
    j = above[0]
    if j - i < 3 or np.any(contact[i + 1:j]):
        raise SolverError("degenerate continuation region")

    alpha = _zero_crossing(phis, gap, i + 1, i + 2, phis[i])
    beta = _zero_crossing(phis, gap, j - 1, j - 2, phis[j])
    if not 0 < alpha < thr < beta:
        raise SolverError(
            f"boundaries violate 0 < alpha < b/a < beta: ({alpha}, {beta})",
            alpha=alpha, beta=beta,
        )
    return Boundaries(float(alpha), float(beta))


def _zero_crossing(phis, gap, k_edge, k_inner, p_contact):
    """Extend the secant through the two outermost interior points to gap = 0.

    The result is clamped between the last contact point and the first
    interior point.
    """
    p1, d1 = phis[k_edge], gap[k_edge]
    p2, d2 = phis[k_inner], gap[k_inner]
    if d2 == d1:
        return p1
    z = p1 - d1 * (p2 - p1) / (d2 - d1)
    lo, hi = sorted((p_contact, p1))
    return min(max(z, lo), hi)


def solve_boundaries(model: Model, costs: Costs, config: DpConfig | None = None) -> Boundaries:
    cfg = config or DpConfig()
    return extract_boundaries(solve_value(model, costs, cfg), cfg.contact_tol)
