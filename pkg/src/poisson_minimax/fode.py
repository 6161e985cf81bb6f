"""Advanced-argument functional ODEs on [ratio, 1] and the constant gamma*.

With c = lambda1 - lambda0 and the advanced point q(phi) = lambda1 phi / lambda0,

    c phi f0'(phi) = lambda0 [f0(q) - f0(phi)],                 f0(1) = 1, f0 = 0 above 1
    c phi f1'(phi) = lambda0 [f1(q) - f1(phi)] + (phi - 1),     f1(1) = 0, f1 = -b above 1

Integration runs backward from phi = 1 on a grid uniform in u = log phi whose
step divides log(lambda1/lambda0), so q sits a whole number of steps behind
the current point and is always already known.  RK4 midpoint stages read the
advanced term by linear interpolation.  The grid contains lambda0/lambda1
exactly; steps above it see the tail values, steps below it the interior
solution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SolverError
from .model import Costs, Model

DEFAULT_STEPS = 100_000


@dataclass(frozen=True)
class FodeSolution:
    phis: np.ndarray  # descending from 1 to ratio
    f0: np.ndarray
    f1: np.ndarray
    gamma_star: float
    ratio: float
    offset: int  # grid steps spanning log(lambda1/lambda0)
    step: float  # grid step in log phi

    def _at(self, values: np.ndarray, phi: float) -> float:
        if not self.ratio <= phi <= 1.0:
            raise PreconditionError(f"phi={phi} outside [{self.ratio}, 1]")
        # np.interp wants ascending abscissae
        return float(np.interp(math.log(phi), np.log(self.phis[::-1]), values[::-1]))

    def f0_at(self, phi: float) -> float:
        return self._at(self.f0, phi)

    def f1_at(self, phi: float) -> float:
        return self._at(self.f1, phi)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "f0", "f1"])
            for p, a, b in zip(self.phis, self.f0, self.f1):
                w.writerow([f"{p:.17g}", f"{a:.17g}", f"{b:.17g}"])


def _grid(ratio: float, log_jump: float, steps: int):
    span = -math.log(ratio)
    m = max(1, round(steps * log_jump / span))
    h = log_jump / m
    full = int(math.floor(span / h + 1e-9))
    u = [-k * h for k in range(full + 1)]
    if span - full * h > 1e-12 * span:
        u.append(-span)
    else:
        u[-1] = -span
    return np.array(u), m, h


def solve_fode(model: Model, costs: Costs, ratio: float, steps: int = DEFAULT_STEPS) -> FodeSolution:
    """Integrate both equations from phi = 1 down to ``ratio`` with fixed-step RK4."""
    if not 0.0 < ratio < 1.0:
        raise PreconditionError(f"ratio must lie in (0, 1), got {ratio}")
    if steps < 1:
        raise PreconditionError("steps must be positive")
    u, m, h = _grid(ratio, model.log_jump, steps)
    n = len(u)
    c = model.drift
    lam = model.lambda0
    f0 = np.empty(n)
    f1 = np.empty(n)
    f0[0], f1[0] = 1.0, 0.0
    tail0, tail1 = 0.0, -costs.b

    def advanced(values, pos):
        # pos: fractional grid index of the advanced point, within computed range
        i = int(math.floor(pos))
        w = pos - i
        if w == 0.0:
            return values[i]
        return (1.0 - w) * values[i] + w * values[i + 1]

    for k in range(n - 1):
        du = u[k + 1] - u[k]  # negative
        frac = -du / h  # 1 except possibly on the last step
        upper_segment = k + frac <= m + 1e-9
        stage_pos = (k, k + 0.5 * frac, k + frac)
        if upper_segment:
            a0 = (tail0, tail0, tail0)
            a1 = (tail1, tail1, tail1)
        else:
            a0 = tuple(advanced(f0, p - m) for p in stage_pos)
            a1 = tuple(advanced(f1, p - m) for p in stage_pos)
        phi_stage = (math.exp(u[k]), math.exp(u[k] + 0.5 * du), math.exp(u[k + 1]))

        y0 = f0[k]
        k1 = lam * (a0[0] - y0) / c
        k2 = lam * (a0[1] - (y0 + 0.5 * du * k1)) / c
        k3 = lam * (a0[1] - (y0 + 0.5 * du * k2)) / c
        k4 = lam * (a0[2] - (y0 + du * k3)) / c
        f0[k + 1] = y0 + du * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

        y1 = f1[k]
        s = [p - 1.0 for p in phi_stage]
        k1 = (lam * (a1[0] - y1) + s[0]) / c
        k2 = (lam * (a1[1] - (y1 + 0.5 * du * k1)) + s[1]) / c
        k3 = (lam * (a1[1] - (y1 + 0.5 * du * k2)) + s[1]) / c
        k4 = (lam * (a1[2] - (y1 + du * k3)) + s[2]) / c
        f1[k + 1] = y1 + du * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    if np.any(np.diff(f0) <= 0) or np.any(np.diff(f1) <= 0):
        raise SolverError("f0/f1 not strictly decreasing in phi; reduce the step size")
    phis = np.exp(u)
    phis[-1] = ratio
    gamma = gamma_from_values(f0[-1], f1[-1], costs, ratio)
    return FodeSolution(phis, f0, f1, gamma, ratio, m, h)


def gamma_from_values(f0_r: float, f1_r: float, costs: Costs, ratio: float) -> float:
    if f0_r < 1.0:
        raise SolverError(f"f0(ratio) = {f0_r} < 1 contradicts f0(ratio) >= f0(1) = 1")
    return (costs.a * ratio - f1_r) / f0_r


def gamma_from_fode(sol: FodeSolution, costs: Costs, ratio: float | None = None) -> float:
    """(a * ratio - f1(ratio)) / f0(ratio)."""
    r = sol.ratio if ratio is None else ratio
    return gamma_from_values(sol.f0_at(r), sol.f1_at(r), costs, r)


def closed_form_f0(model: Model, phi):
    """f0 on [lambda0/lambda1, 1], where the advanced point lies above 1."""
    return np.power(phi, -model.lambda0 / model.drift)


def residuals(sol: FodeSolution, model: Model, costs: Costs) -> tuple[np.ndarray, np.ndarray]:
    """ODE residuals at interior grid points, derivative by central differences.

    The kink at lambda0/lambda1 and the uneven last step are excluded.
    """
    m, h = sol.offset, sol.step
    n = len(sol.phis)
    k = np.arange(1, n - 2)
    k = k[k != m]
    # d/du with u decreasing along the grid
    d0 = (sol.f0[k - 1] - sol.f0[k + 1]) / (2 * h)
    d1 = (sol.f1[k - 1] - sol.f1[k + 1]) / (2 * h)
    adv_idx = k - m
    above = adv_idx <= 0
    a0 = np.where(above, 0.0, sol.f0[np.maximum(adv_idx, 0)])
    a1 = np.where(above, -costs.b, sol.f1[np.maximum(adv_idx, 0)])
    lam, c = model.lambda0, model.drift
    r0 = -c * d0 + lam * (a0 - sol.f0[k])
    r1 = -c * d1 + lam * (a1 - sol.f1[k]) + (sol.phis[k] - 1.0)
    return r0, r1
