"""Least favorable prior odds via the sign of h.

For a candidate prior odds phi0 inside (alpha*, beta*), the test stops when
phi0 * L leaves (alpha*, beta*).  Started from L = 1 the exit is either a lower
exit at L = alpha*/phi0 or an upper exit past beta*/phi0, and

    h(phi0) = (a alpha*/phi0 + b) P0(lower exit) - b + E0 int_0^tau (L_t - 1) dt.

The Bayes risk of that test, as a function of the true prior odds, peaks at
phi0 exactly when h(phi0) = 0; h(alpha*+) = a and h(beta*-) = gamma*.  When
gamma* < 0 a root exists and bisection finds one.  All evaluations inside a
search share the same seed and path count, so the estimate of h is a fixed
function of phi0 and the bisection is well posed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import Boundaries, DpConfig, solve_boundaries
from .errors import ConfigError, PreconditionError, SolverError
from .fode import DEFAULT_STEPS, solve_fode
from .model import Costs, Model, Regime, classify_regime
from .pathsim import ExitBatch, Interval, functionals, simulate_exits

log = logging.getLogger(__name__)

# stream offsets keep the confirmation run disjoint from the search paths
_CONFIRM_SALT = 0x5EED_C0FF_EE00_0001
_GAMMA_SALT = 0x5EED_0000_6A44_0002
_SADDLE_SALT = 0x5EED_0000_5ADD_0003


@dataclass(frozen=True)
class HEstimate:
    phi0: float
    h: float
    se: float
    p_lower: float
    mean_int: float
    n_paths: int


@dataclass(frozen=True)
class LfdConfig:
    dp: DpConfig = field(default_factory=DpConfig)
    fode_steps: int = DEFAULT_STEPS
    seed: int = 20240601
    n_paths: int = 1_000_000
    saddle_paths: int = 100_000
    phi_tol: float = 1e-3
    inset: float = 1e-3
    prescan_points: int = 32
    psi_grid: tuple[float, float, int] | None = None  # default (alpha*/4, 4 beta*, 50)
    max_bisections: int = 60
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 2 or self.saddle_paths < 2:
            raise ConfigError("path counts must be at least 2", field="n_paths")
        if not self.phi_tol > 0:
            raise ConfigError("phi_tol must be positive", field="phi_tol")
        if not 0 < self.inset < 0.5:
            raise ConfigError("inset must lie in (0, 0.5)", field="inset")
        if self.prescan_points < 2:
            raise ConfigError("prescan_points must be at least 2", field="prescan_points")
        if self.fode_steps < 1:
            raise ConfigError("fode_steps must be positive", field="fode_steps")
        if self.psi_grid is not None:
            lo, hi, count = self.psi_grid
            if not (0 < lo < hi) or int(count) < 2:
                raise ConfigError("psi_grid needs 0 < min < max and count >= 2", field="psi_grid")


@dataclass
class LfdReport:
    regime: Regime
    phi0: float | None
    boundaries: Boundaries | None = None
    gamma_fode: float | None = None
    gamma_mc: float | None = None
    gamma_mc_se: float | None = None
    existence_guaranteed: bool = True
    h_at_phi0: float | None = None
    h_at_phi0_se: float | None = None
    h_tolerance: float | None = None
    h_at_threshold: HEstimate | None = None
    bracket: tuple[float, float] | None = None
    evaluations: list[HEstimate] = field(default_factory=list)
    prescan: list[HEstimate] = field(default_factory=list)
    sign_changes: list[tuple[float, float]] = field(default_factory=list)
    saddle_curve: list[tuple[float, float, float]] = field(default_factory=list)
    jbar_at_phi0: tuple[float, float] | None = None
    note: str = ""

    @property
    def l_interval(self) -> tuple[float, float] | None:
        """Stopping interval for L under the least favorable prior."""
        if self.boundaries is None or self.phi0 is None:
            return None
        return (self.boundaries.alpha_star / self.phi0, self.boundaries.beta_star / self.phi0)


def _stop_interval(boundaries: Boundaries, phi0: float) -> Interval:
    return Interval(boundaries.alpha_star / phi0, boundaries.beta_star / phi0)


def h_from_batch(batch: ExitBatch, costs: Costs, boundaries: Boundaries, phi0: float) -> HEstimate:
    f = functionals(batch)
    coef = costs.a * boundaries.alpha_star / phi0 + costs.b
    h = coef * f.p_lower - costs.b + f.mean_int_l_minus_1
    per_path = coef * batch.lower + (batch.int_l_dt - batch.tau)
    se = float(np.std(per_path, ddof=1) / math.sqrt(len(batch)))
    return HEstimate(phi0, h, se, f.p_lower, f.mean_int_l_minus_1, len(batch))


def estimate_h(
    model: Model,
    costs: Costs,
    boundaries: Boundaries,
    phi0: float,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> HEstimate:
    """Monte Carlo estimate of h(phi0) from exits of L out of (alpha*/phi0, beta*/phi0)."""
    if not boundaries.contains(phi0):
        raise PreconditionError(
            f"phi0={phi0} outside ({boundaries.alpha_star}, {boundaries.beta_star})"
        )
    batch = simulate_exits(model, _stop_interval(boundaries, phi0), 1.0, n_paths, seed,
                           workers=workers)
    return h_from_batch(batch, costs, boundaries, phi0)


def gamma_mc(
    model: Model, costs: Costs, ratio: float, n_paths: int, seed: int, workers: int = 1
) -> tuple[float, float]:
    """gamma* from exits of L out of (ratio, 1] started at 1."""
    if not 0.0 < ratio < 1.0:
        raise PreconditionError(f"ratio must lie in (0, 1), got {ratio}")
    batch = simulate_exits(model, Interval(ratio, 1.0, upper_closed=True), 1.0, n_paths, seed,
                           workers=workers)
    f = functionals(batch)
    coef = costs.a * ratio + costs.b
    est = coef * f.p_lower - costs.b + f.mean_int_l_minus_1
    per_path = coef * batch.lower + (batch.int_l_dt - batch.tau)
    return est, float(np.std(per_path, ddof=1) / math.sqrt(n_paths))


def jbar_immediate(costs: Costs, psi):
    """Bayes risk of stopping at once: min(b, a psi) / (1 + psi)."""
    psi = np.asarray(psi, dtype=float)
    out = np.minimum(costs.b, costs.a * psi) / (1.0 + psi)
    return float(out) if out.ndim == 0 else out


def jbar_from_batch(batch: ExitBatch, costs: Costs, psi: float) -> tuple[float, float]:
    """Bayes risk under prior odds ``psi`` of the stopping rule that produced ``batch``."""
    per_path = (batch.tau + psi * batch.int_l_dt
                + np.minimum(costs.b, costs.a * psi * batch.l_exit)) / (1.0 + psi)
    return float(np.mean(per_path)), float(np.std(per_path, ddof=1) / math.sqrt(len(batch)))


def estimate_jbar(
    model: Model,
    costs: Costs,
    boundaries: Boundaries,
    phi0: float,
    psi: float,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> tuple[float, float]:
    if not boundaries.contains(phi0):
        raise PreconditionError(
            f"phi0={phi0} outside ({boundaries.alpha_star}, {boundaries.beta_star})"
        )
    if not psi > 0:
        raise PreconditionError("psi must be positive")
    batch = simulate_exits(model, _stop_interval(boundaries, phi0), 1.0, n_paths, seed,
                           workers=workers)
    return jbar_from_batch(batch, costs, psi)


def psi_sweep(lo: float, hi: float, count: int) -> np.ndarray:
    return np.geomspace(lo, hi, int(count))


def _bisect(evaluate, lo: HEstimate, hi: HEstimate, phi_tol: float, max_steps: int):
    """Shrink [lo, hi] with h(lo) > 0 > h(hi) until narrow or |h| < 2 se."""
    evals = []
    for _ in range(max_steps):
        if hi.phi0 - lo.phi0 < phi_tol:
            break
        mid = evaluate(0.5 * (lo.phi0 + hi.phi0))
        evals.append(mid)
        if abs(mid.h) < 2.0 * mid.se:
            return mid.phi0, (lo.phi0, hi.phi0), evals
        if mid.h > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo.phi0 + hi.phi0), (lo.phi0, hi.phi0), evals


def find_lfd(model: Model, costs: Costs, config: LfdConfig | None = None) -> LfdReport:
    """Full pipeline: regime, boundaries, gamma*, root of h, saddle sweep."""
    cfg = config or LfdConfig()
    regime = classify_regime(model, costs)
    if regime is Regime.TRIVIAL:
        thr = costs.threshold
        lo, hi, count = cfg.psi_grid or (thr / 40.0, thr * 40.0, 50)
        psis = psi_sweep(lo, hi, count)
        curve = [(float(p), jbar_immediate(costs, float(p)), 0.0) for p in psis]
        return LfdReport(regime=regime, phi0=thr, saddle_curve=curve,
                         jbar_at_phi0=(jbar_immediate(costs, thr), 0.0),
                         note="stopping at once is optimal; phi0 = b/a")

    bnd = solve_boundaries(model, costs, cfg.dp)
    ratio = bnd.ratio
    sol = solve_fode(model, costs, ratio, cfg.fode_steps)
    g_mc, g_se = gamma_mc(model, costs, ratio, cfg.n_paths, cfg.seed ^ _GAMMA_SALT, cfg.workers)
    report = LfdReport(regime=regime, phi0=None, boundaries=bnd, gamma_fode=sol.gamma_star,
                       gamma_mc=g_mc, gamma_mc_se=g_se)
    log.info("boundaries (%.6g, %.6g), gamma* fode %.6g mc %.6g +- %.2g",
             bnd.alpha_star, bnd.beta_star, sol.gamma_star, g_mc, g_se)

    def evaluate(phi0: float) -> HEstimate:
        return estimate_h(model, costs, bnd, phi0, cfg.n_paths, cfg.seed, cfg.workers)

    if costs.threshold > bnd.alpha_star and costs.threshold < bnd.beta_star:
        report.h_at_threshold = evaluate(costs.threshold)

    if g_mc > 3.0 * g_se:
        report.existence_guaranteed = False
        report.note = "gamma* >= 0: existence not guaranteed by the sufficient condition"
        return report

    lo_phi = bnd.alpha_star * (1.0 + cfg.inset)
    hi_phi = bnd.beta_star * (1.0 - cfg.inset)
    scan = [evaluate(float(p)) for p in np.geomspace(lo_phi, hi_phi, cfg.prescan_points)]
    report.prescan = scan
    report.sign_changes = [(p.phi0, q.phi0) for p, q in zip(scan, scan[1:])
                           if (p.h > 0) != (q.h > 0)]
    if not (scan[0].h > 0 > scan[-1].h):
        raise SolverError(
            "h shows no sign change across the bracket; increase n_paths",
            samples=[(e.phi0, e.h, e.se) for e in scan],
        )

    phi0, bracket, evals = _bisect(evaluate, scan[0], scan[-1], cfg.phi_tol, cfg.max_bisections)
    report.phi0 = phi0
    report.bracket = bracket
    report.evaluations = [scan[0], scan[-1], *evals]

    confirm = estimate_h(model, costs, bnd, phi0, cfg.n_paths, cfg.seed ^ _CONFIRM_SALT,
                         cfg.workers)
    report.h_at_phi0 = confirm.h
    report.h_at_phi0_se = confirm.se
    spread = max((abs(e.h) for e in evals[-2:]), default=0.0)
    report.h_tolerance = 3.0 * confirm.se + spread

    lo, hi, count = cfg.psi_grid or (bnd.alpha_star / 4.0, 4.0 * bnd.beta_star, 50)
    batch = simulate_exits(model, _stop_interval(bnd, phi0), 1.0, cfg.saddle_paths,
                           cfg.seed ^ _SADDLE_SALT, workers=cfg.workers)
    report.saddle_curve = [(float(p), *jbar_from_batch(batch, costs, float(p)))
                           for p in psi_sweep(lo, hi, count)]
    report.jbar_at_phi0 = jbar_from_batch(batch, costs, phi0)
    return report
