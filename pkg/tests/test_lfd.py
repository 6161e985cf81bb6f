import math

import numpy as np
import pytest

from poisson_minimax.boundary import Boundaries, DpConfig
from poisson_minimax.errors import ConfigError, PreconditionError
from poisson_minimax.lfd import (
    LfdConfig,
    estimate_h,
    estimate_jbar,
    find_lfd,
    gamma_mc,
    h_from_batch,
    jbar_from_batch,
    jbar_immediate,
    psi_sweep,
)
from poisson_minimax.model import Costs, Model, Regime
from poisson_minimax.pathsim import Interval, simulate_exits

M = Model(1.0, 5.0)
C = Costs(2.0, 2.0)
# fixed boundaries keep these tests independent of the value-iteration solver
B = Boundaries(0.2915, 2.388)


def test_h_estimator_identity():
    phi0 = 1.0
    batch = simulate_exits(M, Interval(B.alpha_star / phi0, B.beta_star / phi0), 1.0, 5000, 3)
    e = h_from_batch(batch, C, B, phi0)
    coef = C.a * B.alpha_star / phi0 + C.b
    assert e.h == coef * e.p_lower - C.b + e.mean_int
    per_path = coef * batch.lower + batch.int_l_dt - batch.tau - C.b
    assert e.h == pytest.approx(per_path.mean(), abs=1e-12)
    assert e.n_paths == 5000


def test_h_endpoint_signs():
    near_alpha = estimate_h(M, C, B, B.alpha_star * 1.001, 20_000, 5)
    near_beta = estimate_h(M, C, B, B.beta_star * 0.999, 20_000, 5)
    assert near_alpha.h > 0
    assert near_alpha.h == pytest.approx(C.a, abs=0.05)
    assert near_beta.h < 0
    # L = 1 starts just below B but drifts down at once, so the upper limit is
    # the exit functional on (ratio, 1], i.e. gamma* (about -0.797 here)
    assert near_beta.h == pytest.approx(-0.797, abs=0.05)


def test_h_decreasing_under_common_random_numbers():
    phis = np.geomspace(B.alpha_star * 1.05, B.beta_star * 0.95, 8)
    hs = [estimate_h(M, C, B, float(p), 50_000, 9).h for p in phis]
    assert all(x > y for x, y in zip(hs, hs[1:]))


def test_h_rejects_phi0_outside():
    with pytest.raises(PreconditionError):
        estimate_h(M, C, B, B.alpha_star, 10, 1)
    with pytest.raises(PreconditionError):
        estimate_h(M, C, B, 3.0, 10, 1)


def test_gamma_mc_near_one_ratio_is_positive():
    est, se = gamma_mc(M, C, 0.999, 10_000, 1)
    # the first drift step leaves (0.999, 1]: the estimate is close to a * ratio
    assert est == pytest.approx(C.a * 0.999, abs=0.01)
    assert est > 3 * se


def test_gamma_mc_rejects_bad_ratio():
    with pytest.raises(PreconditionError):
        gamma_mc(M, C, 1.0, 10, 1)


def test_gamma_mc_agrees_with_fode(fode_solution, ref_model, ref_costs):
    est, se = gamma_mc(ref_model, ref_costs, fode_solution.ratio, 400_000, 12)
    assert abs(est - fode_solution.gamma_star) < 3 * se


def test_jbar_immediate():
    assert jbar_immediate(C, 1.0) == 1.0
    assert jbar_immediate(C, 0.5) == pytest.approx(1.0 / 1.5)
    assert jbar_immediate(Costs(1.0, 2.0), 4.0) == pytest.approx(0.4)
    arr = jbar_immediate(C, np.array([0.5, 3.0]))
    assert arr == pytest.approx([2 / 3, 0.5])


def test_jbar_from_batch_formula():
    batch = simulate_exits(M, Interval(0.3, 2.5), 1.0, 1000, 4)
    est, se = jbar_from_batch(batch, C, 1.5)
    manual = (batch.tau + 1.5 * batch.int_l_dt
              + np.minimum(2.0, 3.0 * batch.l_exit)) / 2.5
    assert est == pytest.approx(manual.mean(), rel=1e-13)
    assert se > 0


def test_jbar_below_immediate_at_phi0():
    est, se = estimate_jbar(M, C, B, 1.0, 1.0, 50_000, 6)
    assert est < jbar_immediate(C, 1.0) - 3 * se


def test_psi_sweep():
    s = psi_sweep(0.1, 10.0, 5)
    assert s == pytest.approx([0.1, 10 ** -0.5, 1.0, 10 ** 0.5, 10.0])


def test_trivial_regime_report():
    rep = find_lfd(Model(1.0, 1.5), Costs(2.0, 3.0))
    assert rep.regime is Regime.TRIVIAL
    assert rep.phi0 == 1.5
    assert rep.boundaries is None
    assert rep.jbar_at_phi0 == (jbar_immediate(Costs(2.0, 3.0), 1.5), 0.0)
    psis = [p for p, _, _ in rep.saddle_curve]
    jb = [j for _, j, _ in rep.saddle_curve]
    assert abs(psis[int(np.argmax(jb))] - 1.5) / 1.5 < 0.1


def test_lfd_config_validation():
    with pytest.raises(ConfigError):
        LfdConfig(n_paths=1)
    with pytest.raises(ConfigError):
        LfdConfig(phi_tol=0.0)
    with pytest.raises(ConfigError):
        LfdConfig(psi_grid=(2.0, 1.0, 10))


@pytest.fixture(scope="module")
def small_report():
    cfg = LfdConfig(dp=DpConfig(grid_points=2001), n_paths=40_000, saddle_paths=20_000,
                    phi_tol=5e-3, prescan_points=8)
    return find_lfd(M, C, cfg)


def test_find_lfd_small_run(small_report):
    rep = small_report
    assert rep.regime is Regime.NONTRIVIAL
    assert rep.existence_guaranteed
    assert rep.gamma_fode < 0
    lo, hi = rep.bracket
    assert lo <= rep.phi0 <= hi
    assert rep.boundaries.contains(rep.phi0)
    assert abs(rep.h_at_phi0) <= rep.h_tolerance
    assert rep.prescan[0].h > 0 > rep.prescan[-1].h
    assert len(rep.sign_changes) >= 1
    a, b = rep.l_interval
    assert a == rep.boundaries.alpha_star / rep.phi0
    assert b == rep.boundaries.beta_star / rep.phi0
    assert len(rep.saddle_curve) == 50


def test_find_lfd_is_deterministic(small_report):
    cfg = LfdConfig(dp=DpConfig(grid_points=2001), n_paths=40_000, saddle_paths=20_000,
                    phi_tol=5e-3, prescan_points=8, workers=3)
    again = find_lfd(M, C, cfg)
    assert again.phi0 == small_report.phi0
    assert again.saddle_curve == small_report.saddle_curve
