import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import f1_upper_segment, fode_reference
from poisson_minimax.errors import PreconditionError, SolverError
from poisson_minimax.fode import (
    closed_form_f0,
    gamma_from_fode,
    gamma_from_values,
    residuals,
    solve_fode,
)
from poisson_minimax.model import Costs, Model

M = Model(1.0, 5.0)
C = Costs(2.0, 2.0)


@pytest.fixture(scope="module")
def reference(fode_solution):
    return fode_reference(1.0, 5.0, 2.0, fode_solution.ratio)


def test_boundary_values(fode_solution):
    assert fode_solution.phis[0] == 1.0
    assert fode_solution.f0[0] == 1.0
    assert fode_solution.f1[0] == 0.0
    assert fode_solution.phis[-1] == fode_solution.ratio


def test_grid_contains_inverse_jump_ratio(fode_solution):
    m = fode_solution.offset
    assert fode_solution.phis[m] == pytest.approx(0.2, rel=1e-12)
    assert fode_solution.step * m == pytest.approx(math.log(5.0), rel=1e-14)


def test_f0_closed_form_on_upper_segment(fode_solution):
    m = fode_solution.offset
    exact = closed_form_f0(M, fode_solution.phis[: m + 1])
    assert np.max(np.abs(fode_solution.f0[: m + 1] - exact)) < 1e-8
    assert fode_solution.f0_at(0.5) == pytest.approx(1.18920711500272107, abs=1e-8)
    assert fode_solution.f0_at(0.2) == pytest.approx(1.49534878122122054, abs=1e-8)


def test_f1_closed_form_on_upper_segment(fode_solution):
    for phi in (0.9, 0.5, 0.25, 0.2):
        assert fode_solution.f1_at(phi) == pytest.approx(
            f1_upper_segment(1.0, 5.0, 2.0, phi), abs=1e-8)
    assert f1_upper_segment(1.0, 5.0, 2.0, 0.5) == pytest.approx(0.42977992200762, abs=1e-12)


def test_matches_scipy_method_of_steps(fode_solution, reference):
    f0_ref, f1_ref = reference
    r = fode_solution.ratio
    for phi in (0.9, 0.4, 0.2, 0.15, r):
        assert fode_solution.f0_at(phi) == pytest.approx(f0_ref(phi), abs=1e-7)
        assert fode_solution.f1_at(phi) == pytest.approx(f1_ref(phi), abs=1e-7)
    assert f0_ref(r) == pytest.approx(1.5521815060848987, abs=1e-9)


def test_residuals_small(fode_solution):
    r0, r1 = residuals(fode_solution, M, C)
    assert np.max(np.abs(r0)) < 1e-6
    assert np.max(np.abs(r1)) < 1e-6


def test_strictly_decreasing_in_phi(fode_solution):
    # phis descend, so the values must ascend
    assert np.all(np.diff(fode_solution.f0) > 0)
    assert np.all(np.diff(fode_solution.f1) > 0)


def test_gamma_consistency(fode_solution):
    g = gamma_from_fode(fode_solution, C)
    assert g == fode_solution.gamma_star
    r = fode_solution.ratio
    expected = (C.a * r - fode_solution.f1[-1]) / fode_solution.f0[-1]
    assert g == pytest.approx(expected, rel=1e-15)
    assert g < 0


def test_gamma_from_values_rejects_f0_below_one():
    with pytest.raises(SolverError):
        gamma_from_values(0.9, 0.0, C, 0.5)


def test_gamma_zero_when_numerator_vanishes():
    assert gamma_from_values(1.3, 2.0 * 0.25, C, 0.25) == 0.0


def test_ratio_out_of_range():
    for r in (0.0, 1.0, 1.5):
        with pytest.raises(PreconditionError):
            solve_fode(M, C, r)
    with pytest.raises(PreconditionError):
        solve_fode(M, C, 0.5, steps=0)


def test_lookup_outside_range(fode_solution):
    with pytest.raises(PreconditionError):
        fode_solution.f0_at(1.01)
    with pytest.raises(PreconditionError):
        fode_solution.f1_at(fode_solution.ratio / 2)


def test_step_refinement_converges():
    coarse = solve_fode(M, C, 0.12, steps=2_000)
    fine = solve_fode(M, C, 0.12, steps=20_000)
    assert abs(coarse.gamma_star - fine.gamma_star) < 1e-6


def test_csv(tmp_path, fode_solution):
    path = tmp_path / "f.csv"
    fode_solution.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "phi,f0,f1"
    phi, f0, _ = map(float, lines[1 + fode_solution.offset // 2].split(","))
    assert f0 == pytest.approx(phi ** -0.25, abs=1e-8)


@given(ratio=st.floats(min_value=0.22, max_value=0.95))
def test_f0_closed_form_whenever_ratio_above_inverse_jump(ratio):
    sol = solve_fode(M, C, ratio, steps=500)
    assert sol.f0[-1] == pytest.approx(ratio ** -0.25, abs=1e-9)
    assert sol.f1[-1] == pytest.approx(f1_upper_segment(1.0, 5.0, 2.0, ratio), abs=1e-9)
