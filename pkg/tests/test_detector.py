import io
import math

import numpy as np
import pytest

from poisson_minimax.boundary import Boundaries
from poisson_minimax.detector import SequentialDetector, detect, outcome_json, read_timestamps
from poisson_minimax.errors import PreconditionError, UndecidedError
from poisson_minimax.lfd import estimate_jbar
from poisson_minimax.model import Costs, Decision, Model, PriorOdds
from poisson_minimax.pathsim import Interval, Side, event_times, simulate_exits

M = Model(1.0, 5.0)
C = Costs(2.0, 2.0)
B = Boundaries(0.297, 2.390)


def test_no_events_stops_at_lower_hit_time():
    out = detect(M, B, PriorOdds(1.0), [], C, horizon=math.inf)
    assert out.stopped_at == pytest.approx(0.303505785044859358, rel=1e-14)
    assert out.decision is Decision.ACCEPT_H0
    assert out.exit_side is Side.LOWER
    assert out.psi_at_stop == 0.297
    assert out.events_consumed == 0


def test_single_early_event_stops_upper():
    out = detect(M, B, PriorOdds(1.0), [0.01], C)
    assert out.stopped_at == 0.01
    assert out.decision is Decision.ACCEPT_H1
    assert out.psi_at_stop == pytest.approx(4.80394719576161605, rel=1e-14)
    assert out.events_consumed == 1


def test_late_event_is_preceded_by_lower_exit():
    out = detect(M, B, PriorOdds(1.0), [0.5], C)
    assert out.exit_side is Side.LOWER
    assert out.stopped_at == pytest.approx(0.303505785044859358, rel=1e-14)
    assert out.events_consumed == 0


def test_empty_stream_is_undecided():
    with pytest.raises(UndecidedError) as exc:
        detect(M, B, PriorOdds(1.0), [], C)
    state = exc.value.state
    assert state.t == 0.0 and state.n == 0 and state.psi_t == 1.0
    assert "undecided" in str(exc.value)


def test_finite_horizon_before_hit_is_undecided():
    with pytest.raises(UndecidedError) as exc:
        detect(M, B, PriorOdds(1.0), [], C, horizon=0.2)
    assert exc.value.state.t == 0.2


@pytest.mark.parametrize("psi, side, decision", [
    (0.1, Side.LOWER, Decision.ACCEPT_H0),
    (0.297, Side.LOWER, Decision.ACCEPT_H0),
    (5.0, Side.UPPER, Decision.ACCEPT_H1),
])
def test_prior_outside_stops_at_start(psi, side, decision):
    out = detect(M, B, PriorOdds(psi), [0.1, 0.2], C)
    assert out.stopped_at_start
    assert out.stopped_at == 0.0
    assert out.exit_side is side
    assert out.decision is decision
    assert out.events_consumed == 0


@pytest.mark.parametrize("stream", [[0.1, 0.1], [0.2, 0.1], [-0.1], [math.nan]])
def test_malformed_streams_rejected(stream):
    # tiny psi gap keeps the test from exiting before the bad event
    with pytest.raises(PreconditionError):
        detect(M, Boundaries(1e-6, 1e6), PriorOdds(1.0), stream, C)


def test_advance_backwards_rejected():
    det = SequentialDetector(M, B, PriorOdds(1.0), C)
    det.advance_to(0.1)
    with pytest.raises(PreconditionError):
        det.advance_to(0.05)


def test_incremental_use_and_state():
    det = SequentialDetector(M, Boundaries(0.01, 100.0), PriorOdds(1.0), C)
    assert det.observe(0.1) is None
    assert det.advance_to(0.3) is None
    s = det.state()
    assert s.n == 1 and s.t == 0.3
    assert s.l == pytest.approx(5 * math.exp(-1.2), rel=1e-14)
    # an event after advance_to but later than the clock is fine
    assert det.observe(0.35) is None


def test_read_timestamps():
    fh = io.StringIO("0.5\n\n 1.25 \n")
    assert list(read_timestamps(fh)) == [0.5, 1.25]
    with pytest.raises(PreconditionError, match="line 2"):
        list(read_timestamps(io.StringIO("1\nabc\n")))


def test_outcome_json_keys():
    out = detect(M, B, PriorOdds(1.0), [0.01], C)
    text = outcome_json(out)
    for key in ("stopped_at", "decision", "psi", "events_consumed"):
        assert f'"{key}"' in text


def _replay(batch, seed, phi0, bnd, i):
    times = event_times(seed, int(batch.path_ids[i]), M.lambda0, int(batch.n_jumps[i]) + 1)
    return detect(M, bnd, PriorOdds(phi0), times, C)


def test_replay_reproduces_simulator_exactly():
    phi0, seed = 0.9646, 31
    bnd = Boundaries(0.2915, 2.388)
    batch = simulate_exits(M, Interval(bnd.alpha_star / phi0, bnd.beta_star / phi0), 1.0,
                           2000, seed)
    for i in range(len(batch)):
        out = _replay(batch, seed, phi0, bnd, i)
        rec = batch.record(i)
        assert out.stopped_at == rec.tau
        assert out.exit_side is rec.side
        assert out.events_consumed == rec.n_jumps
        # sides map to decisions because alpha* < b/a < beta*
        assert out.decision is (Decision.ACCEPT_H0 if rec.side is Side.LOWER
                                else Decision.ACCEPT_H1)


def test_detector_risk_matches_jbar():
    phi0, seed = 0.9646, 44
    bnd = Boundaries(0.2915, 2.388)
    batch = simulate_exits(M, Interval(bnd.alpha_star / phi0, bnd.beta_star / phi0), 1.0,
                           20_000, seed)
    per = np.empty(len(batch))
    for i in range(len(batch)):
        times = event_times(seed, i, M.lambda0, int(batch.n_jumps[i]) + 1)
        out = detect(M, bnd, PriorOdds(phi0), times, C)
        # integral of L up to the stop, one piece per inter-event segment
        edges = np.concatenate(([0.0], times[:out.events_consumed], [out.stopped_at]))
        integral = sum(
            math.exp(k * M.log_jump) * (math.exp(-M.drift * lo) - math.exp(-M.drift * hi))
            / M.drift for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])))
        l_stop = out.psi_at_stop / phi0
        per[i] = (out.stopped_at + phi0 * integral + min(C.b, C.a * phi0 * l_stop)) / (1 + phi0)
    est, se = estimate_jbar(M, C, bnd, phi0, phi0, 20_000, seed + 1)
    se_d = per.std(ddof=1) / math.sqrt(len(per))
    assert abs(per.mean() - est) < 3 * math.hypot(se, se_d)
