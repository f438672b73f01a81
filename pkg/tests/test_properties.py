"""Property tests for the invariants of the behaviour contract."""

import warnings

from hypothesis import HealthCheck, given, settings, strategies as st

from tsnsim.cbs import NANOBITS_PER_BIT, CbsClassConfig, CreditMode, CreditState
from tsnsim.fp import MIN_PREEMPTABLE_FRAME_BYTES, MergeState, Transmission, reassemble
from tsnsim.gcl import (
    FpMode, GclSchedule, GuardbandPolicy, express_windows, guardband_windows, open_intervals,
)
from tsnsim.model import Flow, Frame, line_size, tx_duration, wire_size

from helpers import run_port

payloads = st.integers(64, 1500)


@given(payloads, payloads)
def test_wire_size_monotone_and_line_overhead(a, b):
    if a < b:
        assert wire_size(a) < wire_size(b)
    assert line_size(a) - wire_size(a) == 20


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.sampled_from([10**8, 10**9]))
def test_tx_duration_linear(a, b, rate):
    assert tx_duration(a + b, rate) == tx_duration(a, rate) + tx_duration(b, rate)


# -- fragmentation -----------------------------------------------------------

@settings(max_examples=1000, deadline=None)
@given(st.integers(86, 1522), st.lists(st.integers(0, 1600), max_size=8))
def test_random_preemption_sequences_conserve_bytes(mac, requests):
    """Random cut requests (in byte times since each unit started) against one
    frame: payload bytes are conserved, every fragment is >= 64 wire bytes,
    and frames below 124 MAC bytes are never cut."""
    frame = Frame(Flow("f", "A", ("X", "Y"), mac - 22, 10**6), 0, 0)
    bt = 80
    ms = MergeState()
    fragments = []
    t = 0
    ms.in_flight = Transmission(frame, "A", 0, 0, t, bt, mac >= MIN_PREEMPTABLE_FRAME_BYTES)
    for r in requests:
        tx = ms.in_flight
        cut = ms.preempt(tx.start + r * bt)
        if cut is None:
            break
        at, frag, _ = cut
        assert at >= tx.start + r * bt
        fragments.append(frag)
        t = tx.end
        ms.in_flight = ms.resume(t, bt, True)
    fragments.append(ms.in_flight.fragment())
    assert sum(f.data_bytes for f in fragments) == frame.data_bytes
    assert all(f.on_wire_bytes >= 64 for f in fragments)
    if mac < 124:
        assert len(fragments) == 1
    assert reassemble(fragments) is frame


# -- schedules -----------------------------------------------------------------

@st.composite
def window_sets(draw):
    hp = draw(st.sampled_from([100_000, 500_000, 1_000_000]))
    cuts = sorted(draw(st.sets(st.integers(1, hp // 80 - 1), min_size=0, max_size=8)))
    points = [c * 80 for c in cuts]
    windows = [(points[i], points[i + 1]) for i in range(0, len(points) - 1, 2)]
    return hp, windows


@settings(max_examples=200, deadline=None)
@given(window_sets(), st.sampled_from(list(FpMode)), st.booleans())
def test_schedule_invariants(hw, mode, gb_on):
    hp, windows = hw
    s = GclSchedule.from_windows(hp, windows, {"TT", "A"})
    for cls in ("TT", "A"):
        opened = sum(e - b for b, e in open_intervals(s, cls))
        closed = sum(e.duration for e in s.entries if cls not in e.open)
        assert opened + closed == hp
    policy = GuardbandPolicy.default(mode, 100_000_000, guardband=gb_on)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gb = guardband_windows(s, policy, "A")
    tt = [(b % hp, e % hp or hp) for b, e in express_windows(s)]
    for gs, ge in gb:
        assert ge - gs <= policy.gb_duration
        for ts, te in tt:
            assert ge <= ts or gs >= te  # never overlaps the protected window


# -- credit ----------------------------------------------------------------------

flag_steps = st.lists(
    st.tuples(st.integers(1, 200_000), st.booleans(), st.booleans(), st.booleans(), st.booleans()),
    min_size=1, max_size=30,
)


@settings(max_examples=300, deadline=None)
@given(flag_steps, st.integers(-20_000, 20_000))
def test_nonfrozen_dominates_frozen_and_rtz_is_zero_in_gb(steps, start_bits):
    cfg = {m: CbsClassConfig("A", 30_000_000, 30_000_000, 100_000_000, m) for m in CreditMode}
    states = {m: CreditState(cfg[m], 0) for m in CreditMode}
    for cs in states.values():
        cs.credit = start_bits * NANOBITS_PER_BIT
    t = 0
    for dt, tx, gate, guarded, backlog in steps:
        for cs in states.values():
            cs.update(t, transmitting=tx, gate_open=gate, guarded=guarded, backlog=backlog)
        rtz = states[CreditMode.RETURN_TO_ZERO]
        if guarded and gate and not tx:
            assert rtz.credit == 0 and rtz.value_at(t + dt) == 0
        if guarded and gate and not tx and not states[CreditMode.FROZEN].regime.value == "transmitting":
            frozen = states[CreditMode.FROZEN]
            assert frozen.value_at(t + dt) == frozen.credit
        t += dt
        assert states[CreditMode.NONFROZEN].value_at(t) >= states[CreditMode.FROZEN].value_at(t)
        for cs in states.values():
            slope = cs.slope
            assert slope in (0, cfg[cs.config.mode].idle_slope, cfg[cs.config.mode].send_slope)


arrival_lists = st.lists(
    st.tuples(st.integers(0, 400_000), st.sampled_from(["A", "BE", "TT"]), st.integers(64, 1500)),
    min_size=1, max_size=10,
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(arrival_lists, st.sampled_from(["none", "without-hr", "with-hr"]))
def test_modes_identical_without_gating(arrivals, fp):
    runs = [run_port(arrivals, fp=fp, mode=m).tx_log for m in ("nonfrozen", "frozen", "return-to-zero")]
    assert runs[0] == runs[1] == runs[2]


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(arrival_lists, st.sampled_from(["nonfrozen", "frozen", "return-to-zero"]))
def test_with_hr_line_idle_at_every_express_window_start(arrivals, mode):
    windows = [(300_000, 340_000), (700_000, 720_000)]
    run = run_port(arrivals, fp="with-hr", mode=mode, windows=windows, until=5_000_000)
    starts = [s + k * 1_000_000 for k in range(5) for s, _ in windows]
    for r in run.tx_log:
        if r[1].startswith("TT"):
            continue
        for w in starts:
            assert not (r[4] < w < r[5]), (r, w)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(64, 1500), st.integers(0, 1600), st.sampled_from(["without-hr", "with-hr"]))
def test_express_delay_bound(payload, offset_bytes, fp):
    """An express frame arriving during a preemptable transmission waits at
    most the overhead when a cut is possible, else at most the line time of
    the largest non-preemptable unit."""
    t = offset_bytes * 80
    run = run_port([(0, "BE", payload), (t, "TT", 100)], fp=fp)
    tt = [r for r in run.tx_log if r[1].startswith("TT")][0]
    be = run.tx_log[0]
    wait = tt[4] - t
    if be[5] <= t:
        assert wait == 0
    elif run.port.preemptions:
        assert wait <= (60 + 8 + 16) * 80  # before the first legal cut point
    else:
        assert wait <= (123 + 20) * 80 or payload + 22 - 4 - (t // 80 - 8) < 60 + 60
