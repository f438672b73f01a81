import pytest

from tsnsim.fp import (
    MergeState, PreemptionConfig, ReassemblyError, Transmission, can_preempt, reassemble,
)
from tsnsim.gcl import FpMode
from tsnsim.model import Flow, Frame

from helpers import run_port

BT = 80  # ns per byte at 100 Mbps


def frame_of(mac_bytes):
    return Frame(Flow("f", "BE", ("X", "Y"), mac_bytes - 22, 1_000_000), 0, 0)


def test_overhead_is_1280ns_at_100mbps():
    assert PreemptionConfig.for_mode(FpMode.WITH_HR).t_delay_fp(100_000_000) == 1280


@pytest.mark.parametrize("mac, sent, ok", [
    (123, 60, False), (1000, 500, True), (124, 10, False), (124, 60, True), (124, 61, False),
    (1522, 1458, True), (1522, 1459, False), (1522, 59, False),
])
def test_can_preempt(mac, sent, ok):
    assert can_preempt(mac, sent) is ok


def test_can_preempt_range_check():
    with pytest.raises(ValueError):
        can_preempt(100, 100)


def test_express_starts_1280ns_after_preemption_decision():
    # 1000-byte BE frame starts at 0; 400 data bytes are out at (8 + 400) byte times
    t = (8 + 400) * BT
    run = run_port([(0, "BE", 978), (t, "TT", 100)], fp="without-hr")
    tt = [r for r in run.tx_log if r[1].startswith("TT")]
    assert tt[0][4] == t + 1280
    be = [r for r in run.tx_log if r[1].startswith("BE")]
    assert [(r[3], r[6], r[7]) for r in be] == [(0, 400, False), (1, 596, True)]


def test_short_frame_is_never_preempted():
    # 100-byte frame: express waits for its end (incl. IFG)
    run = run_port([(0, "BE", 78), (20 * BT, "TT", 100)], fp="without-hr")
    be, tt = run.tx_log[0], run.tx_log[1]
    assert be[7] is True and be[5] == (8 + 100 + 12) * BT
    assert tt[4] == be[5]
    assert run.port.preemptions == 0


def test_preempt_with_nothing_in_flight_is_noop():
    ms = MergeState()
    assert ms.preempt(0) is None
    run = run_port([(5000, "TT", 100)], fp="without-hr")
    assert run.tx_log[0][4] == 5000


def test_first_cut_waits_for_minimum_fragment():
    # express arrives 10 data bytes in: the cut happens at 60 data bytes
    run = run_port([(0, "BE", 978), ((8 + 10) * BT, "TT", 100)], fp="without-hr")
    tt = [r for r in run.tx_log if r[1].startswith("TT")][0]
    assert tt[4] == (8 + 60 + 16) * BT


def test_resume_fragment_size_and_ordering():
    tx_frame = frame_of(1000)
    ms = MergeState()
    ms.in_flight = Transmission(tx_frame, "BE", 0, 0, 0, BT, True)
    at, frag, rem = ms.preempt((8 + 396) * BT)
    assert at == (8 + 396) * BT and frag.on_wire_bytes == 400 and not frag.is_final
    resumed = ms.resume(10**6, BT)
    assert resumed.fragment().on_wire_bytes == 604 and resumed.final
    assert reassemble([frag, resumed.fragment()]) is tx_frame


def test_resume_without_pending_is_error():
    with pytest.raises(RuntimeError):
        MergeState().resume(0, BT)


def test_resumed_fragment_precedes_queued_frames_of_its_class():
    t = (8 + 400) * BT
    run = run_port([(0, "BE", 978), (10, "BE", 978), (t, "TT", 100)], fp="without-hr")
    order = [(r[1], r[3]) for r in run.tx_log]
    assert order == [("BE-0", 0), ("TT-0", 0), ("BE-0", 1), ("BE-1", 0)]


def test_resume_deferred_through_guardband():
    # TT window [200 us, 300 us); a 1500-byte A frame starts at 100 us and is
    # preempted by hold at 200 us - 12.72 us; its remainder waits for 300 us
    run = run_port([(100_000, "A", 1500)], fp="with-hr", windows=[(200_000, 300_000)])
    a = [r for r in run.tx_log if r[1].startswith("A")]
    assert len(a) == 2 and not a[0][7]
    assert a[1][4] >= 300_000


def test_reassemble_examples():
    f = frame_of(1000)
    from tsnsim.model import Fragment
    parts = [Fragment(f, 0, 0, 396, False), Fragment(f, 1, 396, 600, True)]
    assert reassemble(parts) is f
    whole = Fragment(f, 0, 0, 996, True)
    assert reassemble([whole]) is f
    with pytest.raises(ReassemblyError):
        reassemble(list(reversed(parts)))
    with pytest.raises(ReassemblyError):
        reassemble(parts[:1])
