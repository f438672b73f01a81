"""Scenario parsing, validation diagnostics, round-trip and bundled files."""

from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from tsnsim.scenario import (
    ScenarioError, bundled_names, collect_warnings, dump_scenario, load_bundled, parse_scenario,
    parse_text,
)

DATA = Path(__file__).parent / "data"
TINY = (DATA / "tiny.yaml").read_text()


def test_tiny_parses():
    s = parse_text(TINY)
    assert s.name == "tiny"
    assert [f.id for f in s.flows] == ["tt1", "a1", "a2"]
    assert s.defaults.seed == 3 and s.defaults.duration == 20_000_000
    assert s.port_keys() == ["ES1->SW1", "SW1->ES3", "ES2->SW1"]


def test_missing_node_is_named_with_location(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(TINY.replace("route: [ES2, SW1, ES3]", "route: [ES9, SW1, ES3]"))
    with pytest.raises(ScenarioError) as err:
        parse_scenario(path)
    msg = str(err.value)
    assert "ES9" in msg and f"{path}:15" in msg


def test_reservation_above_cap_rejected():
    with pytest.raises(ScenarioError, match="85%"):
        parse_text(TINY.replace("60Mbps", "90Mbps"))


@pytest.mark.parametrize("edit, fragment", [
    (("version: 1", "version: 7"), "version"),
    (("kind: TT}", "kind: XX}"), "kind"),
    (("payload: 1000", "payload: 1501"), "payload"),
    (("class: A, route: [ES2", "class: Z, route: [ES2"), "Z"),
    (("period: 1ms, offset: 0", "period: 1ms, offset: 2ms"), "offset"),
])
def test_schema_errors_carry_location(edit, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_text(TINY.replace(*edit), source="t.yaml")
    assert "t.yaml:" in str(err.value) and fragment in str(err.value)


def test_round_trip():
    s = parse_text(TINY)
    again = parse_text(dump_scenario(s))
    assert again == s
    assert dump_scenario(again) == dump_scenario(s)


@settings(max_examples=25, deadline=None)
@given(st.integers(64, 1500), st.integers(1, 50), st.integers(10, 80),
       st.sampled_from(["nonfrozen", "frozen", "return-to-zero"]),
       st.sampled_from(["none", "with-hr", "without-hr"]))
def test_round_trip_random(payload, period_100us, oper_mbps, mode, fp):
    text = (TINY.replace("payload: 1000", f"payload: {payload}")
            .replace("period: 500us}", f"period: {period_100us * 100}us}}")
            .replace("60Mbps", f"{oper_mbps}Mbps")
            .replace("{duration: 20ms", f"{{credit_mode: {mode}, fp: {fp}, duration: 20ms"))
    s = parse_text(text)
    assert parse_text(dump_scenario(s)) == s


def test_bundled_scenarios_load_without_errors():
    names = bundled_names()
    assert {"medium-mesh-30", "medium-mesh-60", "orion", "pathology-123",
            "credit-demo"} <= set(names)
    for name in names:
        s = load_bundled(name)
        assert s.flows
        assert parse_text(dump_scenario(s)) == s
        collect_warnings(s)  # builds every port under every FP mode


def test_medium_mesh_shape():
    s = load_bundled("medium-mesh-60")
    assert len(s.topology.switches) == 6 and len(s.topology.end_stations) == 12
    kinds = [s.traffic_class(f.traffic_class).kind.value for f in s.flows]
    assert kinds.count("TT") == 15 and kinds.count("AVB") == 60
    assert {l.rate for l in s.topology.links} == {100_000_000}
