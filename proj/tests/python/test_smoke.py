import csv
import io

import pytest

import dflysim

TINY = """
seed: 1
topology: {groups: 2, switches_per_group: 2, endpoints_per_switch: 2}
traffic:
  split: {victim: 4, aggressor: 4}
  victim: {kind: allreduce, msg_bytes: 8}
  aggressor: {kind: incast, msg_bytes: 16384}
harness: {min_iterations: 20, min_victim_seconds: 0, max_iterations: 50, bootstrap_resamples: 50}
"""


def test_max_system():
    assert dflysim.max_system(64, 16) == {"groups": 545, "endpoints": 279040, "global_ports_per_switch": 17}
    assert dflysim.max_system(64, 16, 511)["endpoints"] == 261632


def test_topology():
    p = dflysim.DragonflyParams()
    p.num_groups, p.switches_per_group, p.endpoints_per_switch, p.global_links_per_group_pair = 8, 8, 16, 8
    t = dflysim.build_dragonfly(p)
    assert t.num_endpoints == 1024
    assert t.bisection_bound() == 51200.0
    assert t.all_to_all_bound() == pytest.approx(102400.0)
    assert t.diameter() <= 3
    paths = t.minimal_paths(0, 1023)
    assert paths and all(path[0] == t.switch_of(0) and path[-1] == t.switch_of(1023) for path in paths)


def test_bad_params():
    p = dflysim.DragonflyParams()
    p.num_groups = 0
    with pytest.raises(dflysim.TopologyError):
        p.validate()


def test_config_errors():
    with pytest.raises(dflysim.ConfigError):
        dflysim.validate_config(TINY + "bogus_key: 1\n")
    assert "allreduce" in dflysim.canonical_config(TINY)


def test_congestion_is_deterministic():
    a = dflysim.run_congestion(TINY)
    b = dflysim.run_congestion(TINY)
    assert a == b
    assert a["impact"] >= 1.0
    assert len(a["contended_samples"]) >= 20


def test_sweep_csv():
    text = dflysim.run_sweep(TINY + "sweep:\n  axes:\n    cc.enabled: [on, off]\n")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2
    assert {r["cc.enabled"] for r in rows} == {"on", "off"}
