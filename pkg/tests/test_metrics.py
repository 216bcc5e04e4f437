"""Summary computation, CSV reports, and the correlation helper."""

import pytest

from fabsim.devices import ST_BUS, ST_QUEUING, STAGES
from fabsim.metrics import (
    BUS_COLUMNS, HOPS_COLUMNS, SUMMARY_COLUMNS, HopGroup, pearson,
    summarize, write_csv, write_reports,
)
from fabsim.presets import idle_latency
from fabsim.simulation import Simulation


def idle_summary():
    cfg = next(iter(idle_latency().values()))
    return summarize(Simulation(cfg).run()), cfg


def test_summarize_idle_run():
    s, cfg = idle_summary()
    assert s.completed == 1
    assert s.bandwidth == pytest.approx(64 / s.window_ns)
    assert s.mean_latency == s.max_latency == 203
    assert list(s.hop_groups) == [0]          # shared bus: no switch hops
    assert s.invalidations == 0
    # only the 64 B response serializes, so every busy ns carries payload
    assert s.transmission_efficiency == 1.0


def test_normalized_bandwidth_uses_max_link_when_unset():
    s, cfg = idle_summary()
    assert cfg.normalize_base == 0.0
    assert s.normalized_bandwidth == pytest.approx(
        s.bandwidth / cfg.topology.link_bandwidth)


def test_hop_group_stage_means_sum_to_mean_latency():
    s, _ = idle_summary()
    g = s.hop_groups[0]
    total = sum(g.mean_stage(st) for st in STAGES)
    assert total == pytest.approx(g.mean_latency())


def test_hop_group_accumulates():
    class P:
        def __init__(self, lat, q):
            self.ledger = {ST_QUEUING: q, ST_BUS: lat - q}
            self._lat = lat

        def latency(self):
            return self._lat

    g = HopGroup(2)
    g.add(P(10, 4))
    g.add(P(30, 6))
    assert g.count == 2
    assert g.mean_latency() == 20
    assert g.max_latency == 30
    assert g.mean_stage(ST_QUEUING) == 5


def test_write_csv_is_byte_stable(tmp_path):
    rows = [[1, "a", 2.5], [2, "b", 3.5]]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, ("x", "y", "z"), rows)
    write_csv(p2, ("x", "y", "z"), rows)
    data = p1.read_bytes()
    assert data == p2.read_bytes()
    assert data == b"x,y,z\n1,a,2.5\n2,b,3.5\n"


def test_write_reports_emits_three_tables(tmp_path):
    s, _ = idle_summary()
    write_reports(tmp_path, [s])
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == ",".join(SUMMARY_COLUMNS)
    assert len(summary) == 2
    hops = (tmp_path / "latency_by_hops.csv").read_text().splitlines()
    assert hops[0] == ",".join(("seed",) + HOPS_COLUMNS)
    bus = (tmp_path / "bus_stats.csv").read_text().splitlines()
    assert bus[0] == ",".join(("seed",) + BUS_COLUMNS)
    assert len(bus) == 2


def test_pearson_known_values():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [5, 5, 5]) == 0.0
    with pytest.raises(ValueError):
        pearson([1], [2])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
