"""
验收场景测试
常供电基线、能量守恒、7×7 间歇供电网格、断电锯齿、下行可达性、确定性和唤醒预测
"""

import hashlib
from pathlib import Path

import pytest

from harness.invariants import check_energy_conservation, check_hysteresis
from harness.metrics import shutdown_precursors
from harness.scenario_loader import load_scenario, parse_scenario
from harness.simulation import run_scenario
from models.scenario import EnergyMode
from utils.trace_writer import TraceReader

from tests.conftest import scenario_dict

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
GRID7_SOURCES = (48, 42)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _assert_tags_decreasing(records):
    for record in records:
        if record["kind"] == "deliver":
            tags = record["edc_tags"]
            assert all(b < a for a, b in zip(tags, tags[1:])), record


@pytest.fixture(scope="module")
def grid7(tmp_path_factory):
    """7×7 间歇供电网格，两个源各 500 个分组，模拟 2 小时"""
    scenario = load_scenario(SCENARIO_DIR / "grid7_two_sources.json")
    path = tmp_path_factory.mktemp("grid7") / "trace.jsonl"
    result = run_scenario(scenario, trace_path=path)
    return scenario, result, path


class TestAlwaysOnBaseline:
    """常供电基线"""

    def test_line_delivers_everything(self):
        """5 节点线型 100 个上行分组全部交付，无重复，标签严格递减"""
        scenario = load_scenario(SCENARIO_DIR / "line5_always_on.json")
        result = run_scenario(scenario, keep_in_memory=True)
        flow = result.summary.flow(4, 0)
        assert flow.generated == 100
        assert flow.delivered == 100
        assert flow.delivery_ratio == 1.0
        assert result.summary.duplicate_deliveries == 0
        _assert_tags_decreasing(result.records)


class TestEnergyConservation:
    """能量守恒与迟滞"""

    @pytest.mark.parametrize("name", ["minimal", "solar_line", "line5_always_on"])
    def test_ledger_matches_level(self, name):
        result = run_scenario(load_scenario(SCENARIO_DIR / f"{name}.json"))
        for node_id, node in result.nodes.items():
            assert check_energy_conservation(node_id, node.energy) == []
            assert check_hysteresis(node_id, node.energy) == []

    def test_intermittent_grid_has_off_intervals(self):
        """采集功率不足的 5×5 网格：每个非汇聚节点都经历过断电"""
        scenario = parse_scenario(
            scenario_dict(
                name="grid5_starved",
                duration_s=900,
                topology={"kind": "grid", "rows": 5, "cols": 5},
                energy={"mode": "intermittent", "harvest_mw": 0.02},
                routing={"protocol": "orw"},
            )
        )
        result = run_scenario(scenario)
        for node_id, node in result.summary.nodes.items():
            if node_id == scenario.sink:
                assert node.mode == EnergyMode.ALWAYS_ON.value
                assert node.off_intervals == 0
                continue
            assert node.off_intervals >= 1, node_id
            energy = result.nodes[node_id].energy
            assert check_energy_conservation(node_id, energy) == []
            assert check_hysteresis(node_id, energy) == []


@pytest.mark.slow
class TestIntermittentGrid:
    """7×7 间歇供电网格"""

    def test_delivery_and_route_diversity(self, grid7):
        """每条流交付率 >= 0.9，至少两条不同路径，无重复交付"""
        scenario, result, _ = grid7
        summary = result.summary
        for source in GRID7_SOURCES:
            flow = summary.flow(source, scenario.sink)
            assert flow.generated > 0
            assert flow.delivery_ratio >= 0.9, (source, flow.delivery_ratio)
            assert flow.route_diversity >= 2
            assert min(flow.hop_histogram) >= 6
        assert summary.duplicate_deliveries == 0

    def test_duty_cycles(self, grid7):
        """非汇聚节点的射频占空比在 2% 到 30% 之间"""
        scenario, result, _ = grid7
        for node_id, node in result.summary.nodes.items():
            if node_id == scenario.sink:
                continue
            assert 0.019 <= node.duty_cycle <= 0.30, (node_id, node.duty_cycle)

    def test_relays_cycle_power(self, grid7):
        scenario, result, _ = grid7
        relays = [
            n for n, node in result.summary.nodes.items()
            if n != scenario.sink and n not in GRID7_SOURCES and node.off_intervals > 0
        ]
        assert relays

    def test_shutdowns_follow_communication(self, grid7):
        """转发节点每次断电前一个唤醒周期内有收发活动（>= 80%）"""
        scenario, result, path = grid7
        candidates = [
            (node.off_intervals, n) for n, node in result.summary.nodes.items()
            if n != scenario.sink and n not in GRID7_SOURCES
        ]
        _, relay = max(candidates)
        preceded, total = shutdown_precursors(TraceReader(path), relay, 1_000_000)
        assert total >= 1
        assert preceded / total >= 0.8, (relay, preceded, total)

    def test_trace_hash_differs_by_seed(self, grid7, tmp_path):
        scenario, _, path = grid7
        other = tmp_path / "other.jsonl"
        run_scenario(scenario, seed=scenario.seed + 1, trace_path=other)
        assert _sha256(path) != _sha256(other)


class TestDownwardReachability:
    """ORPL 下行可达性"""

    def _grid5(self, p_piggyback: float):
        """预热 10 个通告周期后，汇聚节点向每个节点各发一个下行分组"""
        flows = [
            {"source": 0, "dest": dest, "count": 1, "start_s": 300 + 2 * dest}
            for dest in range(1, 25)
        ]
        return parse_scenario(
            scenario_dict(
                name="grid5_downward",
                seed=3,
                duration_s=500,
                topology={"kind": "grid", "rows": 5, "cols": 5},
                routing={
                    "protocol": "orpl",
                    "adv_interval_s": 30,
                    "p_piggyback": p_piggyback,
                },
                flows=flows,
            )
        )

    def test_every_node_reachable(self):
        result = run_scenario(self._grid5(0.5))
        for dest in range(1, 25):
            flow = result.summary.flow(0, dest)
            assert flow.generated == 1
            assert flow.delivered == 1, dest

    def test_no_sets_no_multihop_downward(self):
        """不附带路由集合时，一跳以外的节点收不到下行分组"""
        result = run_scenario(self._grid5(0.0))
        one_hop = {1, 5, 6}
        for dest in range(1, 25):
            if dest not in one_hop:
                assert result.summary.flow(0, dest).delivered == 0, dest


class TestDeterminism:
    """确定性"""

    def test_same_seed_identical_trace(self, tmp_path):
        scenario = load_scenario(SCENARIO_DIR / "grid7_two_sources.json")
        scenario = scenario.model_copy(update={"duration_s": 400.0})
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_scenario(scenario, trace_path=first)
        run_scenario(scenario, trace_path=second)
        assert _sha256(first) == _sha256(second)


class TestDeferPredictor:
    """唤醒预测与推迟"""

    def _pair(self, policy: str):
        return parse_scenario(
            scenario_dict(
                name=f"pair_{policy}",
                duration_s=600,
                routing={"protocol": "orw"},
                mac={"defer_policy": policy},
                flows=[{"source": 1, "period_s": 10, "count": 50, "start_s": 50}],
            )
        )

    def test_prediction_tracks_wake_schedule(self):
        """10 次以上观测后，预测的唤醒时刻与真实窗口起点相差不超过 listen_len"""
        result = run_scenario(self._pair("ewma"))
        sender, receiver = result.nodes[1], result.nodes[0]
        record = sender.neighbors.record(0)
        assert record.wake_obs >= 10

        probe = record.last_wake_seen + receiver.mac.wake_us // 2
        predicted = sender.neighbors.predict_next_wake(0, probe)
        actual = receiver.mac.wakeup_schedule(probe)
        assert abs(predicted - actual) <= receiver.mac.listen_us

    def test_deferral_halves_strobes(self):
        deferred = run_scenario(self._pair("ewma")).summary
        baseline = run_scenario(self._pair("none")).summary
        assert deferred.flow(1, 0).delivered == baseline.flow(1, 0).delivered == 50
        assert deferred.mean_strobes_per_forward <= 0.5 * baseline.mean_strobes_per_forward


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
