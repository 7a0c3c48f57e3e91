"""
运行器与命令行测试
测试异步运行、多种子并行、输出文件和退出码
"""

import json

import pytest

import main
from core.errors import InvariantViolation
from harness.runner import execute_run, execute_seeds, parse_seed_range, summarize_to
from models.metrics import MetricsSummary
from utils.output_manager import OutputManager

from tests.conftest import scenario_dict


@pytest.fixture
def scenario_file(tmp_path):
    """3 节点常供电线型场景文件"""
    data = scenario_dict(
        name="cli",
        duration_s=200,
        topology={"kind": "line", "n": 3},
        routing={"protocol": "orw"},
        flows=[{"source": 2, "period_s": 10, "count": 5, "start_s": 100}],
    )
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return path


class TestSeedRange:
    """种子范围解析测试"""

    def test_range(self):
        assert parse_seed_range("3..5") == [3, 4, 5]
        assert parse_seed_range("7") == [7]

    def test_inverted_range(self):
        with pytest.raises(ValueError):
            parse_seed_range("5..3")


class TestOutputManager:
    """输出管理器测试"""

    @pytest.mark.asyncio
    async def test_summary_roundtrip(self, tmp_path):
        output = OutputManager(tmp_path / "out")
        summary = MetricsSummary(scenario="s", seed=1, duration_s=1.0)
        path = await output.save_summary(summary)
        assert await output.load_summary() == summary
        assert output.written == [path]

    @pytest.mark.asyncio
    async def test_per_seed_directory(self, tmp_path):
        output = OutputManager(tmp_path)
        directory = await output.initialize(4)
        assert directory == tmp_path / "seed_4"
        assert directory.is_dir()

    @pytest.mark.asyncio
    async def test_csv_files(self, tmp_path):
        output = OutputManager(tmp_path)
        energy = await output.save_energy_csv(3, [(0.0, 8.0), (10.0, 7.5)])
        routes = await output.save_routes_csv("2->0", [(0, "2-1-0")])
        assert open(energy).read().splitlines() == ["time_s,level_mj", "0.000000,8.0", "10.000000,7.5"]
        assert routes.endswith("routes_2_to_0.csv")
        assert open(routes).read().splitlines() == ["packet_seq,route", "0,2-1-0"]


class TestRunner:
    """异步运行器测试"""

    @pytest.mark.asyncio
    async def test_execute_run(self, line_scenario, tmp_path):
        """运行写出追踪、汇总和CSV，汇总与追踪重算一致"""
        report = await execute_run(line_scenario, out_dir=tmp_path, write_csv=True)
        assert (tmp_path / "trace.jsonl").exists()
        assert (tmp_path / "summary.json").exists()
        assert (tmp_path / "energy_0.csv").exists()
        assert report.seed == line_scenario.seed
        saved = json.loads((tmp_path / "summary.json").read_text())
        assert saved["flows"]["4->0"]["generated"] == report.summary.flow(4, 0).generated

    @pytest.mark.asyncio
    async def test_execute_seeds(self, line_scenario, tmp_path):
        """多种子并行，每个种子一个子目录，按种子顺序返回"""
        reports = await execute_seeds(line_scenario, [1, 2], out_dir=tmp_path, write_csv=False, workers=2)
        assert [r.seed for r in reports] == [1, 2]
        for seed in (1, 2):
            assert (tmp_path / f"seed_{seed}" / "summary.json").exists()
            assert (tmp_path / f"seed_{seed}" / "trace.jsonl").exists()

    @pytest.mark.asyncio
    async def test_summarize_to(self, line_scenario, tmp_path):
        report = await execute_run(line_scenario, out_dir=tmp_path / "run", write_csv=False)
        summary = await summarize_to(report.trace_path, tmp_path / "again")
        assert summary == report.summary
        assert (tmp_path / "again" / "summary.json").exists()


class TestCommandLine:
    """命令行测试"""

    def test_validate(self, scenario_file, capsys):
        assert main.main(["validate", "--scenario", str(scenario_file)]) == main.EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["mac"]["wake_interval_s"] == 1.0

    def test_invalid_scenario_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(scenario_dict(energy={"e_on_mj": 1.0, "e_off_mj": 2.0})))
        assert main.main(["validate", "--scenario", str(path)]) == main.EXIT_SCENARIO
        assert main.main(["run", "--scenario", str(tmp_path / "none.json")]) == main.EXIT_SCENARIO

    def test_run(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main.main(["run", "--scenario", str(scenario_file), "--seed", "3", "--out", str(out)]) == main.EXIT_OK
        assert "seed=3" in capsys.readouterr().out
        assert (out / "trace.jsonl").exists()
        assert (out / "summary.json").exists()
        assert (out / "energy_2.csv").exists()

    def test_summarize(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "out"
        main.main(["run", "--scenario", str(scenario_file), "--out", str(out), "--no-csv"])
        capsys.readouterr()
        assert main.main(["summarize", "--trace", str(out / "trace.jsonl")]) == main.EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["scenario"] == "cli"

    def test_invariant_exit_code(self, scenario_file, monkeypatch):
        async def broken(*args, **kwargs):
            raise InvariantViolation("能量不守恒")

        monkeypatch.setattr(main, "execute_run", broken)
        assert main.main(["run", "--scenario", str(scenario_file)]) == main.EXIT_INVARIANT


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
