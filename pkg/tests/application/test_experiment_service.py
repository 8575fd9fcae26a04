"""测试实验服务"""
import csv
import json

import pytest

from DrewLab.application.experiment_service import ExperimentService
from DrewLab.domain.errors import DrewValidationError, TrainingDivergedError
from DrewLab.infrastructure.hop_cache import load_hop_index
from DrewLab.infrastructure.run_config import RESOLVED_CONFIG_NAME, load_run_config
from tests.helpers import DATA_DIR

SMALL_RING = [
    "N=20",
    "k=4",
    "C=2",
    "L=2",
    "hidden=4",
    "in_dim=2",
    "out_dim=2",
    "epochs=1",
    "batch_size=8",
]


def _service(tmp_path, *overrides: str) -> ExperimentService:
    config = load_run_config(None, list(overrides), out_dir=str(tmp_path), seed=1)
    return ExperimentService(config)


def _json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def _csv_rows(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class TestTrainAndEvaluate:
    """训练与评估流程测试"""

    def test_train_writes_outputs(self, tmp_path):
        """测试训练写出结果、检查点和解析后的配置"""
        success, message = _service(tmp_path, *SMALL_RING).train()
        assert success, message
        assert "训练完成" in message
        result = _json(tmp_path / "train_result.json")
        assert result["seed"] == 1
        assert "version" in result
        assert (tmp_path / "model.ckpt").exists()
        assert (tmp_path / RESOLVED_CONFIG_NAME).exists()
        rows = _csv_rows(tmp_path / "results.csv")
        assert len(rows) == 1
        assert rows[0]["model"] == "drew_gcn"
        assert rows[0]["L"] == "2"

    def test_evaluate_restored_checkpoint(self, tmp_path):
        """测试载入检查点后的测试准确率与训练结果一致"""
        train_dir = tmp_path / "train"
        assert _service(train_dir, *SMALL_RING).train()[0]
        eval_dir = tmp_path / "eval"
        ckpt = f"checkpoint={(train_dir / 'model.ckpt').as_posix()}"
        success, message = _service(eval_dir, *SMALL_RING, ckpt).evaluate()
        assert success, message
        trained = _json(train_dir / "train_result.json")
        evaluated = _json(eval_dir / "eval_result.json")
        assert evaluated["accuracy"] == trained["test_acc"]
        assert evaluated["split"] == "test"

    def test_evaluate_needs_checkpoint(self, tmp_path):
        with pytest.raises(DrewValidationError, match="eval.checkpoint"):
            _service(tmp_path, *SMALL_RING).evaluate()

    def test_divergence_raises_with_marker(self, tmp_path):
        """测试训练发散时抛出带运行标记的异常，结果行仍然写出"""
        service = _service(tmp_path, *SMALL_RING, "divergence_threshold=1e-9")
        with pytest.raises(TrainingDivergedError) as exc_info:
            service.train()
        assert "drew_gcn/seed=1" in exc_info.value.marker
        rows = _csv_rows(tmp_path / "results.csv")
        assert rows[0]["test_acc"] == "failed"
        assert not (tmp_path / "model.ckpt").exists()

    def test_resolved_config_reproduces_run(self, tmp_path):
        """测试用解析后的配置重新运行得到相同结果"""
        first = tmp_path / "first"
        assert _service(first, *SMALL_RING).train()[0]
        config = load_run_config(
            first / RESOLVED_CONFIG_NAME, out_dir=str(tmp_path / "second")
        )
        assert ExperimentService(config).train()[0]
        a = _json(first / "train_result.json")
        b = _json(tmp_path / "second" / "train_result.json")
        assert a["train_loss"] == b["train_loss"]
        assert a["test_acc"] == b["test_acc"]


class TestGraphCommands:
    """图相关命令测试"""

    def test_precompute(self, tmp_path):
        """测试跳数索引缓存"""
        success, message = _service(tmp_path, "kind=cycle", "n=8").precompute()
        assert success, message
        hi = load_hop_index(tmp_path / "hop_index.npz")
        assert hi.n == 8
        assert hi.k_max == 7

    def test_sensitivity_with_decay(self, tmp_path):
        """测试敏感度报告与衰减比较表"""
        service = _service(
            tmp_path,
            "kind=path",
            "n=5",
            "L=2",
            "in_dim=3",
            "nodes=0,4",
            "decay=true",
            "family=cycle",
            "r_min=2",
            "r_max=4",
        )
        success, message = service.sensitivity()
        assert success, message
        report = _json(tmp_path / "sensitivity.json")
        assert report["layers"] == 2
        assert report["S"][0][4] == 0.0
        assert report["S"][0][1] > 0.0
        decay = _json(tmp_path / "decay.json")
        assert decay["monotone"] is True
        assert [row["r"] for row in decay["rows"]] == [2, 3, 4]

    def test_sensitivity_cache_size_mismatch(self, tmp_path):
        """测试跳数索引缓存与图不一致"""
        cache = (tmp_path / "cache.npz").as_posix()
        writer = _service(tmp_path, "kind=cycle", "n=8", f"hop_cache={cache}")
        assert writer.precompute()[0]
        service = _service(tmp_path, "kind=cycle", "n=6", f"hop_cache={cache}")
        with pytest.raises(DrewValidationError, match="hop_cache"):
            service.sensitivity()

    def test_sensitivity_cache_edge_mismatch(self, tmp_path):
        """测试节点数相同但边不同的跳数索引缓存被拒绝"""
        cache = (tmp_path / "cache.npz").as_posix()
        writer = _service(tmp_path, "kind=cycle", "n=8", f"hop_cache={cache}")
        assert writer.precompute()[0]
        service = _service(tmp_path, "kind=path", "n=8", f"hop_cache={cache}")
        with pytest.raises(DrewValidationError, match="1 跳壳层"):
            service.sensitivity()

    def test_schedule_dump_matches_golden(self, tmp_path):
        """测试 L=3、ν=1 的调度表"""
        success, text = _service(tmp_path, "L=3", "nu=1").schedule_dump()
        assert success
        golden = (DATA_DIR / "schedule_L3_nu1.txt").read_text(encoding="utf-8")
        assert text == golden
        assert (tmp_path / "schedule.txt").read_text(encoding="utf-8") == golden

    def test_params(self, tmp_path):
        """测试 drew_gcn L=3 hidden=4 的参数统计"""
        success, message = _service(
            tmp_path, "arch=drew_gcn", "L=3", "hidden=4", "k_cap=3"
        ).params()
        assert success
        report = _json(tmp_path / "params.json")
        assert report["weight_matrices"] == 6
        assert f"params={report['params']}" in message


class TestGridCommands:
    """扫描类命令测试"""

    def test_ringtransfer_sweep(self, tmp_path):
        """测试扫描写出结果行和汇总表"""
        service = _service(
            tmp_path,
            *SMALL_RING,
            "models=gcn,drew_gcn:nu=1,constant",
            "ring_lengths=4,6",
            "repeats=1",
            "reference_hidden=4",
        )
        success, message = service.ringtransfer_sweep()
        assert success, message
        rows = _csv_rows(tmp_path / "sweep.csv")
        assert len(rows) == 3 * 2
        summary = _csv_rows(tmp_path / "sweep_summary.csv")
        assert len(summary) == 3 * 2
        assert {row["model"] for row in summary} == {"gcn", "drew_gcn:nu=1", "constant"}

    def test_delay_ablation(self, tmp_path):
        """测试延迟消融写出四个模型的结果"""
        service = _service(tmp_path, *SMALL_RING, "ring_lengths=4", "repeats=1")
        success, message = service.delay_ablation()
        assert success, message
        rows = _csv_rows(tmp_path / "delay_ablation.csv")
        assert [row["model"] for row in rows] == [
            "gcn",
            "drew_gcn:nu=1",
            "drew_gcn:nu=half",
            "drew_gcn:nu=inf",
        ]

    def test_dump_dataset(self, tmp_path):
        """测试数据集导出"""
        success, message = _service(tmp_path, *SMALL_RING).dump_dataset()
        assert success, message
        manifest = tmp_path / "dataset" / "manifest.jsonl"
        assert len(manifest.read_text(encoding="utf-8").splitlines()) == 20
