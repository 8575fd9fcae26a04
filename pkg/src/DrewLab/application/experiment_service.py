"""实验服务

编排每个命令行子命令的业务流程：读取图或数据集、运行模型、写出结果。
每个方法返回 (成功标志, 消息)；配置类错误（DrewValidationError）和训练发散
（TrainingDivergedError）向上抛出，由命令行映射为对应的退出码。
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..domain.errors import DrewValidationError, TrainingDivergedError
from ..domain.graph import Graph
from ..domain.hop_index import HopIndex, compute_hop_index
from ..domain.model_config import Architecture, ModelConfig
from ..domain.results import SweepCell, SweepRow
from ..domain.ring_transfer import RingTransferDataset, Split
from ..domain.schedule import DelayPolicy, build_schedule
from ..infrastructure.checkpoint import load_checkpoint, save_checkpoint
from ..infrastructure.edge_list_io import read_edge_list
from ..infrastructure.graph_generators import generate
from ..infrastructure.hop_cache import load_hop_index, save_hop_index
from ..infrastructure.result_writer import (
    append_results_csv,
    write_json,
    write_summary_csv,
)
from ..infrastructure.run_config import RunConfig, write_resolved_config
from .datasets import dump_dataset, gen_ring_transfer
from .models import (
    DrewModel,
    count_params,
    count_weight_matrices,
    from_checkpoint,
    to_checkpoint,
)
from .sensitivity import decay_comparison, jacobian_norms
from .training import TrainHyper, delay_ablation, evaluate, sweep, train

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.ckpt"
RESULTS_CSV = "results.csv"
SUMMARY_CSV = "summary.csv"


def _summarize(rows: list[SweepRow]) -> list[SweepCell]:
    groups: dict[tuple[str, int], list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.model, row.k), []).append(row)
    return [SweepCell.summarize(group) for group in groups.values()]


class ExperimentService:
    """实验服务

    Args:
        config: 解析后的运行配置
    """

    def __init__(self, config: RunConfig):
        self._config = config
        self._out_dir = Path(config.run.out_dir)
        self._seed = config.run.seed

    def _begin(self) -> None:
        write_resolved_config(self._config, self._out_dir)

    def _hyper(self) -> TrainHyper:
        t = self._config.train
        return TrainHyper(
            lr=t.lr,
            epochs=t.epochs,
            batch_size=t.batch_size,
            seed=self._seed,
            divergence_threshold=t.divergence_threshold,
        )

    def _dataset(self) -> RingTransferDataset:
        d = self._config.dataset
        return gen_ring_transfer(d.size, d.ring_length, d.classes, self._seed)

    def _graph(self) -> Graph:
        g = self._config.graph
        if g.kind == "file":
            assert g.path is not None
            return read_edge_list(Path(g.path), allow_isolated=g.allow_isolated)
        return generate(g.kind, n=g.n, p=g.p, depth=g.depth, seed=self._seed)

    def _hop_index(self, graph: Graph) -> HopIndex:
        g = self._config.graph
        if g.hop_cache and Path(g.hop_cache).exists():
            hi = load_hop_index(Path(g.hop_cache))
            if hi.n != graph.n:
                raise DrewValidationError(
                    f"graph.hop_cache: 缓存节点数 {hi.n} 与图的节点数 {graph.n} 不一致"
                )
            if (hi.shells[1] != graph.adjacency()).nnz:
                raise DrewValidationError(
                    "graph.hop_cache: 缓存的 1 跳壳层与图的边不一致"
                )
            return hi
        k_max = g.k_max or max(1, graph.n - 1)
        return compute_hop_index(graph, k_max, threads=self._config.run.threads)

    def precompute(self) -> tuple[bool, str]:
        """计算跳数索引并写入缓存"""
        try:
            self._begin()
            graph = self._graph()
            g = self._config.graph
            k_max = g.k_max or max(1, graph.n - 1)
            hi = compute_hop_index(graph, k_max, threads=self._config.run.threads)
            target = (
                Path(g.hop_cache) if g.hop_cache else self._out_dir / "hop_index.npz"
            )
            save_hop_index(hi, target)
            message = f"跳数索引已写入: {target} (n={graph.n}, k_max={k_max})"
            logger.info(message)
            return True, message
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"预计算跳数索引时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def train(self) -> tuple[bool, str]:
        """训练一个模型，写出结果、检查点和结果行"""
        try:
            self._begin()
            config = self._config.model.to_model_config()
            dataset = self._dataset()
            result, model = train(config, dataset, self._hyper())
            write_json(
                self._out_dir / "train_result.json", result.to_dict(), self._seed
            )
            row = SweepRow.from_run(result, dataset.ring_length, config.layers)
            append_results_csv(self._out_dir / RESULTS_CSV, [row])
            if result.failed:
                raise TrainingDivergedError(
                    f"训练发散: {result.failure}", marker=result.failure or ""
                )
            if self._config.train.save_checkpoint:
                save_checkpoint(self._out_dir / CHECKPOINT_NAME, to_checkpoint(model))
            message = (
                f"训练完成: val_acc={result.best_val_acc:.4f} "
                f"test_acc={result.test_acc:.4f} params={result.params}"
            )
            logger.info(message)
            return True, message
        except (DrewValidationError, TrainingDivergedError):
            raise
        except Exception as e:
            error_msg = f"训练时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def evaluate(self) -> tuple[bool, str]:
        """载入检查点并在数据集的指定划分上评估"""
        try:
            self._begin()
            ckpt_path = self._config.eval.checkpoint
            if not ckpt_path:
                raise DrewValidationError("eval.checkpoint: 未指定检查点路径")
            model = from_checkpoint(load_checkpoint(Path(ckpt_path)))
            split = Split(self._config.eval.split)
            accuracy = evaluate(model, self._dataset(), split)
            write_json(
                self._out_dir / "eval_result.json",
                {"checkpoint": ckpt_path, "split": split.value, "accuracy": accuracy},
                self._seed,
            )
            message = f"评估完成: {split.value} accuracy={accuracy:.4f}"
            logger.info(message)
            return True, message
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"评估时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def _write_grid(self, rows: list[SweepRow], name: str) -> str:
        append_results_csv(self._out_dir / f"{name}.csv", rows)
        cells = _summarize(rows)
        write_summary_csv(self._out_dir / f"{name}_{SUMMARY_CSV}", cells, self._seed)
        failed = sum(cell.failed for cell in cells)
        return f"{len(cells)} 个单元, {len(rows)} 次运行, {failed} 次失败"

    def ringtransfer_sweep(self) -> tuple[bool, str]:
        """参数预算匹配的 RingTransfer 扫描"""
        try:
            self._begin()
            s, d = self._config.sweep, self._config.dataset
            rows = sweep(
                s.models,
                s.ring_lengths,
                repeats=s.repeats,
                dataset_size=d.size,
                classes=d.classes,
                hyper=self._hyper(),
                reference_arch=Architecture(s.reference_arch),
                reference_hidden=s.reference_hidden,
                threads=self._config.run.threads,
            )
            message = f"扫描完成: {self._write_grid(rows, 'sweep')}"
            logger.info(message)
            return True, message
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"扫描时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def delay_ablation(self) -> tuple[bool, str]:
        """延迟消融（固定隐藏维度）"""
        try:
            self._begin()
            s, d = self._config.sweep, self._config.dataset
            rows = delay_ablation(
                s.ring_lengths,
                hidden=self._config.model.hidden,
                repeats=s.repeats,
                dataset_size=d.size,
                classes=d.classes,
                hyper=self._hyper(),
                threads=self._config.run.threads,
            )
            message = f"延迟消融完成: {self._write_grid(rows, 'delay_ablation')}"
            logger.info(message)
            return True, message
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"延迟消融时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def sensitivity(self) -> tuple[bool, str]:
        """计算敏感度报告；sensitivity.decay 打开时附带衰减比较表"""
        try:
            self._begin()
            cfg = self._config
            graph = self._graph()
            hi = self._hop_index(graph)
            model = DrewModel.create(cfg.model.to_model_config(), self._seed)
            rng = np.random.default_rng([self._seed, 2])
            x = rng.standard_normal((graph.n, model.config.in_dim))
            report = jacobian_norms(
                model,
                graph,
                hi,
                x,
                nodes=cfg.sensitivity.nodes,
                zero_threshold=cfg.sensitivity.zero_threshold,
                threads=cfg.run.threads,
                graph_id=cfg.graph.path or cfg.graph.kind,
                seed=self._seed,
            )
            write_json(
                self._out_dir / "sensitivity.json", report.to_dict(), self._seed
            )
            message = f"敏感度报告已写出: n={graph.n}, L={report.layers}"

            if cfg.sensitivity.decay:
                table = decay_comparison(
                    cfg.sensitivity.family,
                    range(cfg.sensitivity.r_min, cfg.sensitivity.r_max + 1),
                    classical_arch=Architecture(cfg.sensitivity.classical_arch),
                    drew_arch=Architecture(cfg.sensitivity.drew_arch),
                )
                write_json(self._out_dir / "decay.json", table.to_dict(), self._seed)
                message += f"; 衰减比较 monotone={table.monotone}"
            logger.info(message)
            return True, message
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"计算敏感度时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg

    def schedule_dump(self) -> tuple[bool, str]:
        """导出层调度表文本"""
        self._begin()
        m = self._config.model
        k_cap = m.k_cap if m.k_cap is not None else m.layers
        schedule = build_schedule(m.layers, DelayPolicy.parse(m.nu), k_cap)
        text = schedule.dump()
        target = self._out_dir / "schedule.txt"
        target.write_text(text, encoding="utf-8")
        logger.info(f"调度表已写出: {target} ({schedule.total_aggregations()} 项)")
        return True, text

    def params(self) -> tuple[bool, str]:
        """统计参数量"""
        self._begin()
        config: ModelConfig = self._config.model.to_model_config()
        total = count_params(config)
        matrices = count_weight_matrices(config)
        write_json(
            self._out_dir / "params.json",
            {
                "config": config.to_dict(),
                "params": total,
                "weight_matrices": matrices,
            },
            self._seed,
        )
        return True, f"params={total} weight_matrices={matrices}"

    def dump_dataset(self) -> tuple[bool, str]:
        """把 RingTransfer 数据集导出为边列表和清单"""
        try:
            self._begin()
            manifest = dump_dataset(self._dataset(), self._out_dir / "dataset")
            return True, f"数据集已导出: {manifest}"
        except DrewValidationError:
            raise
        except Exception as e:
            error_msg = f"导出数据集时发生异常: {e}"
            logger.error(error_msg, exc_info=True)
            return False, error_msg
