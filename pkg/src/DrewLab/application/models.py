"""νDRew 模型与基线模型

包括 DRew-GCN / DRew-GIN / DRew-GatedGCN、经典残差 GCN 和静态多跳 SP-GCN，
以及读出层、参数初始化和参数量统计。

所有结构共用同一套流程：输入投影得到 h^(0) 并写入 DelayBuffer，
每层按调度表读取（可能延迟的）历史状态做多跳聚合，结果再写回 DelayBuffer。
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from ..domain.errors import DrewValidationError, ShapeMismatchError
from ..domain.model_config import Architecture, ModelConfig
from ..domain.schedule import DelayBuffer, DelayPolicy, LayerSchedule, build_schedule
from ..infrastructure import tensor as T
from ..infrastructure.checkpoint import Checkpoint
from ..infrastructure.optim import glorot_init
from ..infrastructure.tensor import BatchNormStats, Tensor
from .graph_operators import GraphOperators

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class ModelParams:
    """按名称组织的模型参数与批归一化统计量"""

    tensors: dict[str, Tensor]
    bn: dict[str, BatchNormStats]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def parameters(self) -> dict[str, Tensor]:
        return self.tensors

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for prefix, stats in self.bn.items():
            out[f"{prefix}.running_mean"] = stats.running_mean
            out[f"{prefix}.running_var"] = stats.running_var
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        """参数和缓冲区的深拷贝"""
        state = {name: t.data.copy() for name, t in self.tensors.items()}
        state.update({name: arr.copy() for name, arr in self.buffers().items()})
        return state

    def restore(self, state: dict[str, np.ndarray]) -> None:
        """从 snapshot() 或检查点恢复；名称和形状必须完全一致"""
        expected = set(self.tensors) | set(self.buffers())
        if set(state) != expected:
            missing = sorted(expected - set(state))
            extra = sorted(set(state) - expected)
            raise DrewValidationError(f"参数名不匹配: 缺少 {missing}，多余 {extra}")
        for name, t in self.tensors.items():
            if state[name].shape != t.data.shape:
                raise ShapeMismatchError(
                    f"参数 {name} 形状不一致: {state[name].shape} != {t.shape}"
                )
            t.data = np.array(state[name], dtype=np.float64)
        for prefix, stats in self.bn.items():
            stats.running_mean = np.array(state[f"{prefix}.running_mean"])
            stats.running_var = np.array(state[f"{prefix}.running_var"])


@dataclass(eq=False)
class ForwardTrace:
    """前向结果：states[t] 为 h^(t)，t = 0..L"""

    states: list[Tensor]

    @property
    def embeddings(self) -> Tensor:
        return self.states[-1]


def _uses_self_residual(config: ModelConfig) -> bool:
    return config.arch in {
        Architecture.GCN,
        Architecture.DREW_GCN,
        Architecture.SP_GCN,
    }


def _mlp_count(config: ModelConfig) -> int:
    """GIN 每个 MLP 两个线性层；返回全部 MLP 个数（含自环 MLP）"""
    total = 0
    for layer in range(config.layers):
        hops = 1 if config.weight_sharing else len(config.hops_at(layer))
        total += 1 + hops
    return total


def count_weight_matrices(config: ModelConfig) -> int:
    """消息传递层中 d×d 通道混合矩阵的个数"""
    if config.arch in {Architecture.GCN, Architecture.SP_GCN}:
        return config.layers
    if config.arch is Architecture.DREW_GATEDGCN:
        return 4 * config.layers
    if config.arch is Architecture.DREW_GIN:
        return 2 * _mlp_count(config)
    if config.weight_sharing:
        return config.layers
    return sum(len(config.hops_at(layer)) for layer in range(config.layers))


def count_params(config: ModelConfig) -> int:
    """精确的可训练参数个数"""
    d = config.hidden
    total = config.in_dim * d + d + d * config.out_dim + config.out_dim
    if config.use_batch_norm:
        total += 2 * d * config.layers
    if config.arch is Architecture.DREW_GIN:
        return total + _mlp_count(config) * (2 * d * d + 2 * d)
    total += count_weight_matrices(config) * d * d
    if config.arch is Architecture.SP_GCN:
        total += config.layers * config.hop_limit
    return total


def solve_hidden(config: ModelConfig, target: int, upper: int = 4096) -> ModelConfig:
    """参数预算匹配：返回参数量不超过 target 的最大隐藏维度（至少为 1）"""
    lo, hi = 1, upper
    if count_params(replace(config, hidden=1)) > target:
        return replace(config, hidden=1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if count_params(replace(config, hidden=mid)) <= target:
            lo = mid
        else:
            hi = mid - 1
    logger.debug(f"预算匹配: {config.arch.value} L={config.layers} -> hidden={lo}")
    return replace(config, hidden=lo)


def _square(config: ModelConfig, rng: np.random.Generator, name: str) -> Tensor:
    d = config.hidden
    if config.linear_probe:
        return Tensor(np.eye(d), requires_grad=True, name=name)
    return glorot_init((d, d), rng, name)


def _bias(dim: int, name: str) -> Tensor:
    return Tensor(np.zeros(dim), requires_grad=True, name=name)


def _hop_prefix(config: ModelConfig, layer: int, k: int) -> str:
    return f"layer{layer}.shared" if config.weight_sharing else f"layer{layer}.hop{k}"


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """按结构初始化参数：矩阵用 Glorot，偏置为 0，批归一化 γ=1、β=0"""
    d = config.hidden
    tensors: dict[str, Tensor] = {}

    def put(t: Tensor) -> None:
        tensors[t.name] = t

    if config.linear_probe:
        put(Tensor(np.eye(d), requires_grad=True, name="encoder.weight"))
    else:
        put(glorot_init((config.in_dim, d), rng, "encoder.weight"))
    put(_bias(d, "encoder.bias"))

    bn: dict[str, BatchNormStats] = {}
    for layer in range(config.layers):
        if config.arch is Architecture.GCN:
            put(_square(config, rng, f"layer{layer}.hop1.weight"))
        elif config.arch is Architecture.DREW_GCN:
            if config.weight_sharing:
                put(_square(config, rng, f"layer{layer}.shared.weight"))
            else:
                for k in config.hops_at(layer):
                    put(_square(config, rng, f"layer{layer}.hop{k}.weight"))
        elif config.arch is Architecture.SP_GCN:
            put(_square(config, rng, f"layer{layer}.weight"))
            put(_bias(config.hop_limit, f"layer{layer}.alpha_raw"))
        elif config.arch is Architecture.DREW_GIN:
            mlps = [f"layer{layer}.self"]
            if config.weight_sharing:
                mlps.append(f"layer{layer}.shared")
            else:
                mlps.extend(f"layer{layer}.hop{k}" for k in config.hops_at(layer))
            for prefix in mlps:
                put(glorot_init((d, d), rng, f"{prefix}.fc1.weight"))
                put(_bias(d, f"{prefix}.fc1.bias"))
                put(glorot_init((d, d), rng, f"{prefix}.fc2.weight"))
                put(_bias(d, f"{prefix}.fc2.bias"))
        else:
            for idx in range(1, 5):
                put(glorot_init((d, d), rng, f"layer{layer}.W{idx}"))

        if config.use_batch_norm:
            put(Tensor(np.ones(d), requires_grad=True, name=f"layer{layer}.bn.gamma"))
            put(_bias(d, f"layer{layer}.bn.beta"))
            bn[f"layer{layer}.bn"] = BatchNormStats.fresh(d)

    put(glorot_init((d, config.out_dim), rng, "head.weight"))
    put(_bias(config.out_dim, "head.bias"))
    return ModelParams(tensors=tensors, bn=bn)


def resolve_schedule(config: ModelConfig, ops: GraphOperators) -> LayerSchedule:
    """按图的有效直径截断跳数上限；经典 GCN 只有 1 跳"""
    if config.arch is Architecture.GCN:
        return build_schedule(config.layers, DelayPolicy(), 1)
    k_cap = max(1, min(config.hop_limit, ops.k_max))
    return build_schedule(config.layers, config.nu, k_cap)


def _encode(config: ModelConfig, params: ModelParams, x: Tensor) -> Tensor:
    if x.shape[1:] != (config.in_dim,):
        raise DrewValidationError(
            f"输入特征维度 {x.shape[1:]} 与 in_dim={config.in_dim} 不一致"
        )
    return T.linear(x, params["encoder.weight"], params["encoder.bias"])


def _finish_layer(
    config: ModelConfig,
    params: ModelParams,
    layer: int,
    h: Tensor,
    update: Tensor,
    training: bool,
) -> Tensor:
    """残差相加（GCN 系）后做批归一化"""
    if config.linear_probe:
        return update
    out = T.add(h, update) if _uses_self_residual(config) else update
    if config.use_batch_norm:
        prefix = f"layer{layer}.bn"
        out = T.batch_norm(
            out,
            params[f"{prefix}.gamma"],
            params[f"{prefix}.beta"],
            params.bn[prefix],
            training,
        )
    return out


def _activate(config: ModelConfig, agg: Tensor) -> Tensor:
    return agg if config.linear_probe else T.relu(agg)


LayerFn = Callable[
    [ModelConfig, ModelParams, GraphOperators, LayerSchedule, DelayBuffer[Tensor], int],
    Tensor,
]


def _drew_gcn_layer(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    buf: DelayBuffer[Tensor],
    layer: int,
) -> Tensor:
    agg: Tensor | None = None
    for entry in schedule.at(layer):
        if config.arch is Architecture.GCN:
            weight = params[f"layer{layer}.hop1.weight"]
        else:
            weight = params[f"{_hop_prefix(config, layer, entry.k)}.weight"]
        h_src = buf.get(entry.source_index)
        term = T.matmul(T.sparse_matmul(ops.gamma_at(entry.k), h_src), weight)
        agg = term if agg is None else T.add(agg, term)
    assert agg is not None
    return _activate(config, agg)


def _sp_gcn_layer(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    buf: DelayBuffer[Tensor],
    layer: int,
) -> Tensor:
    h = buf.get(layer)
    alpha = T.normalize(T.softplus(params[f"layer{layer}.alpha_raw"]))
    terms = [
        T.sparse_matmul(ops.gamma_at(k), h) for k in range(1, config.hop_limit + 1)
    ]
    agg = T.matmul(T.combine(terms, alpha), params[f"layer{layer}.weight"])
    return _activate(config, agg)


def _mlp(params: ModelParams, prefix: str, h: Tensor) -> Tensor:
    inner = T.linear(h, params[f"{prefix}.fc1.weight"], params[f"{prefix}.fc1.bias"])
    return T.linear(
        T.relu(inner), params[f"{prefix}.fc2.weight"], params[f"{prefix}.fc2.bias"]
    )


def _drew_gin_layer(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    buf: DelayBuffer[Tensor],
    layer: int,
) -> Tensor:
    self_term = _mlp(params, f"layer{layer}.self", buf.get(layer))
    agg = T.scale(self_term, 1.0 + config.gin_eps)
    for entry in schedule.at(layer):
        messages = _mlp(
            params, _hop_prefix(config, layer, entry.k), buf.get(entry.source_index)
        )
        agg = T.add(agg, T.sparse_matmul(ops.indicator_at(entry.k), messages))
    return agg


def _drew_gatedgcn_layer(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    buf: DelayBuffer[Tensor],
    layer: int,
) -> Tensor:
    w1, w2, w3, w4 = (params[f"layer{layer}.W{idx}"] for idx in range(1, 5))
    h = buf.get(layer)
    n, d = h.shape
    agg = T.matmul(h, w1)
    receiver = T.matmul(h, w3)
    for entry in schedule.at(layer):
        rows, cols = ops.pairs_at(entry.k)
        if len(rows) == 0:
            continue
        h_src = buf.get(entry.source_index)
        gate_hat = T.sigmoid(
            T.add(
                T.gather_rows(receiver, rows),
                T.gather_rows(T.matmul(h_src, w4), cols),
            )
        )
        denom = T.scatter_add_rows(Tensor(np.zeros((n, d))), rows, gate_hat)
        eps = Tensor(np.full((len(rows), d), config.gate_eps))
        denom_e = T.add(T.gather_rows(denom, rows), eps)
        eta = T.div(gate_hat, denom_e)
        messages = T.mul(eta, T.gather_rows(T.matmul(h_src, w2), cols))
        agg = T.scatter_add_rows(agg, rows, messages)
    return agg


_LAYERS: dict[Architecture, LayerFn] = {
    Architecture.GCN: _drew_gcn_layer,
    Architecture.DREW_GCN: _drew_gcn_layer,
    Architecture.SP_GCN: _sp_gcn_layer,
    Architecture.DREW_GIN: _drew_gin_layer,
    Architecture.DREW_GATEDGCN: _drew_gatedgcn_layer,
}


def _as_tensor(x: Tensor | np.ndarray) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def run_layers(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    x: Tensor | np.ndarray,
    *,
    schedule: LayerSchedule | None = None,
    training: bool = False,
) -> ForwardTrace:
    """执行输入投影和全部消息传递层"""
    xt = _as_tensor(x)
    if xt.shape[0] != ops.n:
        raise DrewValidationError(f"特征行数 {xt.shape[0]} 与节点数 {ops.n} 不一致")
    sched = schedule if schedule is not None else resolve_schedule(config, ops)
    layer_fn = _LAYERS[config.arch]

    buf: DelayBuffer[Tensor] = DelayBuffer()
    buf.push(_encode(config, params, xt))
    for layer in range(config.layers):
        update = layer_fn(config, params, ops, sched, buf, layer)
        buf.push(_finish_layer(config, params, layer, buf.get(layer), update, training))
    return ForwardTrace(states=buf.states())


def _checked(config: ModelConfig, arch: Architecture) -> None:
    if config.arch is not arch:
        raise DrewValidationError(f"配置结构 {config.arch.value} 不是 {arch.value}")


def drew_gcn_forward(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    x: Tensor | np.ndarray,
    *,
    training: bool = False,
) -> Tensor:
    _checked(config, Architecture.DREW_GCN)
    trace = run_layers(config, params, ops, x, schedule=schedule, training=training)
    return trace.embeddings


def drew_gin_forward(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    x: Tensor | np.ndarray,
    *,
    training: bool = False,
) -> Tensor:
    _checked(config, Architecture.DREW_GIN)
    trace = run_layers(config, params, ops, x, schedule=schedule, training=training)
    return trace.embeddings


def drew_gatedgcn_forward(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    schedule: LayerSchedule,
    x: Tensor | np.ndarray,
    *,
    training: bool = False,
) -> Tensor:
    _checked(config, Architecture.DREW_GATEDGCN)
    trace = run_layers(config, params, ops, x, schedule=schedule, training=training)
    return trace.embeddings


def classical_gcn_forward(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    x: Tensor | np.ndarray,
    *,
    training: bool = False,
) -> Tensor:
    _checked(config, Architecture.GCN)
    return run_layers(config, params, ops, x, training=training).embeddings


def sp_gcn_forward(
    config: ModelConfig,
    params: ModelParams,
    ops: GraphOperators,
    x: Tensor | np.ndarray,
    *,
    training: bool = False,
) -> Tensor:
    """k_max 取 config.k_cap；每一层都聚合全部 1..k_max 跳"""
    _checked(config, Architecture.SP_GCN)
    return run_layers(config, params, ops, x, training=training).embeddings


def readout_node(
    params: ModelParams, embeddings: Tensor, node_ids: Sequence[int] | np.ndarray
) -> Tensor:
    """选取节点的嵌入经最终线性层得到 logits，形状 (len(node_ids), out_dim)"""
    picked = T.gather_rows(embeddings, np.asarray(node_ids, dtype=np.int64))
    return T.linear(picked, params["head.weight"], params["head.bias"])


def readout_mean(
    params: ModelParams, embeddings: Tensor, membership: np.ndarray | None = None
) -> Tensor:
    """按图平均池化后经最终线性层；membership 缺省表示单个图"""
    n = embeddings.shape[0]
    groups = np.zeros(n, dtype=np.int64) if membership is None else membership
    num_graphs = int(groups.max()) + 1
    sizes = np.bincount(groups, minlength=num_graphs).astype(np.float64)
    pool = sp.csr_matrix(
        (1.0 / sizes[groups], (groups, np.arange(n))), shape=(num_graphs, n)
    )
    pooled = T.sparse_matmul(pool, embeddings)
    return T.linear(pooled, params["head.weight"], params["head.bias"])


class DrewModel:
    """模型配置与参数的组合"""

    def __init__(self, config: ModelConfig, params: ModelParams) -> None:
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: ModelConfig, seed: int) -> DrewModel:
        """按种子初始化模型"""
        params = init_params(config, np.random.default_rng(seed))
        expected = count_params(config)
        if params.count() != expected:
            raise DrewValidationError(f"参数量 {params.count()} 与预期 {expected} 不一致")
        return cls(config, params)

    def forward(
        self,
        ops: GraphOperators,
        x: Tensor | np.ndarray,
        *,
        training: bool = False,
        schedule: LayerSchedule | None = None,
    ) -> ForwardTrace:
        return run_layers(
            self.config, self.params, ops, x, schedule=schedule, training=training
        )

    def logits(
        self,
        ops: GraphOperators,
        x: Tensor | np.ndarray,
        node_ids: Sequence[int] | np.ndarray | None = None,
        *,
        training: bool = False,
    ) -> Tensor:
        """前向加读出；node_ids 为 None 时按图平均池化"""
        emb = self.forward(ops, x, training=training).embeddings
        if node_ids is None:
            return readout_mean(self.params, emb, ops.membership())
        return readout_node(self.params, emb, node_ids)


def to_checkpoint(model: DrewModel) -> Checkpoint:
    return Checkpoint(
        config=model.config.to_dict(),
        tensors={name: t.data for name, t in model.params.tensors.items()},
        buffers=model.params.buffers(),
    )


def from_checkpoint(ckpt: Checkpoint) -> DrewModel:
    """按检查点中的配置重建模型并载入参数"""
    try:
        config = ModelConfig(**ckpt.config)
    except TypeError as e:
        raise DrewValidationError(f"检查点中的模型配置不合法: {e}") from e
    model = DrewModel.create(config, seed=0)
    model.params.restore({**ckpt.tensors, **ckpt.buffers})
    return model
