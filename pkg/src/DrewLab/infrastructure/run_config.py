"""运行配置

配置文件为分节的 INI 文本（configparser，键名区分大小写），
由 pydantic 模型做类型校验；未知的节或键一律报错。

命令行可以用 `key=value` 或 `section.key=value` 覆盖单个字段，
不带节名的键必须在所有节中唯一（字段名或别名，例如 `L` 是 `model.layers` 的别名）。
"""
from __future__ import annotations

import configparser
import io
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from ..domain.errors import ConfigError, DrewValidationError
from ..domain.model_config import ModelConfig
from ..domain.schedule import DelayPolicy

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "resolved_config.ini"

_NULL_TOKENS = {"", "none", "null"}


GraphKind = Literal[
    "file",
    "cycle",
    "path",
    "star",
    "binary_tree",
    "erdos_renyi",
    "disjoint_cycles",
]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [tok.strip() for tok in value.split(",") if tok.strip()]
    return value


class RunSection(_Section):
    seed: int = Field(default=0, ge=0)
    out_dir: str = "out"
    threads: int = Field(default=1, ge=1)


class GraphSection(_Section):
    kind: GraphKind = "cycle"
    path: str | None = None
    n: int = Field(default=8, ge=1)
    p: float = Field(default=0.3, ge=0.0, le=1.0)
    depth: int = Field(default=3, ge=1)
    k_max: int | None = Field(default=None, ge=1)
    hop_cache: str | None = None
    allow_isolated: bool = False

    @model_validator(mode="after")
    def file_needs_path(self) -> GraphSection:
        if self.kind == "file" and not self.path:
            raise ValueError("kind=file 时必须提供 path")
        return self


class ModelSection(_Section):
    arch: str = "drew_gcn"
    layers: int = Field(default=3, ge=1, alias="L")
    hidden: int = Field(default=16, ge=1)
    nu: str = "inf"
    k_cap: int | None = Field(default=None, ge=1)
    in_dim: int = Field(default=5, ge=1)
    out_dim: int = Field(default=5, ge=1)
    weight_sharing: bool | None = None
    use_batch_norm: bool = True
    gin_eps: float = 0.0
    gate_eps: float = Field(default=1e-6, gt=0.0)
    readout: Literal["target", "source", "mean"] = "target"
    linear_probe: bool = False

    @field_validator("nu")
    @classmethod
    def valid_nu(cls, value: str) -> str:
        return str(DelayPolicy.parse(value))

    @model_validator(mode="after")
    def consistent(self) -> ModelSection:
        self.to_model_config()
        return self

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            arch=self.arch,  # type: ignore[arg-type]
            layers=self.layers,
            hidden=self.hidden,
            nu=DelayPolicy.parse(self.nu),
            k_cap=self.k_cap,
            in_dim=self.in_dim,
            out_dim=self.out_dim,
            weight_sharing=self.weight_sharing,
            use_batch_norm=self.use_batch_norm,
            gin_eps=self.gin_eps,
            gate_eps=self.gate_eps,
            readout=self.readout,  # type: ignore[arg-type]
            linear_probe=self.linear_probe,
        )


class DatasetSection(_Section):
    size: int = Field(default=2000, ge=2, alias="N")
    ring_length: int = Field(default=10, ge=3, alias="k")
    classes: int = Field(default=5, ge=2, alias="C")

    @model_validator(mode="after")
    def enough_instances(self) -> DatasetSection:
        if self.size < self.classes:
            raise ValueError(f"N={self.size} 小于类别数 C={self.classes}")
        return self


class TrainSection(_Section):
    lr: float = Field(default=0.01, ge=0.0)
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=32, ge=1)
    divergence_threshold: float = Field(default=1e6, gt=0.0)
    save_checkpoint: bool = True


class SweepSection(_Section):
    models: list[str] = Field(
        default_factory=lambda: ["gcn", "sp_gcn", "drew_gcn:nu=1", "constant"]
    )
    ring_lengths: list[int] = Field(default_factory=lambda: [10, 20, 30])
    repeats: int = Field(default=3, ge=1)
    reference_arch: Literal["gcn", "sp_gcn"] = "gcn"
    reference_hidden: int = Field(default=256, ge=1)

    @field_validator("models", "ring_lengths", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split_list(value)


class SensitivitySection(_Section):
    nodes: list[int] | None = None
    zero_threshold: float = Field(default=1e-12, gt=0.0)
    decay: bool = False
    family: Literal["binary_tree", "cycle"] = "binary_tree"
    r_min: int = Field(default=2, ge=1)
    r_max: int = Field(default=6, ge=1)
    classical_arch: Literal["gcn"] = "gcn"
    drew_arch: Literal["drew_gcn"] = "drew_gcn"

    @field_validator("nodes", mode="before")
    @classmethod
    def split_nodes(cls, value: Any) -> Any:
        return _split_list(value)

    @model_validator(mode="after")
    def ordered_range(self) -> SensitivitySection:
        if self.r_min > self.r_max:
            raise ValueError(f"r_min={self.r_min} 大于 r_max={self.r_max}")
        return self


class EvalSection(_Section):
    checkpoint: str | None = None
    split: Literal["train", "val", "test"] = "test"


class RunConfig(_Section):
    """完整的运行配置"""

    run: RunSection = Field(default_factory=RunSection)
    graph: GraphSection = Field(default_factory=GraphSection)
    model: ModelSection = Field(default_factory=ModelSection)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    train: TrainSection = Field(default_factory=TrainSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    sensitivity: SensitivitySection = Field(default_factory=SensitivitySection)
    eval: EvalSection = Field(default_factory=EvalSection)


def _section_types() -> dict[str, type[_Section]]:
    out: dict[str, type[_Section]] = {}
    for name, info in RunConfig.model_fields.items():
        assert isinstance(info.annotation, type)
        out[name] = info.annotation
    return out


def field_index() -> dict[str, list[tuple[str, str]]]:
    """键名（字段名或别名）-> [(节名, 字段名)]"""
    index: dict[str, list[tuple[str, str]]] = {}
    for section, cls in _section_types().items():
        for fname, finfo in cls.model_fields.items():
            keys = {fname} | ({finfo.alias} if finfo.alias else set())
            for key in keys:
                index.setdefault(key, []).append((section, fname))
    return index


def _canonical(section: str, key: str) -> str:
    cls = _section_types().get(section)
    if cls is None:
        return key
    for fname, finfo in cls.model_fields.items():
        if key in (fname, finfo.alias):
            return fname
    return key


def _clean(value: str) -> str | None:
    return None if value.strip().lower() in _NULL_TOKENS else value.strip()


def _read_ini(text: str, source: str) -> dict[str, dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"配置文件格式错误: {e}") from e
    data: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        data[section] = {
            _canonical(section, key): _clean(value)
            for key, value in parser[section].items()
        }
    return data


def apply_overrides(data: dict[str, dict[str, Any]], tokens: Sequence[str]) -> None:
    """把 `key=value` / `section.key=value` 覆盖项写入原始配置字典"""
    index = field_index()
    for token in tokens:
        if "=" not in token:
            raise ConfigError(f"覆盖项格式应为 key=value: {token!r}")
        key, value = (part.strip() for part in token.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
            name = _canonical(section, name)
        else:
            matches = index.get(key, [])
            if not matches:
                raise ConfigError(f"{key}: 未知的配置项")
            if len(matches) > 1:
                options = ", ".join(f"{s}.{f}" for s, f in matches)
                raise ConfigError(f"{key}: 配置项不唯一，请写成 section.key ({options})")
            section, name = matches[0]
        data.setdefault(section, {})[name] = _clean(value)


def _format_errors(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{path}: {item['msg']}")
    return "; ".join(parts)


def load_run_config(
    path: Path | None = None,
    overrides: Sequence[str] = (),
    *,
    seed: int | None = None,
    out_dir: str | None = None,
    threads: int | None = None,
) -> RunConfig:
    """读取配置文件并依次应用覆盖项和命令行标志

    Raises:
        ConfigError: 文件不存在、格式错误或字段校验失败
    """
    data: dict[str, dict[str, Any]] = {}
    if path is not None:
        if not path.exists():
            raise ConfigError(f"配置文件不存在: {path}")
        data = _read_ini(path.read_text(encoding="utf-8"), str(path))
        logger.info(f"读取配置文件: {path}")

    apply_overrides(data, overrides)
    flags = {"seed": seed, "out_dir": out_dir, "threads": threads}
    for key, value in flags.items():
        if value is not None:
            data.setdefault("run", {})[key] = value

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from e
    except DrewValidationError as e:
        raise ConfigError(str(e)) from e


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_ini(cfg: RunConfig) -> str:
    """序列化为 INI 文本；重新读取后得到相同的配置"""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    for name in RunConfig.model_fields:
        section: _Section = getattr(cfg, name)
        values = section.model_dump()
        parser[name] = {
            key: _format_value(value)
            for key, value in values.items()
            if value is not None
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_resolved_config(cfg: RunConfig, out_dir: Path) -> Path:
    """写出解析后的配置，便于复现"""
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / RESOLVED_CONFIG_NAME
    target.write_text(to_ini(cfg), encoding="utf-8")
    logger.info(f"已写出解析后的配置: {target}")
    return target
