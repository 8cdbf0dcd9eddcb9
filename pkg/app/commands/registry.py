"""
ToolNet Pipeline Command Registry
命令注册：每个命令模块声明自己的 router，由 app.commands 统一挂载
"""

import argparse
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.core.error_handler import ConfigError, MissingInputError
from app.core.performance_monitor import monitor_performance, performance_monitor
from app.models.toolnet import ABLATION_LADDER, AblationConfig, ToolNet
from app.schemas.common_schemas import CommandResult
from app.services.dataset_service import SceneCache, scene_cache
from app.services.embedding_service import EmbeddingProvider, make_provider
from app.services.storage_service import RunStorage
from config.pipeline import ABLATION_ROWS, PipelineConfig
from config.settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Argument:
    """命令行参数声明（传给 add_argument）"""

    flags: Tuple[str, ...]
    options: Dict[str, Any]

    def add_to(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument(*self.flags, **self.options)


def argument(*flags: str, **options: Any) -> Argument:
    return Argument(flags, options)


DOMAIN_ARG = argument("--domain", choices=list(settings.get_domains()), default=None,
                      help="只处理一个领域（默认使用配置中的全部领域）")
SEED_ARG = argument("--seed", type=int, default=None, help="覆盖该命令使用的种子")
ABLATION_ARG = argument("--ablation", default=None,
                        help="消融行：ggcn|metric|attn|l|nt|c|w|full|all（默认使用配置）")


@dataclass
class CommandContext:
    """一次命令调用的上下文"""

    name: str
    args: argparse.Namespace
    config: PipelineConfig
    storage: RunStorage
    workers: int = 1
    scenes: SceneCache = scene_cache

    def domains(self) -> List[str]:
        domain = getattr(self.args, "domain", None)
        return [domain] if domain else list(self.config.domains)

    def ablation_rows(self) -> List[str]:
        row = getattr(self.args, "ablation", None) or self.config.ablation
        row = row.strip().lower().lstrip("+")
        if row == "all":
            return [name for name, _, _ in ABLATION_LADDER]
        if row not in ABLATION_ROWS:
            raise ConfigError("ablation", f"unknown ablation row {row}")
        return ["w" if row == "full" else row]

    def ablation(self, row: str) -> AblationConfig:
        c = self.config
        return AblationConfig.for_row(
            row,
            embedding_dim=c.embedding_dim,
            hidden_dim=c.hidden_dim,
            propagation_steps=c.propagation_steps,
            metric_layers=c.metric_layers,
            metric_dim=c.metric_dim,
            head_dim=c.head_dim,
        )

    def provider(self, ablation: AblationConfig) -> EmbeddingProvider:
        c = self.config
        return make_provider(c.embedding_dim, c.embedding_seed, ablation.conceptnet, c.embedding_table)

    # ------------------------------------------------------------ checkpoints

    def checkpoint_path(self, row: str, domain: str) -> Path:
        return self.storage.path(settings.CHECKPOINT_DIRNAME, f"{row}_{domain}.npz")

    def trained_rows(self, domain: str) -> List[str]:
        return [name for name, _, _ in ABLATION_LADDER if self.checkpoint_path(name, domain).is_file()]

    def load_model(self, row: str, domain: str) -> Tuple[ToolNet, EmbeddingProvider]:
        path = self.checkpoint_path(row, domain)
        if not path.is_file():
            raise MissingInputError(str(path))
        provider = self.provider(self.ablation(row))
        return ToolNet.load(path, provider), provider


Handler = Callable[[CommandContext], CommandResult]


@dataclass
class CommandSpec:
    name: str
    help: str
    handler: Handler
    arguments: Tuple[Argument, ...] = ()


class CommandRouter:
    """命令路由器"""

    def __init__(self):
        self.commands: Dict[str, CommandSpec] = {}

    def command(self, name: str, help: str, arguments: Sequence[Argument] = ()):
        """注册命令的装饰器；处理函数的耗时计入性能监控"""
        def decorator(func: Handler) -> Handler:
            timed = monitor_performance(f"command:{name}")(func)
            self.commands[name] = CommandSpec(name, help, timed, tuple(arguments))
            return func
        return decorator

    def include_router(self, router: "CommandRouter") -> None:
        self.commands.update(router.commands)

    def get(self, name: str) -> Optional[CommandSpec]:
        return self.commands.get(name)


def record_performance(storage: RunStorage, command: str) -> Path:
    """把本次命令的性能摘要合并进 performance.json"""
    path = storage.path(settings.PERFORMANCE_FILENAME)
    data: Dict[str, Any] = {}
    if path.is_file():
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            logger.warning(f"忽略损坏的性能文件: {path}")
    data[command] = performance_monitor.get_performance_summary()
    return storage.write_json(settings.PERFORMANCE_FILENAME, data)
