"""
ToolNet Pipeline Main Entry
Command-line application: python -m app.main <command> [options]
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

# Add project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.commands import CommandContext, command_router, record_performance
from app.core.error_handler import EXIT_OK, ErrorHandler, handle_error
from app.core.logging_manager import log_operation_error, log_operation_start, log_operation_success
from app.core.performance_monitor import performance_monitor
from app.schemas.common_schemas import ErrorResponse
from app.services.storage_service import get_storage_service
from config.pipeline import load_pipeline_config, parse_overrides
from config.settings import settings

logger = logging.getLogger(__name__)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="扁平 KEY=VALUE 实验配置文件")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="覆盖配置项，可重复")
    common.add_argument("--workers", type=int, default=settings.WORKERS, help="可并行阶段的工作进程数")
    common.add_argument("--out", default=None, help=f"运行目录（默认 {settings.DATA_DIR}）")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_options()
    for spec in command_router.commands.values():
        sub = subparsers.add_parser(spec.name, help=spec.help, description=spec.help, parents=[common])
        for arg in spec.arguments:
            arg.add_to(sub)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """解析参数并执行命令，返回退出码"""
    args = build_parser().parse_args(argv)
    spec = command_router.get(args.command)
    try:
        config = load_pipeline_config(args.config, parse_overrides(args.set))
        storage = get_storage_service(args.out)
        ctx = CommandContext(args.command, args, config, storage, max(1, args.workers))
        performance_monitor.reset()
        log_operation_start(args.command, out=storage.root, workers=ctx.workers)
        result = spec.handler(ctx)
        record_performance(storage, args.command)
        log_operation_success(args.command, outputs=len(result.outputs))
    except Exception as e:
        log_operation_error(args.command, type(e).__name__)
        payload = ErrorResponse(**handle_error(e, args.command))
        print(payload.model_dump_json(exclude_none=True), file=sys.stderr)
        return ErrorHandler.exit_code(e)

    print(result.model_dump_json())
    return EXIT_OK


def main() -> None:
    # Configure logging
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
