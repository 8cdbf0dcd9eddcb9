"""
ToolNet Pipeline Report Command
"""

import logging

from app.commands.registry import CommandContext, CommandRouter
from app.core.validation import OutputValidator
from app.schemas.common_schemas import CommandResult
from app.services.report_service import REPORT_HEADINGS, build_report
from config.settings import settings

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("report", help="汇总运行目录为 report.md")
def report(ctx: CommandContext) -> CommandResult:
    path = ctx.storage.write_text(settings.REPORT_FILENAME, build_report(ctx.storage))
    OutputValidator.validate_text(path, REPORT_HEADINGS)
    return CommandResult(command=ctx.name, outputs=[str(path)])
