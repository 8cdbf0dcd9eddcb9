"""
ToolNet Pipeline Planning Command
无信息搜索与工具似然引导搜索的成对对比
"""

import logging
from typing import List

from app.commands.registry import ABLATION_ARG, DOMAIN_ARG, CommandContext, CommandRouter
from app.core.logging_manager import log_info
from app.core.validation import validate_outputs
from app.schemas.common_schemas import CommandResult
from app.schemas.result_schemas import PlannerSummary, SearchRecord
from app.services.planner_service import compare, select_pairs, summarize
from config.settings import settings

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("plan", help="成对规划搜索，写出 plans/<domain>.jsonl 与汇总", arguments=[DOMAIN_ARG, ABLATION_ARG])
def plan(ctx: CommandContext) -> CommandResult:
    row = ctx.ablation_rows()[-1]
    outputs = []
    summaries: List[PlannerSummary] = []
    for domain in ctx.domains():
        model, provider = ctx.load_model(row, domain)
        pairs = select_pairs(ctx.config, domain, ctx.scenes)
        records = compare(pairs, ctx.config, model, provider, ctx.workers, ctx.scenes)
        path = ctx.storage.write_jsonl(f"{settings.PLANS_DIRNAME}/{domain}.jsonl", records)
        outputs.append((path, SearchRecord, "jsonl"))
        summary = summarize(domain, records)
        summaries.append(summary)
        log_info("规划对比完成", domain=domain, pairs=summary.pairs, pruned=summary.pruned_pairs,
                 ebf_uninformed=summary.ebf_mean.get("uninformed"), ebf_guided=summary.ebf_mean.get("guided"))

    summary_path = ctx.storage.write_json(f"{settings.PLANS_DIRNAME}/{settings.PLANNER_SUMMARY_FILENAME}", summaries)
    outputs.append((summary_path, PlannerSummary, "json-list"))
    written = validate_outputs(outputs)
    return CommandResult(command=ctx.name, outputs=written,
                         summary={s.domain: s.model_dump() for s in summaries})
