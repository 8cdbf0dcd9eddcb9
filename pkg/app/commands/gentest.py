"""
ToolNet Pipeline GenTest Command
生成五类泛化测试用例，并对已训练的模型计分
"""

import logging
from typing import Dict, List

from app.commands.registry import DOMAIN_ARG, SEED_ARG, CommandContext, CommandRouter
from app.commands.training import LABELS, domain_plans, upsert_summaries
from app.core.validation import validate_outputs
from app.schemas.common_schemas import CommandResult
from app.schemas.gentest_schemas import GenCaseDocument, GenTestSummary
from app.services.embedding_service import toy_kb_provider
from app.services.gentest_service import GenCase, evaluate_gentest, generate_gentest
from config.settings import settings

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("gentest", help="生成 gentest.jsonl 并对已有检查点计分", arguments=[DOMAIN_ARG, SEED_ARG])
def gentest(ctx: CommandContext) -> CommandResult:
    seed = ctx.args.seed if ctx.args.seed is not None else ctx.config.gentest_seed
    corpus = ctx.storage.load_corpus(settings.AUGMENTED_CORPUS_FILENAME)
    kb = toy_kb_provider(ctx.config.embedding_dim, ctx.config.embedding_seed)

    cases: List[GenCase] = []
    skipped: Dict[str, Dict[str, int]] = {}
    for domain in ctx.domains():
        domain_cases, skipped[domain] = generate_gentest(
            domain_plans(corpus, domain), kb, seed, domain, ctx.config.scene_seeds(), ctx.workers
        )
        cases.extend(domain_cases)
    cases_path = ctx.storage.write_jsonl(settings.GENTEST_FILENAME, (c.to_document() for c in cases))
    outputs = [(cases_path, GenCaseDocument, "jsonl")]

    summaries: List[GenTestSummary] = []
    for domain in ctx.domains():
        for row in ctx.trained_rows(domain):
            model, provider = ctx.load_model(row, domain)
            summary, _ = evaluate_gentest(model, LABELS[row], domain, cases, provider, ctx.workers, skipped[domain])
            summaries.append(summary)
    if summaries:
        outputs.append((upsert_summaries(ctx, summaries), GenTestSummary, "json-list"))
    else:
        logger.info("没有已训练的检查点，只生成用例")

    written = validate_outputs(outputs)
    counts = {t: sum(1 for c in cases if c.type == t) for t in sorted({c.type for c in cases})}
    return CommandResult(command=ctx.name, outputs=written,
                         summary={"cases": counts, "scored": [f"{s.model}/{s.domain}" for s in summaries]})
