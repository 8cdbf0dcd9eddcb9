"""
ToolNet Pipeline Data Commands
场景生成、示教语料生成与语料增强
"""

import logging
from typing import Dict, List

from app.commands.registry import DOMAIN_ARG, SEED_ARG, CommandContext, CommandRouter, argument
from app.core.error_handler import ContractError
from app.core.logging_manager import log_info
from app.core.validation import validate_outputs
from app.schemas.common_schemas import CommandResult
from app.schemas.corpus_schemas import AugmentReport, DemoPlan, StrategyCount
from app.schemas.world_schemas import SceneDocument
from app.services.dataset_service import (
    augment_corpus,
    diversity,
    generate_corpus,
    goal_statistics,
    replays_to_goal,
    split_sizes,
)
from app.services.world_service import make_scene
from config.settings import settings

logger = logging.getLogger(__name__)

router = CommandRouter()


def _by_domain(plans: List[DemoPlan], domains: List[str]) -> Dict[str, List[DemoPlan]]:
    return {d: [p for p in plans if p.domain == d] for d in domains}


def _audit(plans: List[DemoPlan], ctx: CommandContext, stage: str) -> None:
    """每条计划都必须从其场景重放到目标满足"""
    broken = [p for p in plans if not replays_to_goal(p, ctx.scenes)]
    if broken:
        first = broken[0]
        raise ContractError(
            f"{stage}: {len(broken)} plans do not replay to their goal "
            f"(first: {first.domain} goal {first.goal_id} scene {first.scene_seed})"
        )


@router.command(
    "gen-scenes",
    help="生成确定性场景文件",
    arguments=[
        DOMAIN_ARG,
        argument("--count", type=int, default=None, help="场景数（默认 SCENE_COUNT）"),
        SEED_ARG,
    ],
)
def gen_scenes(ctx: CommandContext) -> CommandResult:
    """scenes/<domain>_<seed>.json"""
    count = ctx.args.count if ctx.args.count is not None else ctx.config.scene_count
    first = ctx.args.seed if ctx.args.seed is not None else ctx.config.scene_seed
    if count < 1:
        raise ContractError(f"--count must be positive, got {count}")
    outputs = []
    for domain in ctx.domains():
        for seed in range(first, first + count):
            path = ctx.storage.save_scene(make_scene(domain, seed))
            outputs.append((path, SceneDocument, "json"))
    written = validate_outputs(outputs)
    log_info("场景生成完成", domains=",".join(ctx.domains()), count=count, first_seed=first)
    return CommandResult(command=ctx.name, outputs=written, summary={"scenes": len(written)})


@router.command("gen-demos", help="示教生成演示语料 corpus.jsonl", arguments=[DOMAIN_ARG])
def gen_demos(ctx: CommandContext) -> CommandResult:
    domains = ctx.domains()
    for domain in domains:
        for seed in ctx.config.scene_seeds():
            ctx.storage.require(str(ctx.storage.scene_path(domain, seed).relative_to(ctx.storage.root)))

    plans: List[DemoPlan] = []
    failures: Dict[str, int] = {}
    for domain in domains:
        domain_plans, domain_failures = generate_corpus(ctx.config, domain, ctx.workers)
        plans.extend(domain_plans)
        failures[domain] = len(domain_failures)
    plans.sort(key=lambda p: p.sort_key())
    _audit(plans, ctx, "gen-demos")

    path = ctx.storage.save_corpus(plans)
    written = validate_outputs([(path, DemoPlan, "jsonl")])
    sizes = {d: len(ps) for d, ps in _by_domain(plans, domains).items()}
    return CommandResult(command=ctx.name, outputs=written, summary={"plans": sizes, "failures": failures})


@router.command("augment", help="跨场景重放与物体删除增强，写出增强语料与 report.json", arguments=[DOMAIN_ARG])
def augment(ctx: CommandContext) -> CommandResult:
    corpus = ctx.storage.load_corpus()
    domains = [d for d in ctx.domains() if any(p.domain == d for p in corpus)]
    if not domains:
        raise ContractError("corpus has no plans for the requested domains")
    per_domain = _by_domain(corpus, domains)

    merged: List[DemoPlan] = []
    cross: Dict[str, StrategyCount] = {}
    removal: Dict[str, StrategyCount] = {}
    for domain in domains:
        plans, cross[domain], removal[domain] = augment_corpus(per_domain[domain], ctx.config, ctx.scenes)
        merged.extend(plans)
        log_info("语料增强", domain=domain, before=len(per_domain[domain]), after=len(plans),
                 cross_accepted=cross[domain].accepted, removal_accepted=removal[domain].accepted)
    merged.sort(key=lambda p: p.sort_key())
    _audit(merged, ctx, "augment")

    augmented = _by_domain(merged, domains)
    report = AugmentReport(
        domains=domains,
        corpus_size={d: len(per_domain[d]) for d in domains},
        augmented_size={d: len(augmented[d]) for d in domains},
        cross_scene=cross,
        removal=removal,
        split_sizes={d: split_sizes(augmented[d]) for d in domains},
        goals={d: goal_statistics(augmented[d], d) for d in domains},
        diversity={d: diversity(per_domain[d], d) for d in domains},
        config_fingerprint=ctx.config.fingerprint(),
    )
    corpus_path = ctx.storage.save_corpus(merged, settings.AUGMENTED_CORPUS_FILENAME)
    report_path = ctx.storage.write_json(settings.AUGMENT_REPORT_FILENAME, report)
    written = validate_outputs([(corpus_path, DemoPlan, "jsonl"), (report_path, AugmentReport, "json")])
    return CommandResult(command=ctx.name, outputs=written, summary={"augmented": report.augmented_size})
