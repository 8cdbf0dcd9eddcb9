"""
ToolNet Pipeline Training Commands
训练消融模型、评估测试集与泛化测试并写出 results.csv
"""

import logging
from typing import Dict, List, Optional

from app.commands.registry import ABLATION_ARG, DOMAIN_ARG, SEED_ARG, CommandContext, CommandRouter
from app.core.error_handler import ContractError
from app.core.validation import validate_outputs
from app.models.toolnet import ABLATION_LADDER
from app.schemas.common_schemas import CommandResult
from app.schemas.corpus_schemas import DemoPlan, Split
from app.schemas.gentest_schemas import GenCaseDocument, GenTestSummary
from app.schemas.result_schemas import RESULT_COLUMNS, ResultRow, TrainingHistory
from app.services.dataset_service import eval_cases, label_and_weight, split_of, tool_vocab
from app.services.gentest_service import GenCase, evaluate_gentest, load_cases
from app.services.trainer_service import EvalResult, TrainConfig, evaluate, result_row, train
from config.settings import settings

logger = logging.getLogger(__name__)

router = CommandRouter()

LABELS = {name: label for name, label, _ in ABLATION_LADDER}


# ====================================================================== shared file helpers

def load_results(ctx: CommandContext) -> Dict[str, ResultRow]:
    if not ctx.storage.path(settings.RESULTS_FILENAME).is_file():
        return {}
    rows = [ResultRow.model_validate(r) for r in ctx.storage.read_csv(settings.RESULTS_FILENAME)]
    return {r.model: r for r in rows}


def write_results(ctx: CommandContext, rows: Dict[str, ResultRow]):
    order = [label for _, label, _ in ABLATION_LADDER]
    ranked = sorted(rows.values(), key=lambda r: (order.index(r.model) if r.model in order else len(order), r.model))
    return ctx.storage.write_csv(settings.RESULTS_FILENAME, RESULT_COLUMNS, (r.to_row() for r in ranked))


def load_histories(ctx: CommandContext) -> List[TrainingHistory]:
    if not ctx.storage.path(settings.HISTORY_FILENAME).is_file():
        return []
    return [TrainingHistory.model_validate(h) for h in ctx.storage.read_json(settings.HISTORY_FILENAME)]


def load_gentest_cases(ctx: CommandContext) -> Optional[List[GenCase]]:
    if not ctx.storage.path(settings.GENTEST_FILENAME).is_file():
        return None
    return load_cases(ctx.storage.read_jsonl(settings.GENTEST_FILENAME, GenCaseDocument))


def upsert_summaries(ctx: CommandContext, summaries: List[GenTestSummary]):
    """按 (model, domain) 合并进 gentest_summary.json"""
    existing: Dict[tuple, GenTestSummary] = {}
    if ctx.storage.path(settings.GENTEST_SUMMARY_FILENAME).is_file():
        for s in ctx.storage.read_json(settings.GENTEST_SUMMARY_FILENAME):
            summary = GenTestSummary.model_validate(s)
            existing[(summary.model, summary.domain)] = summary
    for s in summaries:
        existing[(s.model, s.domain)] = s
    order = [label for _, label, _ in ABLATION_LADDER]
    ranked = sorted(existing.values(), key=lambda s: (s.domain, order.index(s.model) if s.model in order else 99))
    return ctx.storage.write_json(settings.GENTEST_SUMMARY_FILENAME, ranked)


def domain_plans(corpus: List[DemoPlan], domain: str) -> List[DemoPlan]:
    plans = [p for p in corpus if p.domain == domain]
    if not plans:
        raise ContractError(f"corpus has no plans for domain {domain}")
    return plans


# ====================================================================== commands

@router.command("train", help="训练消融模型（--ablation all 训练全部七行）", arguments=[ABLATION_ARG, SEED_ARG, DOMAIN_ARG])
def train_models(ctx: CommandContext) -> CommandResult:
    config = ctx.config
    if ctx.args.seed is not None:
        config = config.model_copy(update={"train_seed": ctx.args.seed})
    train_config = TrainConfig.from_pipeline(config)
    corpus = ctx.storage.load_corpus(settings.AUGMENTED_CORPUS_FILENAME)

    histories = {(h.model, h.domain): h for h in load_histories(ctx)}
    results = load_results(ctx)
    outputs = []
    for row in ctx.ablation_rows():
        ablation = ctx.ablation(row)
        provider = ctx.provider(ablation)
        test: Dict[str, Optional[EvalResult]] = {}
        for domain in ctx.domains():
            plans = domain_plans(corpus, domain)
            groups = label_and_weight(split_of(plans, Split.TRAIN), train_config.w_opt, ablation.weighting, ctx.scenes)
            val = eval_cases(split_of(plans, Split.VAL), ctx.scenes)
            test_cases = eval_cases(split_of(plans, Split.TEST), ctx.scenes)

            trained = train(groups, val, ablation, train_config, provider, tool_vocab(domain), domain)
            path = trained.model.save(ctx.checkpoint_path(row, domain), provider)
            test[domain] = evaluate(trained.model, test_cases, provider, ctx.workers) if test_cases else None
            histories[(ablation.label, domain)] = trained.history.model_copy(update={
                "test_accuracy": test[domain].accuracy if test[domain] else None,
                "checkpoint": str(path.relative_to(ctx.storage.root)),
            })
            outputs.append(str(path))
        # 重新训练后旧的泛化测试列已失效
        results[ablation.label] = result_row(ablation.label, test, {})

    history_path = ctx.storage.write_json(settings.HISTORY_FILENAME, sorted(
        histories.values(), key=lambda h: (h.domain, h.model)))
    results_path = write_results(ctx, results)
    written = validate_outputs(
        [(history_path, TrainingHistory, "json-list"), (results_path, ResultRow, "csv")],
        csv_columns=RESULT_COLUMNS,
    )
    return CommandResult(command=ctx.name, outputs=outputs + written,
                         summary={r.model: r.to_row() for r in results.values()})


@router.command("eval", help="评估已训练的模型：测试集 + 泛化测试，写出 results.csv", arguments=[ABLATION_ARG, DOMAIN_ARG])
def eval_models(ctx: CommandContext) -> CommandResult:
    corpus = ctx.storage.load_corpus(settings.AUGMENTED_CORPUS_FILENAME)
    gen_cases = load_gentest_cases(ctx)
    explicit = ctx.args.ablation is not None
    rows = ctx.ablation_rows() if explicit else [
        name for name, _, _ in ABLATION_LADDER if any(name in ctx.trained_rows(d) for d in ctx.domains())
    ]
    if not rows:
        raise ContractError("no trained checkpoints found; run train first")

    results = load_results(ctx)
    summaries: List[GenTestSummary] = []
    for row in rows:
        label = LABELS[row]
        test: Dict[str, Optional[EvalResult]] = {}
        gentest: Dict[str, Dict[str, EvalResult]] = {}
        for domain in ctx.domains():
            if not explicit and row not in ctx.trained_rows(domain):
                continue
            model, provider = ctx.load_model(row, domain)
            test_cases = eval_cases(split_of(domain_plans(corpus, domain), Split.TEST), ctx.scenes)
            test[domain] = evaluate(model, test_cases, provider, ctx.workers) if test_cases else None
            if gen_cases:
                summary, gentest[domain] = evaluate_gentest(model, label, domain, gen_cases, provider, ctx.workers)
                summaries.append(summary)
        results[label] = result_row(label, test, gentest)

    outputs = [(write_results(ctx, results), ResultRow, "csv")]
    if summaries:
        outputs.append((upsert_summaries(ctx, summaries), GenTestSummary, "json-list"))
    written = validate_outputs(outputs, csv_columns=RESULT_COLUMNS)
    return CommandResult(command=ctx.name, outputs=written,
                         summary={r.model: r.to_row() for r in results.values()})
