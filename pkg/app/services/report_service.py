"""
ToolNet Pipeline Report Service
汇总结果表、语料统计、泛化测试与规划对比为 report.md
"""

import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence

from app.core.error_handler import MissingInputError
from app.models.toolnet import ABLATION_LADDER
from app.schemas.corpus_schemas import AugmentReport
from app.schemas.gentest_schemas import GenTestSummary
from app.schemas.result_schemas import RESULT_COLUMNS, PlannerSummary, ResultRow, TrainingHistory
from app.services.storage_service import RunStorage
from config.settings import settings

logger = logging.getLogger(__name__)

ROW_ORDER = [label for _, label, _ in ABLATION_LADDER]
REPORT_HEADINGS = ("# ToolNet run report", "## Results")


def _fmt(value: Optional[float], digits: int = 2) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _table(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> List[str]:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return lines


def _row_rank(row: ResultRow) -> tuple:
    return (ROW_ORDER.index(row.model) if row.model in ROW_ORDER else len(ROW_ORDER), row.model)


class ReportBuilder:
    """从运行目录读取各阶段输出，拼装 markdown"""

    def __init__(self, storage: RunStorage):
        self.storage = storage
        self.lines: List[str] = []

    def _optional(self, name: str, reader):
        try:
            return reader(name)
        except MissingInputError:
            logger.info(f"报告跳过缺失的文件: {name}")
            return None

    # ------------------------------------------------------------ sections

    def results(self) -> None:
        rows = sorted((ResultRow.model_validate(r) for r in self.storage.read_csv(settings.RESULTS_FILENAME)),
                      key=_row_rank)
        self.lines += ["## Results", "", "Accuracy in percent (test = held-out scene).", ""]
        self.lines += _table(RESULT_COLUMNS, ([row.to_row()[c] or "-" for c in RESULT_COLUMNS] for row in rows))
        self.lines.append("")

    def corpus(self) -> None:
        data = self._optional(settings.AUGMENT_REPORT_FILENAME, self.storage.read_json)
        if data is None:
            return
        report = AugmentReport.model_validate(data)
        self.lines += ["## Corpus", ""]
        self.lines += _table(
            ("domain", "plans", "augmented", "cross-scene accepted", "removal accepted", "diversity"),
            (
                (d, report.corpus_size.get(d, 0), report.augmented_size.get(d, 0),
                 f"{report.cross_scene[d].accepted}/{report.cross_scene[d].attempted}" if d in report.cross_scene else "-",
                 f"{report.removal[d].accepted}/{report.removal[d].attempted}" if d in report.removal else "-",
                 _fmt(report.diversity.get(d)))
                for d in report.domains
            ),
        )
        self.lines.append("")
        for domain in report.domains:
            stats = report.goals.get(domain, [])
            if not stats:
                continue
            self.lines += [f"### {domain} goals", ""]
            self.lines += _table(
                ("goal", "plans", "actions", "objects", "tools", "cost", "top tools"),
                (
                    (f"{g.goal_id}. {g.text}", g.plans,
                     f"{g.actions_mean:.2f}±{g.actions_std:.2f}",
                     f"{g.interacted_mean:.2f}±{g.interacted_std:.2f}",
                     f"{g.tools_mean:.2f}±{g.tools_std:.2f}",
                     f"{g.cost_mean:.1f}±{g.cost_std:.1f}",
                     ", ".join(f"{t}:{n}" for t, n in sorted(g.tool_histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:5]) or "-")
                    for g in stats
                ),
            )
            self.lines.append("")

    def training(self) -> None:
        data = self._optional(settings.HISTORY_FILENAME, self.storage.read_json)
        if not data:
            return
        histories = [TrainingHistory.model_validate(h) for h in data]
        histories.sort(key=lambda h: (h.domain, ROW_ORDER.index(h.model) if h.model in ROW_ORDER else 99))
        self.lines += ["## Training", ""]
        self.lines += _table(
            ("model", "domain", "parameters", "epochs", "best epoch", "best val", "test"),
            (
                (h.model, h.domain, h.parameters, len(h.epochs), h.best_epoch,
                 _fmt(100 * h.best_val_accuracy),
                 _fmt(None if h.test_accuracy is None else 100 * h.test_accuracy))
                for h in histories
            ),
        )
        self.lines.append("")

    def gentest(self) -> None:
        data = self._optional(settings.GENTEST_SUMMARY_FILENAME, self.storage.read_json)
        if not data:
            return
        summaries = [GenTestSummary.model_validate(s) for s in data]
        types = list(summaries[0].per_type)
        self.lines += ["## Generalization", ""]
        self.lines += _table(
            ["model", "domain"] + types + ["all", "III strict"],
            (
                [s.model, s.domain]
                + [f"{100 * s.per_type[t].accuracy:.1f} ({s.per_type[t].cases})" for t in types]
                + [f"{100 * s.total.accuracy:.1f}",
                   f"{100 * s.strict_type_iii.accuracy:.1f} ({s.strict_type_iii.cases})"]
                for s in summaries
            ),
        )
        self.lines.append("")

    def planner(self) -> None:
        data = self._optional(f"{settings.PLANS_DIRNAME}/{settings.PLANNER_SUMMARY_FILENAME}", self.storage.read_json)
        if not data:
            return
        summaries = [PlannerSummary.model_validate(s) for s in data]
        self.lines += ["## Planner", ""]
        self.lines += _table(
            ("domain", "pairs", "found (uninformed/guided)", "b* uninformed", "b* guided",
             "nodes uninformed", "nodes guided", "pruned pairs"),
            (
                (s.domain, s.pairs,
                 f"{s.found.get('uninformed', 0)}/{s.found.get('guided', 0)}",
                 f"{_fmt(s.ebf_mean.get('uninformed'))}±{_fmt(s.ebf_std.get('uninformed'))}",
                 f"{_fmt(s.ebf_mean.get('guided'))}±{_fmt(s.ebf_std.get('guided'))}",
                 _fmt(s.nodes_mean.get("uninformed"), 1),
                 _fmt(s.nodes_mean.get("guided"), 1),
                 f"{s.pruned_pairs} ({100 * s.pruned_fraction:.0f}%)")
                for s in summaries
            ),
        )
        self.lines.append("")

    def performance(self) -> None:
        data: Optional[Dict[str, Any]] = self._optional(settings.PERFORMANCE_FILENAME, self.storage.read_json)
        if not data:
            return
        self.lines += ["## Timings", ""]
        rows = []
        for command in sorted(data):
            for operation, stats in sorted(data[command].get("operations", {}).items()):
                rows.append((command, operation, stats.get("count", 0),
                             f"{stats.get('total', 0.0):.2f}", f"{stats.get('avg', 0.0):.3f}"))
        self.lines += _table(("command", "operation", "count", "total s", "avg s"), rows)
        self.lines.append("")

    def build(self) -> str:
        self.lines = ["# ToolNet run report", ""]
        self.results()
        self.corpus()
        self.training()
        self.gentest()
        self.planner()
        self.performance()
        return "\n".join(self.lines).rstrip() + "\n"


def build_report(storage: RunStorage) -> str:
    """results.csv 必须存在，其余部分缺失时省略"""
    return ReportBuilder(storage).build()
