"""End-to-end analysis of projects and report emission (JSON and Markdown)."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .blocks_text import emit_project
from .framework import RatingSheet, catalog
from .providers import Provider, ProviderUnreachable, ProviderError, Variant
from .rater import rate_project
from .scratch_ir import Project, Sb3Error, iter_scripts, load_path
from .smells import (
    RATER_ONLY_CRITERIA,
    DetectorConfig,
    StereotypeSmell,
    concept_profile,
    run_heuristics,
)
from .stage_render import Rasterizer, UnrasterizableCostume, export_costumes, render_stage
from .stats import (
    EmptyInput,
    criterion_means,
    criteria_kappa,
    framework_score,
    mann_whitney_u,
    verdict_kappa,
    verdict_tally,
)

logger = logging.getLogger(__name__)


@dataclass
class AnalyzeOptions:
    out_dir: Path | None = None
    use_llm: bool = True
    provider: Provider | None = None
    variants: tuple[Variant, ...] = (Variant.PLAIN, Variant.WITH_FRAMEWORK)
    repeats: int = 5
    model_name: str = ""
    temperature: float | None = None
    descriptions: Mapping[str, str] = field(default_factory=dict)
    human_sheets: Mapping[str, Sequence[RatingSheet]] = field(default_factory=dict)
    detector_config: DetectorConfig = field(default_factory=DetectorConfig)
    rasterizer: Rasterizer | None = None
    strict: bool = False
    workers: int | None = None
    concurrency: int = 4
    timestamp: str | None = None
    na_policy: str = "exclude"
    save_images: bool = False


def _timestamp(options: AnalyzeOptions) -> str:
    if options.timestamp is not None:
        return options.timestamp
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch and epoch.isdigit()
        else _dt.datetime.now(_dt.timezone.utc)
    )
    return moment.replace(microsecond=0).isoformat().replace("+00:00", "Z")


@dataclass
class AnalysisReport:
    project_id: str
    path: str
    scratchblocks_sha256: str
    project: dict
    concepts: dict
    smells: list[StereotypeSmell]
    sheets: list[RatingSheet]
    rater_runs: list[dict]
    aggregates: dict
    metadata: dict

    @property
    def gendered(self) -> bool:
        return any(g["tally"]["gendered"] for g in self.aggregates.values() if g.get("tally"))

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "path": self.path,
            "scratchblocks_sha256": self.scratchblocks_sha256,
            "project": self.project,
            "concepts": self.concepts,
            "smells": [s.to_dict() for s in self.smells],
            "not_heuristically_assessed": list(RATER_ONLY_CRITERIA),
            "sheets": [s.to_dict() for s in self.sheets],
            "rater_runs": self.rater_runs,
            "aggregates": self.aggregates,
            "gendered": self.gendered,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnalysisReport":
        return cls(
            project_id=data["project_id"],
            path=data["path"],
            scratchblocks_sha256=data["scratchblocks_sha256"],
            project=data["project"],
            concepts=data["concepts"],
            smells=[StereotypeSmell.from_dict(s) for s in data["smells"]],
            sheets=[RatingSheet.from_dict(s) for s in data["sheets"]],
            rater_runs=data["rater_runs"],
            aggregates=data["aggregates"],
            metadata=data["metadata"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _group_key(sheet: RatingSheet) -> str:
    if sheet.provenance.value == "human":
        return "human"
    return f"model/{sheet.extra.get('variant', 'framework')}"


def aggregate(sheets: Sequence[RatingSheet], na_policy: str = "exclude") -> dict:
    """Per rater group (human, model/plain, model/framework): means, overall score, verdict tally."""
    groups: dict[str, list[RatingSheet]] = {}
    for s in sheets:
        groups.setdefault(_group_key(s), []).append(s)
    out = {}
    for key in sorted(groups):
        members = groups[key]
        entry: dict = {"n_raters": len(members), "tally": verdict_tally(members).to_dict()}
        try:
            means = criterion_means(members, na_policy)
            score = framework_score(members, na_policy)
        except EmptyInput:
            entry["criterion_means"] = None
            entry["sigma"] = None
        else:
            entry["criterion_means"] = {
                cid: {"mean": m.mean, "n_applicable": m.n_applicable, "n_na": m.n_na} for cid, m in means.items()
            }
            entry["sigma"] = {"sigma": score.sigma, "n_scores": score.n_scores}
        out[key] = entry
    return out


def project_id_for(path: str | Path) -> str:
    name = Path(path).name
    return name[: -len(".sb3")] if name.endswith(".sb3") else name


def analyze_file(path: str | Path, options: AnalyzeOptions) -> AnalysisReport:
    """Load, emit, render, run heuristics, optionally rate, and aggregate one project."""
    path = Path(path)
    pid = project_id_for(path)
    project = load_path(path)
    text = emit_project(project)
    description = options.descriptions.get(pid, "")
    stage = render_stage(project, options.rasterizer)
    smells = run_heuristics(project, options.detector_config, description, options.rasterizer)

    sheets: list[RatingSheet] = list(options.human_sheets.get(pid, ()))
    runs = []
    if options.use_llm:
        if options.provider is None:
            raise ValueError("use_llm requires a provider")
        for variant in options.variants:
            run = rate_project(
                project,
                description,
                variant,
                options.provider,
                repeats=options.repeats,
                project_id=pid,
                concurrency=options.concurrency,
                rasterizer=options.rasterizer,
                model_name=options.model_name or _provider_model(options.provider),
                temperature=options.temperature,
            )
            sheets.extend(run.sheets)
            runs.append(
                {
                    "variant": run.variant.value,
                    "requests": run.requests,
                    "retries": run.retries,
                    "n_sheets": len(run.sheets),
                    "errors": [str(e) for e in run.errors],
                }
            )

    if options.save_images and options.out_dir is not None:
        img_dir = Path(options.out_dir) / pid
        img_dir.mkdir(parents=True, exist_ok=True)
        (img_dir / "stage.png").write_bytes(stage.png_bytes())
        export_costumes(project, img_dir / "costumes", options.rasterizer)

    return AnalysisReport(
        project_id=pid,
        path=str(path),
        scratchblocks_sha256=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        project=_project_summary(project),
        concepts=dataclasses.asdict(concept_profile(project)),
        smells=smells,
        sheets=sheets,
        rater_runs=runs,
        aggregates=aggregate(sheets, options.na_policy) if sheets else {},
        metadata={
            "tool_version": __version__,
            "generated_at": _timestamp(options),
            "detector_config_sha256": options.detector_config.digest(),
            "model": (options.model_name or _provider_model(options.provider)) if options.use_llm else None,
            "temperature": options.temperature if options.temperature is not None else "provider default",
            "repeats": options.repeats if options.use_llm else 0,
            "variants": [v.value for v in options.variants] if options.use_llm else [],
            "na_policy": options.na_policy,
            "kappa_categories": "nominal 0-5 including not-applicable",
            "stage_monitors_rendered": False,
            "reduced_visual_fidelity": list(stage.placeholders),
        },
    )


def _provider_model(provider: Provider | None) -> str:
    if provider is None:
        return ""
    return getattr(provider, "model", "") or type(provider).__name__


def _project_summary(project: Project) -> dict:
    return {
        "meta": project.meta,
        "sprites": [s.name for s in project.sprites],
        "scripts": sum(len(iter_scripts(t)) for t in project.targets),
        "blocks": sum(sum(1 for b in t.blocks.values() if not b.shadow) for t in project.targets),
        "unknown_opcodes": sorted({op for t in project.targets for op in t.unknown_opcodes}),
        "monitors": project.monitor_count,
    }


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------


@dataclass
class CorpusSummary:
    reports: list[AnalysisReport]
    errors: list[dict]
    n_projects: int

    def to_dict(self) -> dict:
        flagged = [r for r in self.reports if r.gendered]
        out: dict = {
            "tool_version": __version__,
            "n_projects": self.n_projects,
            "n_analyzed": len(self.reports),
            "n_errors": len(self.errors),
            "errors": self.errors,
            "n_flagged": len(flagged),
            "flagged_percent": (
                round(100.0 * len(flagged) / len(self.reports), 2) if self.reports else None
            ),
            "projects": [
                {
                    "id": r.project_id,
                    "gendered": r.gendered,
                    "smells": [f"{s.criterion_id}:{s.severity.label}" for s in r.smells],
                    "sigma": {k: (g["sigma"] or {}).get("sigma") for k, g in r.aggregates.items()},
                }
                for r in self.reports
            ],
        }
        out["agreement"] = self._agreement()
        out["human_vs_model"] = self._human_vs_model()
        return out

    def _agreement(self) -> dict:
        groups: dict[str, dict[str, list[RatingSheet]]] = {}
        for r in self.reports:
            for s in r.sheets:
                groups.setdefault(_group_key(s), {}).setdefault(r.project_id, []).append(s)
        out = {}
        for key in sorted(groups):
            by_project = groups[key]
            v, c = verdict_kappa(by_project), criteria_kappa(by_project)
            out[key] = {
                "verdict_kappa": v.kappa,
                "verdict_items": v.n_items,
                "criteria_kappa": c.kappa,
                "criteria_items": c.n_items,
                "dropped_items": v.n_dropped + c.n_dropped,
            }
        return out

    def _human_vs_model(self) -> dict | None:
        human, model = [], []
        for r in self.reports:
            h = (r.aggregates.get("human") or {}).get("sigma")
            m = (r.aggregates.get("model/framework") or {}).get("sigma")
            if h and h["sigma"] is not None:
                human.append(h["sigma"])
            if m and m["sigma"] is not None:
                model.append(m["sigma"])
        if not human or not model:
            return None
        res = mann_whitney_u(human, model)
        return {
            "human_mean": sum(human) / len(human),
            "model_mean": sum(model) / len(model),
            "u": res.u,
            "p_two_sided": res.p_two_sided,
            "method": res.method,
        }


def discover(path: str | Path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == ".sb3" and p.is_file())
    return [path]


def analyze(path: str | Path, options: AnalyzeOptions | None = None) -> CorpusSummary:
    """Analyze one ``.sb3`` file or every ``.sb3`` in a directory.

    Per-project failures are collected in the summary unless ``options.strict``
    is set; an unreachable provider always aborts.
    """
    options = options or AnalyzeOptions()
    files = discover(path)

    def work(p: Path):
        try:
            return analyze_file(p, options)
        except ProviderUnreachable:
            raise
        except (Sb3Error, UnrasterizableCostume, ProviderError, OSError, ValueError) as exc:
            if options.strict:
                raise
            logger.warning("%s: %s", p, exc)
            return {"path": str(p), "type": type(exc).__name__, "error": str(exc)}

    workers = options.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(work, files))

    reports = [r for r in results if isinstance(r, AnalysisReport)]
    errors = [r for r in results if isinstance(r, dict)]
    summary = CorpusSummary(reports, errors, len(files))
    if options.out_dir is not None:
        write_outputs(summary, Path(options.out_dir))
    return summary


def write_outputs(summary: CorpusSummary, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in summary.reports:
        (out_dir / f"{r.project_id}.report.json").write_text(r.to_json(), encoding="utf-8")
        (out_dir / f"{r.project_id}.report.md").write_text(render_markdown(r), encoding="utf-8")
    (out_dir / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# markdown
# ---------------------------------------------------------------------------


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def render_markdown(report: AnalysisReport) -> str:
    groups = sorted(report.aggregates)
    heuristic = {}
    for s in report.smells:
        heuristic.setdefault(s.criterion_id, s.severity.label)

    lines = [f"# Stereotype smell report: {report.project_id}", ""]
    lines += [f"- File: `{report.path}`", f"- Sprites: {', '.join(report.project['sprites']) or '(none)'}"]
    lines += [f"- Scratchblocks SHA-256: `{report.scratchblocks_sha256}`", ""]

    lines += ["## Heuristic smells", ""]
    if not report.smells:
        lines += ["No heuristic smells detected.", ""]
    for s in report.smells:
        lines.append(f"- **{s.criterion_id}** ({s.severity.label}, `{s.detector}`)")
        for ev in s.evidence:
            where = ev.target_name + (f" / {ev.ref}" if ev.ref else "")
            lines.append(f"  - {where}: {ev.excerpt}")
    if report.smells:
        lines.append("")

    lines += ["## Criteria", ""]
    header = ["Criterion", "Statement", "Heuristic", *groups]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for c in catalog():
        cells = [c.id, c.statement, heuristic.get(c.id, "n/a" if c.id in RATER_ONLY_CRITERIA else "-")]
        for g in groups:
            means = report.aggregates[g].get("criterion_means") or {}
            cells.append(_fmt((means.get(c.id) or {}).get("mean")))
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("`n/a` in the heuristic column: not heuristically assessed, rater judgement only.")
    lines.append("")

    lines += ["## Overall score and verdicts", ""]
    if not groups:
        lines += ["No rating sheets.", ""]
    for g in groups:
        agg = report.aggregates[g]
        sigma = (agg.get("sigma") or {}).get("sigma")
        counts = agg["tally"]["counts"]
        tally = ", ".join(f"{k} {counts[k]}" for k in ("boy", "girl", "inclusive"))
        flag = "gender-specific by at least one rater" if agg["tally"]["gendered"] else "inclusive for all raters"
        lines.append(f"- {g}: sigma {_fmt(sigma)}; verdicts {tally}; {flag}")
    if groups:
        lines.append("")

    meta = report.metadata
    lines += ["## Metadata", ""]
    for key in sorted(meta):
        lines.append(f"- {key}: {meta[key]}")
    return "\n".join(lines) + "\n"


def report_schema() -> dict:
    text = resources.files("stereoscan").joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(data: Mapping) -> None:
    """Raise ``jsonschema.ValidationError`` if ``data`` does not match the report schema."""
    import jsonschema

    jsonschema.validate(dict(data), report_schema())
