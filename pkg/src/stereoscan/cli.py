"""``stereoscan`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 analysis errors present, 3 provider unreachable.
Run settings resolve as flags > environment > ``[stereoscan]`` table of the TOML config > defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .blocks_text import emit_project
from .framework import RatingSheet, catalog, catalog_json, validate_sheet
from .genprompt import TOPICS, Description, GenerationSpec, default_specs, dumps, export_questionnaires, generate_batch, questionnaire_markdown
from .providers import DEFAULT_BASE_URL, DEFAULT_MODEL, MockProvider, OpenAIChatProvider, ProviderError, ProviderUnreachable, Variant
from .rater import rate_project
from .report import AnalyzeOptions, aggregate, analyze
from .scratch_ir import Sb3Error, load_path
from .smells import DetectorConfig, toml_loads
from .stage_render import UnrasterizableCostume, cairosvg_rasterizer, export_costumes, render_stage
from .stats import EmptyInput, criteria_kappa, framework_score, group_by_project, mann_whitney_u, verdict_kappa

EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS, EXIT_UNREACHABLE = 0, 1, 2, 3

DEFAULTS = {
    "provider": "mock",
    "model": DEFAULT_MODEL,
    "base_url": DEFAULT_BASE_URL,
    "api_key": None,
    "repeats": 5,
    "temperature": None,
    "concurrency": 4,
    "seed": 0,
}
ENV_VARS = {
    "api_key": "STEREOSCAN_API_KEY",
    "base_url": "STEREOSCAN_BASE_URL",
    "model": "STEREOSCAN_MODEL",
    "provider": "STEREOSCAN_PROVIDER",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------


def load_config_file(path: str | None) -> tuple[dict, DetectorConfig]:
    if not path:
        return {}, DetectorConfig()
    try:
        data = toml_loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"invalid TOML in {path}: {exc}") from exc
    settings = data.pop("stereoscan", {})
    unknown = set(settings) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown [stereoscan] keys in {path}: {sorted(unknown)}")
    try:
        return settings, DetectorConfig.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid detector config in {path}: {exc}") from exc


def resolve_settings(args: argparse.Namespace, environ=os.environ) -> tuple[dict, DetectorConfig]:
    file_settings, detector = load_config_file(getattr(args, "config", None))
    out = dict(DEFAULTS)
    out.update(file_settings)
    for key, var in ENV_VARS.items():
        if environ.get(var):
            out[key] = environ[var]
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out, detector


def make_provider(settings: dict, transcript: Path | None):
    kind = settings["provider"]
    if kind == "mock":
        return MockProvider(int(settings["seed"]))
    if kind == "openai":
        if not settings.get("api_key"):
            raise UsageError("the openai provider needs STEREOSCAN_API_KEY")
        return OpenAIChatProvider(
            api_key=settings["api_key"],
            model=settings["model"],
            base_url=settings["base_url"],
            temperature=settings["temperature"],
            concurrency=int(settings["concurrency"]),
            transcript_path=transcript,
        )
    raise UsageError(f"unknown provider {kind!r}")


def transcript_path(args: argparse.Namespace, settings: dict, default_dir: Path) -> Path | None:
    """Real providers log transcripts unless told not to; the mock never does."""
    if getattr(args, "no_transcript", False):
        return None
    if getattr(args, "transcript", None):
        return Path(args.transcript)
    if settings["provider"] == "mock":
        return None
    default_dir.mkdir(parents=True, exist_ok=True)
    return default_dir / "transcript.jsonl"


def resolve_rasterizer(name: str):
    if name == "placeholder":
        return None
    if name == "cairo":
        try:
            import cairosvg  # noqa: F401
        except ImportError as exc:
            raise UsageError("--svg cairo needs the optional cairosvg package") from exc
    return cairosvg_rasterizer


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def load_sheets(path: str) -> list[RatingSheet]:
    data = _read_json(path)
    rows = data.get("sheets", data) if isinstance(data, dict) else data
    if not isinstance(rows, list):
        raise UsageError(f"{path}: expected a list of rating sheets")
    try:
        return [validate_sheet(RatingSheet.from_dict(r)) for r in rows]
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise UsageError(f"{path}: invalid rating sheet: {exc}") from exc


def load_descriptions(path: str) -> dict[str, str]:
    data = _read_json(path)
    if isinstance(data, dict):
        return {str(k): str(v) for k, v in data.items()}
    if isinstance(data, list):
        return {str(d["id"]): str(d["text"]) for d in data}
    raise UsageError(f"{path}: expected an object or a list of descriptions")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_framework(args) -> int:
    if args.json:
        print(catalog_json())
    else:
        for c in catalog():
            print(f"{c.id}  {c.statement}")
    return EXIT_OK


def cmd_blocks(args) -> int:
    sys.stdout.write(emit_project(load_path(args.file)))
    return EXIT_OK


def cmd_render(args) -> int:
    project = load_path(args.file)
    rasterizer = resolve_rasterizer(args.svg)
    allow = not args.strict_svg
    stage = render_stage(project, rasterizer, allow_placeholder=allow)
    Path(args.output).write_bytes(stage.png_bytes())
    if stage.placeholders:
        logging.warning("placeholders used for SVG costumes: %s", ", ".join(stage.placeholders))
    if args.costumes_dir:
        export_costumes(project, args.costumes_dir, rasterizer, allow_placeholder=allow)
    return EXIT_OK


def _variants(args) -> tuple[Variant, ...]:
    return tuple(Variant(v) for v in args.variant) if args.variant else (Variant.PLAIN, Variant.WITH_FRAMEWORK)


def cmd_analyze(args) -> int:
    settings, detector = resolve_settings(args)
    out_dir = Path(args.output)
    provider = None
    if not args.no_llm:
        provider = make_provider(settings, transcript_path(args, settings, out_dir))
    options = AnalyzeOptions(
        out_dir=out_dir,
        use_llm=not args.no_llm,
        provider=provider,
        variants=_variants(args),
        repeats=int(settings["repeats"]),
        model_name=settings["model"] if settings["provider"] != "mock" else "mock",
        temperature=settings["temperature"],
        descriptions=load_descriptions(args.descriptions) if args.descriptions else {},
        human_sheets=group_by_project(load_sheets(args.ratings)) if args.ratings else {},
        detector_config=detector,
        rasterizer=resolve_rasterizer(args.svg),
        strict=args.strict,
        workers=args.workers,
        concurrency=int(settings["concurrency"]),
        timestamp=args.timestamp,
        na_policy=args.na_policy,
        save_images=args.save_images,
    )
    summary = analyze(args.path, options)
    d = summary.to_dict()
    print(f"{d['n_analyzed']}/{d['n_projects']} projects analyzed, {d['n_errors']} errors, "
          f"{d['n_flagged']} flagged; reports in {out_dir}")
    return EXIT_ANALYSIS if summary.errors else EXIT_OK


def cmd_rate(args) -> int:
    settings, _ = resolve_settings(args)
    project = load_path(args.file)
    provider = make_provider(settings, transcript_path(args, settings, Path(".")))
    description = Path(args.description_file).read_text(encoding="utf-8") if args.description_file else args.description
    sheets, errors = [], []
    for variant in _variants(args):
        run = rate_project(
            project,
            description,
            variant,
            provider,
            repeats=int(settings["repeats"]),
            project_id=Path(args.file).stem,
            concurrency=int(settings["concurrency"]),
            rasterizer=resolve_rasterizer(args.svg),
            model_name=settings["model"],
            temperature=settings["temperature"],
        )
        sheets += run.sheets
        errors += [str(e) for e in run.errors]
    print(dumps({"sheets": [s.to_dict() for s in sheets], "errors": errors, "aggregates": aggregate(sheets)}), end="")
    return EXIT_ANALYSIS if errors else EXIT_OK


def cmd_generate(args) -> int:
    settings, _ = resolve_settings(args)
    if args.all:
        specs = default_specs(int(settings["seed"]))
    elif args.topic:
        specs = [GenerationSpec(args.topic, args.inclusive, int(settings["seed"]))]
    else:
        raise UsageError("give --topic or --all")
    provider = make_provider(settings, transcript_path(args, settings, Path(".")))
    results = generate_batch(provider, specs, settings["model"])
    out = [Description(s.id, s.topic, s.inclusive, text).to_dict() for s, text in results]
    print(dumps(out), end="")
    return EXIT_OK


def cmd_questionnaire(args) -> int:
    data = _read_json(args.input)
    try:
        descriptions = [Description.from_dict(d) for d in data]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{args.input}: invalid descriptions: {exc}") from exc
    documents, key = export_questionnaires(descriptions, args.orders, args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for doc in documents:
        stem = out / f"questionnaire_{doc['questionnaire']}"
        stem.with_suffix(".json").write_text(dumps(doc), encoding="utf-8")
        stem.with_suffix(".md").write_text(questionnaire_markdown(doc), encoding="utf-8")
    (out / "answer_key.json").write_text(dumps(key), encoding="utf-8")
    print(f"wrote {len(documents)} questionnaires and answer_key.json to {out}")
    return EXIT_OK


def ratings_summary(sheets: list[RatingSheet], na_policy: str = "exclude") -> dict:
    by_project = group_by_project(sheets)
    per_project = {}
    for pid in sorted(by_project):
        agg = aggregate(by_project[pid], na_policy)
        per_project[pid] = {k: {"sigma": (g["sigma"] or {}).get("sigma"), "tally": g["tally"]} for k, g in agg.items()}
    overall = aggregate(sheets, na_policy)
    flagged = sum(any(g["tally"]["gendered"] for g in p.values()) for p in per_project.values())
    v, c = verdict_kappa(by_project), criteria_kappa(by_project)
    return {
        "n_sheets": len(sheets),
        "n_projects": len(by_project),
        "criterion_means": {k: g["criterion_means"] for k, g in overall.items()},
        "sigma": {k: g["sigma"] for k, g in overall.items()},
        "tally": {k: g["tally"] for k, g in overall.items()},
        "flagged": flagged,
        "flagged_percent": round(100.0 * flagged / len(by_project), 2) if by_project else None,
        "kappa": {
            "verdict": {"kappa": v.kappa, "items": v.n_items, "dropped": v.n_dropped},
            "criteria": {"kappa": c.kappa, "items": c.n_items, "dropped": c.n_dropped},
        },
        "projects": per_project,
    }


def _project_sigmas(sheets: list[RatingSheet], na_policy: str) -> list[float]:
    out = []
    for _, group in sorted(group_by_project(sheets).items()):
        try:
            sigma = framework_score(group, na_policy).sigma
        except EmptyInput:
            continue
        if sigma is not None:
            out.append(sigma)
    return out


def cmd_stats(args) -> int:
    sets = [load_sheets(p) for p in args.ratings]
    result: dict = {"inputs": [{"file": p, **ratings_summary(s, args.na_policy)} for p, s in zip(args.ratings, sets)]}
    if len(sets) == 2:
        a, b = (_project_sigmas(s, args.na_policy) for s in sets)
        if a and b:
            mw = mann_whitney_u(a, b)
            result["mannwhitney"] = {"u": mw.u, "p_two_sided": mw.p_two_sided, "method": mw.method, "n": [len(a), len(b)]}
    print(dumps(result), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _provider_flags(p: argparse.ArgumentParser, rating: bool = True) -> None:
    p.add_argument("--config", help="TOML file with a [stereoscan] table and detector sections")
    p.add_argument("--provider", choices=["mock", "openai"])
    p.add_argument("--model")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--temperature", type=float)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--transcript", help="JSONL file for raw prompts and responses")
    p.add_argument("--no-transcript", action="store_true")
    if rating:
        p.add_argument("--repeats", type=int)
        p.add_argument("--variant", action="append", choices=[v.value for v in Variant])


def _svg_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--svg", choices=["auto", "cairo", "placeholder"], default="auto",
                   help="SVG costume rasterizer (auto uses cairosvg when installed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stereoscan", description="Gender stereotype smells in Scratch projects.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("framework", help="print the 18 criteria")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_framework)

    p = sub.add_parser("blocks", help="print a project as scratchblocks text")
    p.add_argument("file")
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("render", help="render the start-of-program stage and export costumes")
    p.add_argument("file")
    p.add_argument("-o", "--output", default="stage.png")
    p.add_argument("--costumes-dir")
    p.add_argument("--strict-svg", action="store_true", help="fail instead of drawing SVG placeholders")
    _svg_flag(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("analyze", help="analyze a project or a directory of projects")
    p.add_argument("path")
    p.add_argument("-o", "--output", default="stereoscan-out")
    p.add_argument("--no-llm", action="store_true")
    p.add_argument("--descriptions", help="JSON mapping project id to creator description")
    p.add_argument("--ratings", help="JSON list of human rating sheets")
    p.add_argument("--strict", action="store_true", help="stop at the first failing project")
    p.add_argument("--workers", type=int)
    p.add_argument("--timestamp", help="fixed timestamp for reproducible reports")
    p.add_argument("--na-policy", choices=["exclude", "as_midpoint"], default="exclude")
    p.add_argument("--save-images", action="store_true")
    _provider_flags(p)
    _svg_flag(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("rate", help="rate one project with a model")
    p.add_argument("file")
    p.add_argument("--description", default="")
    p.add_argument("--description-file")
    _provider_flags(p)
    _svg_flag(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("generate", help="generate project descriptions")
    p.add_argument("--topic", choices=TOPICS)
    p.add_argument("--inclusive", action="store_true")
    p.add_argument("--all", action="store_true", help="every topic, with and without the criteria")
    _provider_flags(p, rating=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("questionnaire", help="build blinded questionnaires from descriptions")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--orders", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="questionnaires")
    p.set_defaults(func=cmd_questionnaire)

    p = sub.add_parser("stats", help="aggregate rating sheets")
    p.add_argument("--ratings", nargs="+", required=True, metavar="FILE")
    p.add_argument("--na-policy", choices=["exclude", "as_midpoint"], default="exclude")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "stats" and len(args.ratings) > 2:
        parser.error("stats takes one or two rating files")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stereoscan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderUnreachable as exc:
        print(f"stereoscan: provider unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (Sb3Error, UnrasterizableCostume, ProviderError, OSError, ValueError) as exc:
        print(f"stereoscan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
