"""Operator surface: one executable with subcommands wiring the whole
toolkit into reproducible runs.

Exit codes are a stable contract: 0 success, 1 validation or scoring
found problems, 2 usage/config error. Identical inputs (plus a warm
cache) produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import hardsample, rewards
from .client import (
    HttpChatClient,
    HttpDetector,
    ScriptedChatClient,
    ScriptMiss,
)
from .config import ConfigError, EndpointSpec, RunConfig, load_run_config
from .metrics import (
    ScoreCard,
    match_components,
    mean_scorecards,
    s1_f1,
    s2_f1,
    s3_f1,
    score_card,
    task2_score,
)
from .model import Diagram, RecognitionResult, validate_diagram, validate_qa_item
from .pipeline import ClientBundle, default_templates, load_templates, run_pipeline
from .report import AGGREGATE, FORMATS, ScoreRow, emit_report
from .storage import (
    AnnotationFile,
    SchemaError,
    load_annotations,
    load_detections,
    read_predictions,
    write_predictions,
)

log = logging.getLogger("sysdiag")

EXIT_OK = 0
EXIT_PROBLEMS = 1
EXIT_USAGE = 2


def _dataset_violations(dataset: AnnotationFile) -> list[str]:
    violations = []
    ids = dataset.diagram_ids()
    for d in dataset.diagrams:
        violations += [f"{d.id}: {v}" for v in validate_diagram(d)]
    for q in dataset.qa:
        violations += validate_qa_item(q, ids)
    return violations


def _sniff_and_validate(path: Path) -> list[str]:
    """Validate an annotation or detections file; returns violations."""
    raw = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "schema_version" in raw:
        return _dataset_violations(load_annotations(path))
    load_detections(path)  # raises SchemaError on violation
    return []


def cmd_validate(dataset: str) -> int:
    path = Path(dataset)
    try:
        violations = _sniff_and_validate(path)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"schema violation: {exc}", file=sys.stderr)
        return EXIT_PROBLEMS
    if violations:
        for v in violations:
            print(f"violation: {v}")
        print(f"{len(violations)} violation(s) found")
        return EXIT_PROBLEMS
    print("ok")
    return EXIT_OK


def _load_validated_dataset(path) -> AnnotationFile:
    """Ingest gate: annotation files with broken invariants (self-loops,
    dangling edges, bad boxes) are rejected, never silently repaired."""
    dataset = load_annotations(path)
    violations = _dataset_violations(dataset)
    if violations:
        raise DatasetInvalid(violations)
    return dataset


class DatasetInvalid(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__(f"dataset failed validation ({len(violations)} violation(s))")


def _chat_client(spec: EndpointSpec, cache_dir):
    if spec.kind == "scripted":
        raw = json.loads(Path(spec.script_path).read_text(encoding="utf-8"))
        return ScriptedChatClient(raw.get("script", {}),
                                  default=raw.get("default", spec.default),
                                  strict=bool(raw.get("strict", spec.strict)))
    return HttpChatClient(spec.http, cache_dir=cache_dir)


def _detection_source(cfg: RunConfig):
    if cfg.detections is not None:
        table = load_detections(cfg.detections)
        name = Path(cfg.detections).name

        def from_file(diagram: Diagram, _image_png):
            return table.get(diagram.id, [])

        return from_file, f"detections-file:{name}"
    detector = HttpDetector(cfg.detector.http)

    def from_endpoint(diagram: Diagram, image_png: bytes):
        return detector.detect(image_png)

    return from_endpoint, detector.describe()


def cmd_run(config_path: str, out_dir: str | None = None,
            parallelism: int | None = None, cache_dir: str | None = None) -> int:
    try:
        cfg = load_run_config(config_path, out_dir=out_dir,
                              parallelism=parallelism, cache_dir=cache_dir)
        dataset = _load_validated_dataset(cfg.dataset)
        detection_source, det_desc = _detection_source(cfg)
        naming = _chat_client(cfg.naming, cfg.cache_dir)
        reasoning = _chat_client(cfg.reasoning, cfg.cache_dir)
        knowledge = {cat: _chat_client(spec, cfg.cache_dir)
                     for cat, spec in cfg.knowledge.items()}
        templates = load_templates(cfg.templates) if cfg.templates else default_templates()
    except DatasetInvalid as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        print(f"error: {exc}; run 'sysdiag validate' for details", file=sys.stderr)
        return EXIT_PROBLEMS
    except (ConfigError, SchemaError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    bundle = ClientBundle(
        detection_source=detection_source,
        naming=naming,
        reasoning=reasoning,
        knowledge=knowledge,
        descriptors={
            "components": det_desc,
            "names": naming.describe(),
            "edges": reasoning.describe(),
            "answers": {cat: client.describe() for cat, client in sorted(knowledge.items())},
        },
    )
    results, traces = run_pipeline(dataset, bundle, templates,
                                   parallelism=cfg.parallelism,
                                   image_root=cfg.dataset.parent,
                                   crop_pad=cfg.crop_pad)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(results, out / "predictions.jsonl")
    trace_dir = out / "traces"
    trace_dir.mkdir(exist_ok=True)
    for t in traces:
        name = t.diagram_id or "text_only"
        (trace_dir / f"{name}.json").write_text(
            json.dumps(t.to_json(), indent=2) + "\n", encoding="utf-8")
    (out / "config.json").write_text(Path(config_path).read_text(encoding="utf-8"),
                                     encoding="utf-8")

    errors = sum(1 for r in results if r.error)
    warnings = sum(len(e.warnings) for t in traces for e in t.entries)
    print(f"wrote {len(results)} results to {out / 'predictions.jsonl'} "
          f"({errors} error record(s), {warnings} warning(s))")
    return EXIT_OK


def score_predictions(results: Sequence[RecognitionResult], dataset: AnnotationFile,
                      iou_threshold: float = 0.5, require_name: bool = True,
                      ) -> tuple[list[ScoreRow], ScoreCard, list[str]]:
    """Per-diagram cards plus the aggregate card (subscores averaged,
    Task-2 computed globally over all QA items)."""
    warnings: list[str] = []
    by_id: dict[str, RecognitionResult] = {}
    answers: list[tuple[str, str]] = []
    known = dataset.diagram_ids()
    for r in results:
        if r.diagram_id and r.diagram_id not in known:
            warnings.append(f"prediction for unknown diagram {r.diagram_id!r} skipped")
            continue
        if r.diagram_id:
            by_id[r.diagram_id] = r
        answers.extend(r.answers)

    task2 = task2_score(answers, dataset.qa)
    rows: list[ScoreRow] = []
    cards: list[ScoreCard] = []
    for d in dataset.diagrams:
        r = by_id.get(d.id)
        if r is None:
            warnings.append(f"no prediction for diagram {d.id!r}; scored as empty")
            r = RecognitionResult(diagram_id=d.id)
        m = match_components(r.components, d.components,
                             iou_threshold=iou_threshold, require_name=require_name)
        qa_items = [q for q in dataset.qa if q.diagram_id == d.id]
        card = score_card(
            s1_f1(m, len(r.components), len(d.components)),
            s2_f1(r.edges, d.edges, m),
            s3_f1(r.edges, d.edges, m),
            task2_score([a for a in r.answers if a[0] in {q.id for q in qa_items}], qa_items),
        )
        cards.append(card)
        rows.append(ScoreRow(method="run", card=card, diagram_id=d.id))
    aggregate = mean_scorecards(cards, task2=task2) if cards else score_card(0, 0, 0, task2)
    return rows, aggregate, warnings


def cmd_score(predictions: str, dataset_path: str, fmt: str = "json",
              out: str | None = None, iou_threshold: float = 0.5,
              require_name: bool = True) -> int:
    try:
        dataset = _load_validated_dataset(dataset_path)
        results = read_predictions(predictions)
    except DatasetInvalid as exc:
        print(f"error: {exc}; run 'sysdiag validate' for details", file=sys.stderr)
        return EXIT_PROBLEMS
    except (OSError, json.JSONDecodeError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not results:
        print("warning: empty predictions; all scores are zero", file=sys.stderr)
    rows, aggregate, warnings = score_predictions(results, dataset,
                                                  iou_threshold, require_name)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    report = emit_report([ScoreRow(method="run", card=aggregate, diagram_id=AGGREGATE),
                          *rows], fmt=fmt)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(report, encoding="utf-8")
    else:
        print(report, end="")
    return EXIT_OK


def reward_predictions(results: Sequence[RecognitionResult], dataset: AnnotationFile,
                       weights: rewards.RewardWeights,
                       iou_threshold: float = 0.5,
                       ) -> list[rewards.RewardBreakdown]:
    """Audit a prediction log: one breakdown per prediction record.

    Per-task accuracy over a whole diagram: listing reward over the name
    sequences, localization as the mean matched IoU over
    max(n_pred, n_gt), connection reward averaged over ground-truth
    components (through the component match), QA as the exact-match
    fraction. Format rewards re-parse the raw replies when the log
    carries them; a missing raw section counts as format-valid iff the
    structured field is non-empty.
    """
    by_id = {d.id: d for d in dataset.diagrams}
    qa_by_id = {q.id: q for q in dataset.qa}
    out = []
    for r in results:
        tasks: dict[str, rewards.TaskReward] = {}
        raw = r.raw or {}
        diagram = by_id.get(r.diagram_id) if r.diagram_id else None
        if diagram is not None:
            # Listing: predicted names in index order vs ground truth.
            pred_names = [c.name for c in sorted(r.components, key=lambda c: c.index)]
            gt_names = [c.name for c in sorted(diagram.components, key=lambda c: c.index)]
            raw_list = raw.get("list")
            if raw_list is not None:
                fmt_list = rewards.reward_format(raw_list, "list")
            elif raw.get("name") is not None:
                fmt_list = int(all(v.strip() for v in raw["name"].values()))
            else:
                fmt_list = int(bool(pred_names))
            tasks["list"] = rewards.TaskReward(
                r_fmt=fmt_list, r_acc=rewards.reward_list(pred_names, gt_names, weights))

            # Localization: matched IoU mass over max(n_pred, n_gt).
            m = match_components(r.components, diagram.components,
                                 iou_threshold=0.0, require_name=False)
            denom = max(len(r.components), len(diagram.components), 1)
            loc_acc = sum(v for _, _, v in m.pairs) / denom
            tasks["loc"] = rewards.TaskReward(r_fmt=int(bool(r.components)), r_acc=loc_acc)

            # Connection: per ground-truth component through the S1 match.
            m_named = match_components(r.components, diagram.components,
                                       iou_threshold=iou_threshold, require_name=True)
            to_pred = {gi: pi for pi, gi, _ in m_named.pairs}
            to_gt = {pi: gi for pi, gi, _ in m_named.pairs}
            pred_targets: dict[int, set[int]] = {}
            for e in r.edges:
                pred_targets.setdefault(e.src, set()).add(e.dst)
            gt_targets: dict[int, set[int]] = {}
            for e in diagram.edges:
                gt_targets.setdefault(e.src, set()).add(e.dst)
            conn_scores = []
            raw_conn = raw.get("conn") or {}
            conn_fmt = 1
            for c in diagram.components:
                g = gt_targets.get(c.index, set())
                pi = to_pred.get(c.index)
                p_mapped: set[int] = set()
                if pi is not None:
                    for t in pred_targets.get(pi, set()):
                        if t in to_gt:
                            p_mapped.add(to_gt[t])
                conn_scores.append(rewards.reward_conn(p_mapped, g, weights))
            for key, text in raw_conn.items():
                if rewards.reward_format(text, "conn", vocabulary=r.components,
                                         source_index=int(key)) == 0:
                    conn_fmt = 0
            if not raw_conn and not r.edges and diagram.edges:
                conn_fmt = 0
            tasks["conn"] = rewards.TaskReward(
                r_fmt=conn_fmt,
                r_acc=sum(conn_scores) / len(conn_scores) if conn_scores else 1.0)

        # QA over the items this record answered.
        answered = [(qa_id, label) for qa_id, label in r.answers if qa_id in qa_by_id]
        if answered:
            raw_qa = raw.get("qa") or {}
            qa_fmt = 1
            acc = 0.0
            for qa_id, label in answered:
                item = qa_by_id[qa_id]
                acc += rewards.reward_qa(label, item.answer)
                text = raw_qa.get(qa_id)
                if text is not None and rewards.reward_format(
                        text, "qa", options=item.options) == 0:
                    qa_fmt = 0
            tasks["qa"] = rewards.TaskReward(r_fmt=qa_fmt, r_acc=acc / len(answered))

        sample_id = r.diagram_id or "text_only"
        out.append(rewards.breakdown(sample_id, tasks, weights))
    return out


def cmd_reward(predictions: str, dataset_path: str, config_path: str | None = None,
               out: str | None = None) -> int:
    try:
        dataset = _load_validated_dataset(dataset_path)
        results = read_predictions(predictions)
        weights = rewards.RewardWeights()
        iou_threshold = 0.5
        if config_path:
            cfg = load_run_config(config_path)
            weights = cfg.reward_weights
            iou_threshold = cfg.iou_threshold
    except DatasetInvalid as exc:
        print(f"error: {exc}; run 'sysdiag validate' for details", file=sys.stderr)
        return EXIT_PROBLEMS
    except (OSError, json.JSONDecodeError, SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    breakdowns = reward_predictions(results, dataset, weights, iou_threshold)
    lines = []
    for b in breakdowns:
        rec = {"sample_id": b.sample_id,
               "tasks": {t: {"r_fmt": r.r_fmt, "r_acc": r.r_acc}
                         for t, r in sorted(b.tasks.items())},
               "total": b.total}
        lines.append(json.dumps(rec))
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_select_hard(run_logs: Sequence[str], dataset_path: str,
                    quota: int | None = None, weight_instability: float = 0.5,
                    score_field: str = "task1", success_threshold: float = 0.5,
                    k: int = 2, out: str | None = None) -> int:
    if len(run_logs) < 2:
        print("error: >=2 runs required to estimate instability", file=sys.stderr)
        return EXIT_USAGE
    try:
        dataset = _load_validated_dataset(dataset_path)
        runs = [read_predictions(p) for p in run_logs]
    except DatasetInvalid as exc:
        print(f"error: {exc}; run 'sysdiag validate' for details", file=sys.stderr)
        return EXIT_PROBLEMS
    except (OSError, json.JSONDecodeError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if score_field not in ("s1", "s2", "s3", "task1"):
        print(f"error: unknown score field {score_field!r}", file=sys.stderr)
        return EXIT_USAGE

    per_run_scores: dict[str, list[float]] = {d.id: [] for d in dataset.diagrams}
    for results in runs:
        rows, _, _ = score_predictions(results, dataset)
        by_id = {row.diagram_id: row.card for row in rows}
        for did in per_run_scores:
            card = by_id.get(did)
            per_run_scores[did].append(getattr(card, score_field) if card else 0.0)

    stats = hardsample.build_sample_stats(
        per_run_scores, {d.id: d for d in dataset.diagrams},
        success_threshold=success_threshold, k=k)
    try:
        ranked = hardsample.select_hard(stats, weight_instability=weight_instability,
                                        quota=quota)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(hardsample.manifest_json(ranked), indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sysdiag",
                                     description="System-level diagram recognition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an annotation or detections file")
    p.add_argument("dataset")

    p = sub.add_parser("run", help="run the recognition pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("score", help="score a prediction log against annotations")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("--out", default=None)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--no-require-name", action="store_true")

    p = sub.add_parser("reward", help="emit per-sample reward breakdowns")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("select-hard", help="rank samples by hardness over repeated runs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--quota", type=int, default=None)
    p.add_argument("--weight-instability", type=float, default=0.5)
    p.add_argument("--score-field", default="task1")
    p.add_argument("--success-threshold", type=float, default=0.5)
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--out", default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        if args.command == "validate":
            return cmd_validate(args.dataset)
        if args.command == "run":
            return cmd_run(args.config, out_dir=args.out, parallelism=args.parallelism,
                           cache_dir=args.cache_dir)
        if args.command == "score":
            return cmd_score(args.predictions, args.dataset, fmt=args.format,
                             out=args.out, iou_threshold=args.iou_threshold,
                             require_name=not args.no_require_name)
        if args.command == "reward":
            return cmd_reward(args.predictions, args.dataset,
                              config_path=args.config, out=args.out)
        if args.command == "select-hard":
            return cmd_select_hard(args.runs, args.dataset, quota=args.quota,
                                   weight_instability=args.weight_instability,
                                   score_field=args.score_field,
                                   success_threshold=args.success_threshold,
                                   k=args.k, out=args.out)
    except ScriptMiss as exc:
        print(f"scripted client miss: {exc}", file=sys.stderr)
        return EXIT_PROBLEMS
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
