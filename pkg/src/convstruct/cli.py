"""Command-line entry point for reproducible batch runs.

Commands: validate, evaluate, agree, baseline, analyze {threads|roles|logodds|
correlate}. Every report embeds a run manifest with input digests; identical
inputs, flags, and seed produce byte-identical output. Exit codes: 0 success,
1 domain error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agreement import AgreementError, AnnotatorBatch, pairwise_agreement
from .baseline import (
    parse_face_tracks_json,
    parse_word_tokens_tsv,
    run_baseline,
    run_reply_only_baseline,
)
from .corpus import (
    BAD_NAME,
    BAD_TYPE,
    ERROR,
    MISSING_KEY,
    UNKNOWN_KEY,
    WARNING,
    Clip,
    CorpusError,
    Diagnostic,
    ParseError,
    iter_clip_files,
    load_corpus,
    load_structures,
    lookup_gender,
    parse_annotation_json,
    parse_cast_json,
    parse_gender_map_tsv,
    parse_transcript_tsv,
    scan_annotation_json,
    serialize_annotation_json,
    validate_clip,
)
from .metrics import METRIC_FIELDS, EvalConfig, MetricInputError, evaluate_corpus
from .stats import (
    BootstrapConfig,
    Document,
    TermCounts,
    gender_thread_shares,
    multinomial_logit,
    role_distributions,
    signed_rank_variance,
    spearman,
    weighted_logodds_analysis,
)
from .stats.bootstrap import StatsError

METRIC_LABELS = {
    "speaker_acc": "Speaker (Acc.)",
    "addressee_f1": "Addressees (Set F1)",
    "side_participant_f1": "Side-part. (Set F1)",
    "link_f1": "Linking (F1)",
    "nvi_score": "1-NVI",
    "one_to_one": "1-1",
    "exact_match_f1": "EM F1",
}

_SCAN_ONLY_CODES = (MISSING_KEY, BAD_TYPE, BAD_NAME, UNKNOWN_KEY)


def _digest_path(path: Path) -> str:
    if path.is_file():
        return hashlib.sha256(path.read_bytes()).hexdigest()
    digest = hashlib.sha256()
    for child in sorted(path.rglob("*")):
        if child.is_file():
            rel = child.relative_to(path).as_posix()
            digest.update(rel.encode("utf-8"))
            digest.update(b"\0")
            digest.update(hashlib.sha256(child.read_bytes()).digest())
    return digest.hexdigest()


def _manifest(command: str, inputs: dict[str, str], config: dict,
              seed: int = 0) -> dict:
    digests = {}
    for name, raw in inputs.items():
        path = Path(raw)
        digests[name] = _digest_path(path) if path.exists() else None
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "inputs": inputs,
        "digests": digests,
        "config": config,
    }


def _jsonify(value):
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    return value


def _emit(payload: dict, fmt: str, table_lines: list[str] | None = None) -> None:
    if fmt == "table" and table_lines is not None:
        sys.stdout.write("\n".join(table_lines) + "\n")
    else:
        sys.stdout.write(json.dumps(_jsonify(payload), indent=2) + "\n")


def _metric_table(report_dict: dict) -> list[str]:
    lines = [f"{'metric':<22}{'score':>8}  ci95"]
    ci = report_dict.get("ci", {})
    for name in METRIC_FIELDS:
        bounds = ci.get(name)
        span = f"[{bounds[0]:.2f}, {bounds[1]:.2f}]" if bounds else ""
        lines.append(f"{METRIC_LABELS[name]:<22}{report_dict[name]:>8.2f}  {span}")
    lines.append(
        f"n_utterances={report_dict['n_utterances']} n_clips={report_dict['n_clips']}"
    )
    return lines


def _bootstrap_config(args) -> BootstrapConfig | None:
    if not args.bootstrap:
        return None
    return BootstrapConfig(resamples=args.bootstrap, level=args.level, seed=args.seed)


def _eval_config(args) -> EvalConfig:
    return EvalConfig(
        aggregate=args.aggregate,
        filter_nondialogic=args.filter_nondialogic,
        bootstrap=_bootstrap_config(args),
    )


# --- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    all_diags: list[Diagnostic] = []
    for raw in args.paths:
        root = Path(raw)
        if not root.exists():
            sys.stderr.write(f"error: no such path: {root}\n")
            return 2
        for clip_id, clip, scan_diags in _scan_path(root, args.strict):
            all_diags.extend(d for d in scan_diags if d.code in _SCAN_ONLY_CODES)
            if clip is not None:
                all_diags.extend(validate_clip(clip))
    all_diags.sort(key=lambda d: (d.clip_id, d.line_idx or 0, d.code))
    for diag in all_diags:
        sys.stdout.write(json.dumps(diag.as_dict()) + "\n")
    has_error = any(
        d.severity == ERROR or (args.strict and d.severity == WARNING)
        for d in all_diags
    )
    return 1 if has_error else 0


def _scan_path(root: Path, strict: bool):
    """Yield (clip_id, clip_or_none, scan_diagnostics) for validation."""
    for files in iter_clip_files(root):
        diags: list[Diagnostic] = []
        records = None
        utterances = ()
        show_id, cast = "", ()
        try:
            if files.annotation is not None:
                parsed, diags = scan_annotation_json(
                    files.annotation.read_bytes(), strict, files.clip_id)
                records = tuple(parsed)
            if files.transcript is not None:
                utterances = tuple(parse_transcript_tsv(
                    files.transcript.read_bytes(), clip_id=files.clip_id))
            if files.cast is not None:
                _, show_id, cast_list = parse_cast_json(files.cast.read_bytes())
                cast = tuple(cast_list)
        except ParseError as exc:
            diags = list(diags) + [Diagnostic("PARSE", ERROR, str(exc), files.clip_id)]
            yield files.clip_id, None, diags
            continue
        yield files.clip_id, Clip(clip_id=files.clip_id, show_id=show_id, cast=cast,
                                  utterances=utterances, gold=records), diags


def cmd_evaluate(args) -> int:
    gold = load_structures(args.gold, strict=args.strict)
    pred = load_structures(args.pred, strict=args.strict)
    config = _eval_config(args)
    report = evaluate_corpus(gold, pred, config)
    manifest = _manifest(
        "evaluate",
        {"gold": args.gold, "pred": args.pred},
        {
            "aggregate": args.aggregate,
            "filter_nondialogic": args.filter_nondialogic,
            "bootstrap": args.bootstrap,
            "level": args.level,
            "strict": args.strict,
        },
        seed=args.seed,
    )
    payload = {"manifest": manifest, "report": report.as_dict()}
    _emit(payload, args.format, _metric_table(report.as_dict()))
    return 0


def _load_annotator_file(path: Path) -> dict[str, list]:
    payload = json.loads(path.read_bytes().decode("utf-8"))
    if isinstance(payload, list):
        clip_id = path.stem
        return {clip_id: parse_annotation_json(
            json.dumps(payload).encode("utf-8"), clip_id=clip_id)}
    if isinstance(payload, dict):
        return {
            clip_id: parse_annotation_json(
                json.dumps(records).encode("utf-8"), clip_id=clip_id)
            for clip_id, records in sorted(payload.items())
        }
    raise ParseError(f"annotator file {path} must be a JSON array or object")


def cmd_agree(args) -> int:
    manifest_path = Path(args.manifest)
    spec = json.loads(manifest_path.read_bytes().decode("utf-8"))
    table = spec.get("annotators", spec)
    if not isinstance(table, dict) or not table:
        raise ParseError("agreement manifest must map annotator_id to file path")
    batches = []
    for annotator_id, rel in sorted(table.items()):
        path = Path(rel)
        if not path.is_absolute():
            path = manifest_path.parent / path
        batches.append(AnnotatorBatch(
            annotator_id=annotator_id,
            records_by_clip=_load_annotator_file(path),
        ))
    report = pairwise_agreement(batches, _eval_config(args))
    manifest = _manifest(
        "agree",
        {"manifest": args.manifest},
        {"aggregate": args.aggregate,
         "filter_nondialogic": args.filter_nondialogic},
        seed=args.seed,
    )
    payload = {"manifest": manifest, "report": report.as_dict()}
    table_lines = ["overall:"] + _metric_table(report.overall.as_dict())
    for pair, pair_report in sorted(report.per_pair.items()):
        table_lines.append(f"pair {pair[0]} x {pair[1]}:")
        table_lines.extend(_metric_table(pair_report.as_dict()))
    _emit(payload, args.format, table_lines)
    return 0


def _side_files(base: str | None, clip_id: str, suffix: str) -> Path | None:
    if base is None:
        return None
    root = Path(base)
    if root.is_file():
        return root
    candidate = root / f"{clip_id}{suffix}"
    return candidate if candidate.exists() else None


def cmd_baseline(args) -> int:
    corpus = load_corpus(args.corpus, strict=args.strict)
    if not corpus:
        raise CorpusError(f"no clips found under {args.corpus}")
    if args.mode == "full" and not args.faces:
        raise CorpusError("--mode full requires --faces (and usually --words)")
    out_root = Path(args.out)
    single_file = out_root.suffix == ".json" and len(corpus) == 1
    if not single_file:
        out_root.mkdir(parents=True, exist_ok=True)

    written = []
    for clip_id in sorted(corpus):
        clip = corpus[clip_id]
        if not clip.utterances:
            raise CorpusError(f"clip {clip_id!r} has no transcript; baseline needs one")
        if args.mode == "reply-only":
            records = run_reply_only_baseline(clip)
        else:
            faces_path = _side_files(args.faces, clip_id, ".faces.json")
            if faces_path is None:
                raise CorpusError(f"no face tracks for clip {clip_id!r}")
            tracks = parse_face_tracks_json(faces_path.read_bytes())
            words_path = _side_files(args.words, clip_id, ".words.tsv")
            words = (parse_word_tokens_tsv(words_path.read_bytes())
                     if words_path else [])
            records = run_baseline(clip, tracks, words)
        blob = serialize_annotation_json(records)
        target = out_root if single_file else out_root / f"{clip_id}.annotation.json"
        target.write_bytes(blob)
        written.append(str(target))

    manifest = _manifest(
        "baseline",
        {"corpus": args.corpus, **({"faces": args.faces} if args.faces else {}),
         **({"words": args.words} if args.words else {})},
        {"mode": args.mode},
        seed=args.seed,
    )
    payload = {"manifest": manifest, "written": written}
    _emit(payload, args.format, ["written:"] + [f"  {w}" for w in written])
    return 0


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise CorpusError(f"missing required input: {what}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _analyze_threads(args, manifest_inputs) -> dict:
    corpus = load_corpus(args.corpus)
    gender_path = _require(args.gender_map, "--gender-map")
    gender_map = parse_gender_map_tsv(gender_path.read_bytes())
    report = gender_thread_shares(
        [corpus[c] for c in sorted(corpus)],
        gender_map,
        include_nondialogic=args.include_nondialogic,
        config=BootstrapConfig(resamples=args.bootstrap or 10_000,
                               level=args.level, seed=args.seed),
        permutations=args.permutations,
    )
    manifest_inputs["gender_map"] = args.gender_map

    def share_dict(s):
        return {"female_share": s.share, "ci": list(s.ci), "n_events": s.n_events}

    def delta_dict(d):
        return {
            "mean": d.mean,
            "ci": list(d.ci),
            "p_value": d.p_value,
            "n_clips": d.n_clips,
            "per_clip": {k: d.per_clip[k] for k in sorted(d.per_clip)},
        }

    return {
        "start": share_dict(report.start),
        "hold": share_dict(report.hold),
        "delta_start": delta_dict(report.delta_start),
        "delta_hold": delta_dict(report.delta_hold),
    }


def _role_observations(corpus, gender_map):
    observations = []
    for clip_id in sorted(corpus):
        clip = corpus[clip_id]
        if clip.gold is None:
            continue
        for record in sorted(clip.gold, key=lambda r: r.line_idx):
            members = [("speaker", record.speaker)]
            members += [("addressee", p) for p in sorted(
                record.addressees, key=lambda p: p.token)]
            members += [("side-participant", p) for p in sorted(
                record.side_participants, key=lambda p: p.token)]
            for role, participant in members:
                gender = lookup_gender(gender_map, clip.show_id, participant)
                if gender is not None:
                    observations.append((role, gender, clip.show_id))
    return observations


def _analyze_roles(args, manifest_inputs) -> dict:
    corpus = load_corpus(args.corpus)
    gender_path = _require(args.gender_map, "--gender-map")
    gender_map = parse_gender_map_tsv(gender_path.read_bytes())
    manifest_inputs["gender_map"] = args.gender_map
    observations = _role_observations(corpus, gender_map)
    if not observations:
        raise StatsError("no gendered role observations in the corpus")
    dists = role_distributions((role, gender) for role, gender, _ in observations)
    fit = multinomial_logit(
        [(role, gender == "female", show) for role, gender, show in observations]
    )
    regression = {}
    for outcome in sorted(fit.outcomes):
        est = fit.outcomes[outcome]
        regression[outcome] = {
            "odds_ratio_female": est.odds_ratio,
            "coef": {k: est.coef[k] for k in sorted(est.coef)},
            "se": {k: est.se[k] for k in sorted(est.se)},
            "p": {k: est.p[k] for k in sorted(est.p)},
        }
    return {
        "n_observations": len(observations),
        "p_gender_given_role": dists.p_gender_given_role,
        "p_role_given_gender": dists.p_role_given_gender,
        "regression": {
            "reference": fit.reference,
            "outcomes": regression,
            "log_likelihood": fit.log_likelihood,
            "n_iter": fit.n_iter,
        },
    }


def _analyze_logodds(args, manifest_inputs) -> dict:
    from .stats.logodds import tokenize

    corpus = load_corpus(args.corpus)
    docs = []
    for clip_id in sorted(corpus):
        clip = corpus[clip_id]
        if clip.gold is None or not clip.utterances:
            continue
        records = {r.line_idx: r for r in clip.gold}
        for u in sorted(clip.utterances, key=lambda u: u.line_idx):
            record = records.get(u.line_idx)
            if record is None:
                continue
            if args.filter_nondialogic and record.is_nondialogic:
                continue
            group = "a" if not record.side_participants else "b"
            docs.append(Document(show_id=clip.show_id, group=group,
                                 tokens=tuple(tokenize(u.text))))
    if not docs:
        raise StatsError("no documents with both annotations and transcript text")
    counts = TermCounts.from_documents(docs, min_count=args.min_count)
    grid = ([float(c) for c in args.grid.split(",")] if args.grid
            else [float(c) for c in np.logspace(0, 4, 9)])
    result = weighted_logodds_analysis(
        counts,
        c_star=args.c_star,
        grid=grid,
        permutations=args.permutations,
        seed=args.seed,
    )
    ranked = result.ranked_terms()
    return {
        "groups": {"a": "no side-participants (positive z)",
                   "b": "side-participants present (negative z)"},
        "c_star": result.c_star,
        "calibration": {
            "skipped": args.c_star is not None,
            "grid": grid,
            "permutations": args.permutations,
            "permutation_unit": "document (one utterance's token bag), within show",
            "seed": args.seed,
        },
        "n_documents": len(docs),
        "n_terms": len(result.terms),
        "shows": list(result.shows),
        "top_group_a": [[t, z] for t, z in ranked[: args.top]],
        "top_group_b": [[t, z] for t, z in ranked[-args.top:][::-1]],
        "z": {t: z for t, z in sorted(ranked)},
    }


def _analyze_correlate(args, manifest_inputs) -> dict:
    features_path = _require(args.features, "features CSV")
    with features_path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        raise StatsError("features CSV has no data rows")
    columns = list(rows[0].keys())
    targets = [c for c in columns if c.startswith("f1_")]
    features = [c for c in columns if c != "clip_id" and not c.startswith("f1_")]
    if not targets or not features:
        raise StatsError("features CSV needs feature columns and f1_* target columns")
    def column(name):
        values = []
        for i, row in enumerate(rows, start=1):
            cell = row.get(name)
            if cell is None or cell == "":
                raise StatsError(f"features CSV row {i} is missing column {name!r}")
            try:
                values.append(float(cell))
            except ValueError:
                raise StatsError(
                    f"features CSV row {i}: column {name!r} is not numeric: {cell!r}"
                ) from None
        return values

    results = []
    for target in targets:
        for feature in features:
            entry = {"target": target, "feature": feature}
            try:
                rho, p = spearman(column(feature), column(target))
                entry.update({
                    "rho": rho,
                    "p_value": p,
                    "signed_r2": signed_rank_variance(rho),
                    "significant": p < 0.05,
                })
            except StatsError as exc:
                entry["error"] = str(exc)
            results.append(entry)
    return {"n_clips": len(rows), "correlations": results}


_ANALYZE_HANDLERS = {
    "threads": _analyze_threads,
    "roles": _analyze_roles,
    "logodds": _analyze_logodds,
    "correlate": _analyze_correlate,
}


def cmd_analyze(args) -> int:
    handler = _ANALYZE_HANDLERS[args.what]
    inputs = {}
    if getattr(args, "corpus", None):
        inputs["corpus"] = args.corpus
    if getattr(args, "features", None):
        inputs["features"] = args.features
    report = handler(args, inputs)
    manifest = _manifest(
        f"analyze {args.what}", inputs,
        {"filter_nondialogic": args.filter_nondialogic}, seed=args.seed)
    payload = {"manifest": manifest, "report": report}
    table_lines = _flatten_table(report)
    _emit(payload, args.format, table_lines)
    return 0


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _flatten_table(report: dict, prefix: str = "") -> list[str]:
    lines = []
    for key, value in report.items():
        label = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.append(f"{label}:")
            lines.extend(_flatten_table(value, prefix + "  "))
        elif isinstance(value, list) and value and all(
                isinstance(v, dict) for v in value):
            lines.append(f"{label}:")
            columns = list(value[0].keys())
            widths = {
                c: max(len(c), *(len(_format_cell(row.get(c, ""))) for row in value))
                for c in columns
            }
            lines.append(prefix + "  " + "  ".join(c.ljust(widths[c]) for c in columns))
            for row in value:
                lines.append(prefix + "  " + "  ".join(
                    _format_cell(row.get(c, "")).ljust(widths[c]) for c in columns))
        elif isinstance(value, list):
            rendered = ", ".join(_format_cell(_jsonify(v)) for v in value)
            lines.append(f"{label:<32} [{rendered}]")
        elif isinstance(value, float):
            lines.append(f"{label:<32} {value:>12.4f}")
        else:
            lines.append(f"{label:<32} {value}")
    return lines


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--aggregate", choices=("micro", "macro"), default="micro",
                        help="role-metric aggregation granularity")
    common.add_argument("--bootstrap", type=int, default=0, metavar="N",
                        help="bootstrap resamples for CIs (0 = off)")
    common.add_argument("--level", type=float, default=0.95,
                        help="confidence level for intervals")
    common.add_argument("--filter-nondialogic", action="store_true",
                        help="drop extra-diegetic/monologue lines from scoring")
    common.add_argument("--strict", action="store_true",
                        help="escalate warnings to errors; reject unknown keys")
    common.add_argument("--format", choices=("json", "table"), default="json")

    parser = argparse.ArgumentParser(
        prog="convstruct",
        description="Multi-party conversation structure toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common],
                       help="validate corpus files, emit JSON-lines diagnostics")
    p.add_argument("paths", nargs="+")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score predictions against gold")
    p.add_argument("gold")
    p.add_argument("pred")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("agree", parents=[common],
                       help="pairwise inter-annotator agreement")
    p.add_argument("manifest", help="JSON mapping annotator_id to annotation file")
    p.set_defaults(handler=cmd_agree)

    p = sub.add_parser("baseline", parents=[common], help="run the heuristic baseline")
    p.add_argument("corpus")
    p.add_argument("--mode", choices=("full", "reply-only"), required=True)
    p.add_argument("--faces", help="face track JSON file or directory")
    p.add_argument("--words", help="word token TSV file or directory")
    p.add_argument("--out", required=True, help="output file or directory")
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser("analyze", parents=[common], help="statistical analyses")
    p.add_argument("what", choices=sorted(_ANALYZE_HANDLERS))
    p.add_argument("corpus", nargs="?", help="corpus directory (threads/roles/logodds)")
    p.add_argument("--gender-map", help="participant metadata TSV")
    p.add_argument("--features", help="clip-level feature CSV (correlate)")
    p.add_argument("--permutations", type=int, default=1000,
                   help="permutation count for tests/calibration")
    p.add_argument("--grid", help="comma-separated prior-strength candidates")
    p.add_argument("--c-star", type=float, help="fix the prior strength, skip calibration")
    p.add_argument("--min-count", type=int, default=5,
                   help="minimum pooled term count for log-odds")
    p.add_argument("--top", type=int, default=10, help="terms listed per direction")
    p.add_argument("--include-nondialogic", action="store_true",
                   help="keep extra-diegetic/monologue lines in thread events")
    p.set_defaults(handler=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze" and args.what != "correlate" and not args.corpus:
        sys.stderr.write(f"error: analyze {args.what} requires a corpus path\n")
        return 1
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (CorpusError, MetricInputError, StatsError, AgreementError,
            json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
