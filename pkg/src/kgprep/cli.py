"""kgprep command line: the corpus pipeline as composable subcommands.

Stages exchange plain files (TSV for triples, JSONL elsewhere) so any
orchestrator can wire them together:

    ingest      validate/canonicalize a triple dump
    stats       corpus counts as JSON
    match-kelm  find entity spans in triple-aligned sentences
    mask        triples or matched sentences -> masked training examples
    mix         block-exact weighted interleave of record files
    match-qa    keep QA items answerable from the graph, with witnesses
    split       cut the tail fraction off a record file (dev split)
    score       exact-match scoring of predictions
    delta       EM difference tables between two models
    selftest    built-in fixed-point checks

Every subcommand accepts --seed/--parallelism/--strict/--config/--report;
flags override config-file values (TOML or JSON; KGPREP_CONFIG names a
default config path).  Outputs are written via rename so a failed run
leaves nothing behind, and are byte-identical for identical inputs and
seed regardless of --parallelism.  Exit codes: 0 success, 1 configuration
error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import sys
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Iterator

from kgprep import jsonl, masker, matcher
from kgprep.errors import RecordError
from kgprep.evaluation import (
    EMResult,
    delta_report,
    parse_prediction_record,
    score,
)
from kgprep.kg_store import (
    ParseSummary,
    Triple,
    build_index,
    read_triples_file,
    stats,
    to_tsv_line,
)
from kgprep.masker import MaskPolicy
from kgprep.mixer import MixReport, MixSpec, TrainConfig, epochs, mix
from kgprep.qa_align import (
    FilterReport,
    is_matched,
    matched_item_to_obj,
    parse_qa_record,
    split_tail,
)

_BATCH = 1024


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--parallelism", type=int, help="worker processes (default 1)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="abort on the first malformed record")
    common.add_argument("--config", help="TOML or JSON config file (flags win)")
    common.add_argument("--report", help="also write the run report JSON here")

    parser = _Parser(prog="kgprep", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common],
                       help="validate a TSV triple dump, write canonical TSV")
    p.add_argument("--triples", help="input TSV (subject<TAB>relation<TAB>object)")
    p.add_argument("-o", "--out", help="output TSV path")
    p.add_argument("--dedupe", action="store_true", default=None,
                   help="drop exact duplicate triples")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="corpus counts as JSON")
    p.add_argument("--triples")
    p.add_argument("-o", "--out", help="optional path for the stats JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("match-kelm", parents=[common],
                       help="find entity spans in triple-aligned sentences")
    p.add_argument("--kelm", help='input JSONL: {"sentence", "triples"}')
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_match_kelm)

    p = sub.add_parser("mask", parents=[common],
                       help="make masked training examples from triples or matched sentences")
    p.add_argument("--triples", help="TSV input (triple mode)")
    p.add_argument("--matched", help="match-kelm output (sentence mode)")
    p.add_argument("--role", choices=masker.ROLE_CHOICES, help="which entity to mask")
    p.add_argument("--sentinel", help='mask placeholder (default "[MASK]")')
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("mix", parents=[common],
                       help="block-exact weighted interleave of record files")
    p.add_argument("--source", action="append", metavar="NAME=PATH:WEIGHT",
                   help="repeatable; weights must sum to 1")
    p.add_argument("--block", type=int, help="ratio granularity (default 2)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("match-qa", parents=[common],
                       help="keep QA items answerable from the graph")
    p.add_argument("--qa", help='input JSONL: {"id", "question", "answers"}')
    p.add_argument("--triples", help="TSV triple dump backing the check")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_match_qa)

    p = sub.add_parser("split", parents=[common],
                       help="cut the last fraction of a record file into a second file")
    p.add_argument("-i", "--input")
    p.add_argument("--fraction", help="tail share, strictly between 0 and 1")
    p.add_argument("--head", help="output path for the leading part")
    p.add_argument("--tail", help="output path for the trailing part")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("score", parents=[common], help="exact-match score predictions")
    p.add_argument("--preds", help='input JSONL: {"id", "prediction"}')
    p.add_argument("--items", help='gold JSONL: {"id", "question", "answers"}')
    p.add_argument("--task")
    p.add_argument("--split", choices=("dev", "test"))
    p.add_argument("--model")
    p.add_argument("--em-strict", action="store_true", default=None,
                   help="byte equality instead of normalized comparison")
    p.add_argument("--append", action="store_true", default=None,
                   help="append to an existing results file")
    p.add_argument("-o", "--out", help="results JSON (a list of score entries)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("delta", parents=[common],
                       help="EM difference table between two models")
    p.add_argument("--results", help="results JSON produced by score")
    p.add_argument("--baseline")
    p.add_argument("--treatment")
    p.add_argument("-o", "--out", help="output CSV")
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("selftest", parents=[common], help="built-in fixed-point checks")
    p.set_defaults(func=cmd_selftest)

    return parser


# ---------------------------------------------------------------- config


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValueError(f"config file not found: {path}")
    raw = p.read_bytes()
    if p.suffix == ".toml":
        try:
            import tomllib  # noqa: PLC0415
        except ImportError:
            import tomli as tomllib  # noqa: PLC0415
        try:
            cfg = tomllib.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ValueError(f"malformed config {path}: {exc}") from None
    else:
        try:
            cfg = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValueError(f"malformed config {path}: top level must be a table/object")
    return cfg


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the per-command config section, then from
    config globals, then hard defaults."""
    cfg_path = args.config or os.environ.get("KGPREP_CONFIG")
    cfg = _load_config(cfg_path) if cfg_path else {}
    section = cfg.get(args.command, {})
    if not isinstance(section, dict):
        raise ValueError(f"config section {args.command!r} must be a table/object")
    for dest, value in vars(args).items():
        if value is not None or dest in ("func", "command", "config"):
            continue
        if dest in section:
            setattr(args, dest, section[dest])
        elif dest in cfg and not isinstance(cfg[dest], dict):
            setattr(args, dest, cfg[dest])
    if args.seed is None:
        args.seed = 0
    if args.parallelism is None:
        args.parallelism = 1
    if args.strict is None:
        args.strict = False
    if not isinstance(args.seed, int) or isinstance(args.seed, bool):
        raise ValueError(f"seed must be an integer, got {args.seed!r}")
    if not isinstance(args.parallelism, int) or args.parallelism < 1:
        raise ValueError(f"parallelism must be a positive integer, got {args.parallelism!r}")
    if not isinstance(args.strict, bool):
        raise ValueError(f"strict must be a boolean, got {args.strict!r}")


def _require(value, flag: str):
    if value in (None, ""):
        raise ValueError(f"{flag} is required (flag or config)")
    return value


def _require_file(value, flag: str) -> str:
    path = _require(value, flag)
    if not Path(path).is_file():
        raise ValueError(f"input file not found: {path}")
    return path


# ----------------------------------------------------------- parallel map


def _batched(pairs: Iterable[tuple[int, bytes]], size: int) -> Iterator[list[tuple[int, bytes]]]:
    batch: list[tuple[int, bytes]] = []
    for pair in pairs:
        batch.append(pair)
        if len(batch) >= size:
            yield batch
            batch = []
    if batch:
        yield batch


def _map_batches(
    fn: Callable,
    batches: Iterable,
    parallelism: int,
    initializer: Callable | None = None,
    initargs: tuple = (),
) -> Iterator:
    """Order-preserving map over batches, in-process or via a pool.
    Results are identical either way; batching and per-record ordinals are
    fixed by the input, not by scheduling."""
    if parallelism <= 1:
        if initializer is not None:
            initializer(*initargs)
        yield from map(fn, batches)
        return
    with multiprocessing.Pool(parallelism, initializer=initializer, initargs=initargs) as pool:
        yield from pool.imap(fn, batches)


def _decode_line(raw: bytes, idx: int) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        # encoding damage is never skippable
        raise RecordError(f"not valid UTF-8: {exc}", idx + 1) from None


def _triple_from_line(raw: bytes, idx: int) -> Triple:
    text = _decode_line(raw, idx).rstrip("\r\n")
    fields = text.split("\t")
    if len(fields) != 3:
        raise RecordError(f"expected 3 tab-separated fields, got {len(fields)}")
    try:
        return Triple(*fields)
    except ValueError as exc:
        raise RecordError(str(exc)) from None


def _kelm_batch(batch: list[tuple[int, bytes]], strict: bool = False):
    out: list[str] = []
    records = matched = skipped = 0
    for idx, raw in batch:
        records += 1
        try:
            obj = jsonl.parse_line(raw)
            sentence, triples = matcher.parse_kelm_record(obj)
        except RecordError as exc:
            if strict:
                raise RecordError(str(exc), idx + 1) from None
            skipped += 1
            continue
        m = matcher.match_record(sentence, triples)
        if m.matched:
            matched += 1
        out.append(jsonl.dumps(matcher.matched_to_obj(m)) + "\n")
    return out, records, matched, skipped


def _mask_batch(batch: list[tuple[int, bytes]], mode: str, policy: MaskPolicy, strict: bool = False):
    out: list[str] = []
    records = examples = dropped = skipped = 0
    for idx, raw in batch:
        records += 1
        try:
            if mode == "kg":
                t = _triple_from_line(raw, idx)
                emitted = masker.mask_triple(t, policy, idx)
            else:
                m = matcher.matched_from_obj(jsonl.parse_line(raw))
                ex = masker.mask_sentence(m, policy, idx)
                if ex is None:
                    dropped += 1
                emitted = [ex] if ex is not None else []
        except RecordError as exc:
            if strict:
                raise RecordError(str(exc), idx + 1) from None
            skipped += 1
            continue
        except ValueError as exc:  # sentinel collision
            if strict:
                raise RecordError(str(exc), idx + 1) from None
            skipped += 1
            continue
        for ex in emitted:
            out.append(jsonl.dumps(masker.example_to_obj(ex)) + "\n")
            examples += 1
    return out, records, examples, dropped, skipped


_worker_graph = None


def _qa_init(triples_path: str, strict: bool) -> None:
    global _worker_graph
    _worker_graph = build_index(read_triples_file(triples_path, strict=strict))


def _qa_batch(batch: list[tuple[int, bytes]], strict: bool = False):
    out: list[str] = []
    total = matched = skipped = 0
    for idx, raw in batch:
        total += 1
        try:
            item = parse_qa_record(jsonl.parse_line(raw))
        except RecordError as exc:
            if strict:
                raise RecordError(str(exc), idx + 1) from None
            skipped += 1
            continue
        verdict = is_matched(item, _worker_graph)
        if verdict.matched:
            matched += 1
            out.append(jsonl.dumps(matched_item_to_obj(item, verdict.witness)) + "\n")
    return out, total, matched, skipped


# ------------------------------------------------------------ subcommands


def cmd_ingest(args) -> dict:
    path = _require_file(args.triples, "--triples")
    out = _require(args.out, "--out")
    summary = ParseSummary()
    seen: set[tuple[str, str, str]] | None = set() if args.dedupe else None
    written = 0
    with jsonl.atomic_write(out) as fh:
        for t in read_triples_file(path, strict=args.strict, summary=summary):
            if seen is not None:
                key = (t.subject, t.relation, t.object)
                if key in seen:
                    continue
                seen.add(key)
            fh.write(to_tsv_line(t))
            written += 1
    return {
        "command": "ingest",
        "lines": summary.lines,
        "triples": summary.triples,
        "skipped": summary.skipped,
        "written": written,
        "output": out,
    }


def cmd_stats(args) -> dict:
    path = _require_file(args.triples, "--triples")
    kg = build_index(read_triples_file(path, strict=args.strict))
    s = stats(kg)
    obj = {
        "triple_count": s.triple_count,
        "distinct_entities": s.distinct_entities,
        "distinct_relations": s.distinct_relations,
    }
    if args.out:
        jsonl.write_json(args.out, obj)
    return obj


def cmd_match_kelm(args) -> dict:
    path = _require_file(args.kelm, "--kelm")
    out = _require(args.out, "--out")
    worker = partial(_kelm_batch, strict=args.strict)
    records = matched = skipped = 0
    with jsonl.atomic_write(out) as fh:
        for lines, rec, mat, skip in _map_batches(
            worker, _batched(jsonl.iter_lines(path), _BATCH), args.parallelism
        ):
            fh.writelines(lines)
            records += rec
            matched += mat
            skipped += skip
    return {
        "command": "match-kelm",
        "records": records,
        "matched": matched,
        "skipped": skipped,
        "output": out,
    }


def cmd_mask(args) -> dict:
    if bool(args.triples) == bool(args.matched):
        raise ValueError("exactly one of --triples or --matched is required")
    mode = "kg" if args.triples else "kelm"
    path = _require_file(args.triples or args.matched, "--triples/--matched")
    out = _require(args.out, "--out")
    policy = MaskPolicy(
        sentinel=args.sentinel if args.sentinel is not None else "[MASK]",
        role_choice=args.role if args.role is not None else "random",
        seed=args.seed,
    )
    worker = partial(_mask_batch, mode=mode, policy=policy, strict=args.strict)
    records = examples = dropped = skipped = 0
    with jsonl.atomic_write(out) as fh:
        for lines, rec, ex, drop, skip in _map_batches(
            worker, _batched(jsonl.iter_lines(path), _BATCH), args.parallelism
        ):
            fh.writelines(lines)
            records += rec
            examples += ex
            dropped += drop
            skipped += skip
    return {
        "command": "mask",
        "mode": mode,
        "records": records,
        "examples": examples,
        "dropped": dropped,
        "skipped": skipped,
        "output": out,
    }


def _parse_source(arg: str) -> tuple[str, str, Fraction]:
    try:
        name, rest = arg.split("=", 1)
        path, weight = rest.rsplit(":", 1)
        return name, path, Fraction(weight)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"--source must look like NAME=PATH:WEIGHT, got {arg!r}") from None


def cmd_mix(args) -> dict:
    if not args.source:
        raise ValueError("at least one --source NAME=PATH:WEIGHT is required")
    sources = [_parse_source(s) for s in args.source]
    spec = MixSpec(
        sources=tuple((name, weight) for name, _, weight in sources),
        seed=args.seed,
        block=args.block if args.block is not None else 2,
    )
    paths = [_require_file(path, f"source {name!r}") for name, path, _ in sources]
    out = _require(args.out, "--out")

    def lines(path):
        with open(path, "rb") as fh:
            for raw in fh:
                yield raw if raw.endswith(b"\n") else raw + b"\n"

    report = MixReport()
    with jsonl.atomic_write(out, "wb") as fh:
        for record in mix([lines(p) for p in paths], spec, report):
            fh.write(record)
    return {
        "command": "mix",
        "emitted": report.emitted,
        "leftover_per_source": report.leftover_per_source,
        "output": out,
    }


def cmd_match_qa(args) -> dict:
    qa_path = _require_file(args.qa, "--qa")
    triples_path = _require_file(args.triples, "--triples")
    out = _require(args.out, "--out")
    worker = partial(_qa_batch, strict=args.strict)
    total = matched = skipped = 0
    with jsonl.atomic_write(out) as fh:
        for lines, tot, mat, skip in _map_batches(
            worker,
            _batched(jsonl.iter_lines(qa_path), _BATCH),
            args.parallelism,
            initializer=_qa_init,
            initargs=(triples_path, args.strict),
        ):
            fh.writelines(lines)
            total += tot
            matched += mat
            skipped += skip
    return {
        "command": "match-qa",
        "total": total,
        "matched": matched,
        "skipped": skipped,
        "output": out,
    }


def cmd_split(args) -> dict:
    path = _require_file(args.input, "--input")
    fraction = _require(args.fraction, "--fraction")
    head_path = _require(args.head, "--head")
    tail_path = _require(args.tail, "--tail")
    try:
        frac = Fraction(str(fraction))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"--fraction must be a number, got {fraction!r}") from None
    records = [raw if raw.endswith(b"\n") else raw + b"\n" for _, raw in jsonl.iter_lines(path)]
    head, tail = split_tail(records, frac)
    with jsonl.atomic_write(head_path, "wb") as fh, jsonl.atomic_write(tail_path, "wb") as ft:
        fh.writelines(head)
        ft.writelines(tail)
    return {
        "command": "split",
        "total": len(records),
        "head": len(head),
        "tail": len(tail),
        "head_output": head_path,
        "tail_output": tail_path,
    }


def cmd_score(args) -> dict:
    preds_path = _require_file(args.preds, "--preds")
    items_path = _require_file(args.items, "--items")
    task = _require(args.task, "--task")
    split = _require(args.split, "--split")
    model = _require(args.model, "--model")
    out = _require(args.out, "--out")

    skipped = 0

    def parsed(path, parse):
        nonlocal skipped
        for idx, raw in jsonl.iter_lines(path):
            try:
                yield parse(jsonl.parse_line(raw))
            except RecordError as exc:
                if args.strict:
                    raise RecordError(str(exc), idx + 1) from None
                skipped += 1

    try:
        result = score(
            parsed(preds_path, parse_prediction_record),
            parsed(items_path, parse_qa_record),
            task=task,
            split=split,
            model=model,
            strict=bool(args.em_strict),
        )
    except RecordError:
        raise
    except ValueError as exc:
        raise RecordError(str(exc)) from None

    entry = {
        "task": result.task,
        "split": result.split,
        "model": result.model,
        "em": result.em,
        "n": result.n,
    }
    existing: list = []
    if args.append and Path(out).is_file():
        with open(out, encoding="utf-8") as fh:
            existing = json.load(fh)
        if not isinstance(existing, list):
            raise ValueError(f"cannot append: {out} does not hold a list")
    jsonl.write_json(out, existing + [entry])
    return {"command": "score", **entry, "skipped": skipped, "output": out}


def cmd_delta(args) -> dict:
    results_path = _require_file(args.results, "--results")
    baseline = _require(args.baseline, "--baseline")
    treatment = _require(args.treatment, "--treatment")
    out = _require(args.out, "--out")
    with open(results_path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed results file {results_path}: {exc.msg}") from None
    if not isinstance(raw, list):
        raise ValueError(f"results file {results_path} must hold a list")
    results = []
    for entry in raw:
        try:
            results.append(EMResult(entry["task"], entry["split"], entry["model"],
                                    float(entry["em"]), int(entry["n"])))
        except (TypeError, KeyError, ValueError) as exc:
            raise ValueError(f"malformed score entry {entry!r}: {exc}") from None
    rep = delta_report(results, baseline, treatment)
    import csv  # noqa: PLC0415

    with jsonl.atomic_write(out, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "split", "delta_em"])
        for row in rep.rows:
            writer.writerow([row.task, row.split, str(row.delta_em)])
        writer.writerow(["__average__", "", str(rep.average)])
    return {
        "command": "delta",
        "rows": len(rep.rows),
        "average": rep.average,
        "output": out,
    }


def cmd_selftest(args) -> dict:
    checks: list[tuple[str, bool]] = []

    t = Triple("Pulp Fiction", "award received", "Palme d'Or")
    policy = MaskPolicy(role_choice="object")
    ex = masker.mask_triple(t, policy)[0]
    checks.append((
        "triple-mask",
        ex.input == "Pulp Fiction, award received, [MASK]" and ex.target == "Palme d'Or",
    ))

    sentence = "Quentin Tarantino won the Palme d'Or in 1994 for Pulp Fiction."
    m = matcher.match_record(sentence, [t])
    ex2 = masker.mask_sentence(m, policy)
    checks.append((
        "sentence-mask",
        ex2 is not None
        and ex2.input == "Quentin Tarantino won the [MASK] in 1994 for Pulp Fiction."
        and ex2.target == "Palme d'Or",
    ))

    checks.append(("normalize", matcher.preprocess("Palme d'Or").text == "palme dor"))
    checks.append((
        "bracket-fallback",
        [s.surface for s in matcher.match_entity("John Doe (born 1990)", "John Doe stars in the film.")]
        == ["John Doe"],
    ))
    checks.append((
        "epochs-triple-corpus",
        abs(epochs(TrainConfig(500_000, 1024, 0.5, 35_697_715)) - 7.17) <= 0.005,
    ))
    checks.append((
        "epochs-sentence-corpus",
        abs(epochs(TrainConfig(500_000, 1024, 0.5, 15_628_486)) - 16.38) <= 0.005,
    ))

    return {
        "command": "selftest",
        "checks": [{"name": name, "ok": ok} for name, ok in checks],
        "ok": all(ok for _, ok in checks),
    }


# ------------------------------------------------------------------ main


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        report = args.func(args)
    except RecordError as exc:
        print(f"kgprep {args.command}: data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"kgprep {args.command}: {exc}", file=sys.stderr)
        return 1
    line = jsonl.dumps(report)
    print(line)
    if args.report:
        with jsonl.atomic_write(args.report) as fh:
            fh.write(line + "\n")
    return 0 if report.get("ok", True) else 1


if __name__ == "__main__":
    sys.exit(main())
