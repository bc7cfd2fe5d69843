"""Operator command line: fixtures, training, indexing, evaluation, chat, serve.

Exit codes: 0 ok, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import uuid
from pathlib import Path

from . import datagen
from .catalog import CatalogError, generate_fixture, load_catalog, save_catalog
from .evaluation import (
    MetricsError,
    external_metrics,
    external_metrics_by_day,
    per_class_prf,
    read_events,
    span_prf,
    topk_recall,
)
from .gateway import ChatGateway, SessionStore, load_services
from .intent import (
    IntentDataError,
    IntentTrainConfig,
    classify,
    load_intent_data,
    load_model,
    load_rules,
    save_intent_data,
    save_model,
    save_rules,
    train_intent_model,
    DEFAULT_RULES,
    RuleTable,
)
from .ner import (
    NerDataError,
    TaggerMode,
    combine_spans,
    load_ner_data,
    load_tagger,
    save_ner_data,
    save_tagger,
    tag,
    train_tagger,
)
from .reranker import (
    Candidate,
    RankerDataError,
    RankerTrainConfig,
    load_ir_data,
    load_ranker,
    rerank,
    save_ir_data,
    save_ranker,
    train_ranker,
    unigram_baseline_score,
)
from .retrieval import IndexConfig, build_index, load_index, save_index, score_pair

DATA_ERRORS = (
    CatalogError,
    IntentDataError,
    NerDataError,
    RankerDataError,
    MetricsError,
    FileNotFoundError,
    ValueError,
)


def _data_dir() -> Path:
    return Path(os.environ.get("CONCIERGE_DATA_DIR", "data"))


# --------------------------------------------------------------------------
# Subcommands.


def cmd_fixture(args: argparse.Namespace) -> int:
    catalog = generate_fixture(args.seed, args.cities, args.hotels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_catalog(catalog, out)
    print(f"wrote {len(catalog)} records to {out}")
    if args.datasets:
        datasets = Path(args.datasets)
        datasets.mkdir(parents=True, exist_ok=True)
        intent_rows = datagen.gen_intent_dataset(catalog, args.seed, args.intent_messages)
        train, evl = datagen.split_rows(intent_rows, args.eval_fraction, args.seed)
        save_intent_data(train, datasets / "intent_train.jsonl")
        save_intent_data(evl, datasets / "intent_eval.jsonl")

        ner_rows = datagen.gen_ner_dataset(catalog, args.seed + 1, args.ner_messages)
        train, evl = datagen.split_rows(ner_rows, args.eval_fraction, args.seed)
        save_ner_data(train, datasets / "ner_train.jsonl")
        save_ner_data(evl, datasets / "ner_eval.jsonl")

        index = build_index(catalog)
        ir_rows = datagen.gen_ir_dataset(catalog, index, args.seed + 2, args.queries)
        train, evl = datagen.split_rows(ir_rows, args.eval_fraction, args.seed)
        save_ir_data(train, datasets / "ir_train.jsonl")
        save_ir_data(evl, datasets / "ir_eval.jsonl")
        print(f"wrote datasets ({args.intent_messages} intent, {args.ner_messages} ner, "
              f"{len(ir_rows)} ir rows) to {datasets}")
    return 0


def cmd_train_intent(args: argparse.Namespace) -> int:
    rows = load_intent_data(args.data)
    config = IntentTrainConfig(
        feature_dim=args.feature_dim,
        epochs=args.epochs,
        learning_rate=args.lr,
        l2=args.l2,
        seed=args.seed,
        threshold=args.threshold,
    )
    model = train_intent_model(rows, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    rules = RuleTable(dict(DEFAULT_RULES))
    save_rules(rules, out.parent / "rules.tsv")
    print(
        f"trained intent model on {len(rows)} messages, {len(model.class_order)} classes; "
        f"final loss {model.loss_history[-1]:.4f}; wrote {out} and {out.parent / 'rules.tsv'}"
    )
    return 0


def cmd_train_ner(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    rows = load_ner_data(args.data)
    mode = TaggerMode(args.mode.upper())
    model = train_tagger(rows, mode, catalog, epochs=args.epochs, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tagger(model, out)
    print(f"trained {mode.value} tagger on {len(rows)} messages; wrote {out}")
    return 0


def cmd_train_ranker(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    index = load_index(args.index)
    rows = load_ir_data(args.data)
    pairs = []
    for query, cands in rows:
        for rid, label in cands:
            record = catalog.by_id(rid)
            pairs.append((query, record, score_pair(index, query, record), label))
    config = RankerTrainConfig(epochs=args.epochs, learning_rate=args.lr, l2=args.l2, seed=args.seed)
    model = train_ranker(pairs, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ranker(model, out)
    print(
        f"trained ranker on {len(pairs)} pairs from {len(rows)} queries; "
        f"final loss {model.loss_history[-1]:.4f}; wrote {out}"
    )
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    config = IndexConfig(char_ngram_n=args.char_ngram, k_candidates=args.k)
    index = build_index(catalog, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, out)
    print(f"indexed {index.doc_count} records ({len(index.postings)} grams) to {out}")
    return 0


def _eval_intent(models: Path, path: Path, report: dict, lines: list[str]) -> None:
    model = load_model(models / "intent.npz")
    rules_path = models / "rules.tsv"
    rules = load_rules(rules_path) if rules_path.exists() else RuleTable(dict(DEFAULT_RULES))
    rows = load_intent_data(path)
    gold = [label for _, label in rows]
    pred = [classify(model, rules, text).label for text, _ in rows]
    result = per_class_prf(gold, pred)
    lines.append(f"Intent classification ({len(rows)} messages, threshold {model.threshold}):")
    lines.append("  class       precision  recall  f1")
    for label, prf in sorted(result.per_class.items()):
        lines.append(f"  {label:<11} {prf.precision:9.3f} {prf.recall:7.3f} {prf.f1:5.3f}")
    lines.append(f"  macro       {result.macro.precision:9.3f} {result.macro.recall:7.3f} "
                 f"{result.macro.f1:5.3f}")
    report["intent"] = {
        "per_class": {
            k: {"precision": v.precision, "recall": v.recall, "f1": v.f1}
            for k, v in result.per_class.items()
        },
        "macro_f1": result.macro.f1,
    }


def _eval_ner(models: Path, catalog_path: Path, path: Path, report: dict, lines: list[str]) -> None:
    catalog = load_catalog(catalog_path)
    rows = load_ner_data(path)
    lines.append(f"Entity extraction ({len(rows)} messages, exact span+type match):")
    report["ner"] = {}
    for fname, label in (("tagger.json", "combined"), ("tagger_separate.json", "separate")):
        tagger_path = models / fname
        if not tagger_path.exists():
            continue
        model = load_tagger(tagger_path)
        if model.mode is TaggerMode.COMBINED:
            gold = [combine_spans(spans) for _, spans in rows]
        else:
            gold = [spans for _, spans in rows]
        pred = [tag(model, text, catalog) for text, _ in rows]
        result = span_prf(gold, pred)
        for etype, prf in sorted(result.items()):
            lines.append(
                f"  {label:<9} {etype:<9} P {prf.precision:.3f}  R {prf.recall:.3f}  F1 {prf.f1:.3f}"
            )
        report["ner"][label] = {
            etype: {"precision": v.precision, "recall": v.recall, "f1": v.f1}
            for etype, v in result.items()
        }


def _eval_ir(models: Path, catalog_path: Path, path: Path, report: dict, lines: list[str]) -> None:
    catalog = load_catalog(catalog_path)
    index = load_index(models / "index.json")
    ranker = load_ranker(models / "ranker.json")
    rows = load_ir_data(path)
    learned_rankings = []
    baseline_rankings = []
    for query, cands in rows:
        gold = {rid for rid, label in cands if label == 1}
        if not gold:
            continue
        candidates = [
            Candidate(rid, score_pair(index, query, catalog.by_id(rid))) for rid, _ in cands
        ]
        ranked = rerank(ranker, query, candidates, catalog)
        learned_rankings.append(([m.record_id for m in ranked], gold))
        by_overlap = sorted(
            ((unigram_baseline_score(query, catalog.by_id(rid).name), rid) for rid, _ in cands),
            key=lambda pair: (-pair[0], pair[1]),
        )
        baseline_rankings.append(([rid for _, rid in by_overlap], gold))
    baseline_top1 = topk_recall(baseline_rankings, 1)
    learned_top1 = topk_recall(learned_rankings, 1)
    learned_top3 = topk_recall(learned_rankings, 3)
    lines.append(f"Search ranking ({len(learned_rankings)} queries):")
    lines.append(f"  unigram baseline   top-1 recall {baseline_top1:.3f}   top-3 recall --")
    lines.append(
        f"  learned ranker     top-1 recall {learned_top1:.3f}   top-3 recall {learned_top3:.3f}"
    )
    report["ir"] = {
        "queries": len(learned_rankings),
        "baseline_top1": baseline_top1,
        "learned_top1": learned_top1,
        "learned_top3": learned_top3,
    }


def _eval_events(path: Path, report: dict, lines: list[str]) -> None:
    events = read_events(path)
    overall = external_metrics(events)
    lines.append("External metrics (denominator: conversations):")
    lines.append(
        f"  overall   sessions {overall.sessions}  handoff_rate {overall.handoff_rate:.3f}  "
        f"completion_rate {overall.completion_rate:.3f}"
    )
    daily = external_metrics_by_day(events)
    for day, metrics in daily.items():
        lines.append(
            f"  {day}  sessions {metrics.sessions}  handoff_rate {metrics.handoff_rate:.3f}  "
            f"completion_rate {metrics.completion_rate:.3f}"
        )
    report["external"] = {
        "sessions": overall.sessions,
        "handoff_rate": overall.handoff_rate,
        "completion_rate": overall.completion_rate,
        "daily": {
            str(day): {
                "sessions": m.sessions,
                "handoff_rate": m.handoff_rate,
                "completion_rate": m.completion_rate,
            }
            for day, m in daily.items()
        },
    }


def cmd_eval(args: argparse.Namespace) -> int:
    models = Path(args.models)
    report: dict = {}
    lines: list[str] = []
    if args.intent_data:
        _eval_intent(models, Path(args.intent_data), report, lines)
    if args.ner_data:
        _eval_ner(models, Path(args.catalog), Path(args.ner_data), report, lines)
    if args.ir_data:
        _eval_ir(models, Path(args.catalog), Path(args.ir_data), report, lines)
    if args.events:
        _eval_events(Path(args.events), report, lines)
    if not lines:
        print("nothing to evaluate: pass --intent-data/--ner-data/--ir-data/--events", file=sys.stderr)
        return 1
    print("\n".join(lines))
    if args.json:
        print(json.dumps(report))
    return 0


def _render_wire_action(action: dict) -> str:
    payload = action["payload"]
    if action["type"] == "SEND_TEXT":
        return payload["text"]
    if action["type"] == "SEND_CHOICES":
        rows = [
            f"  [{i}] {c['name']} ({c['city']})" for i, c in enumerate(payload["choices"], 1)
        ]
        return "\n".join(rows)
    if action["type"] == "SEND_RESULTS":
        rows = [
            f"  [{i}] {r['name']} - ${r['nightly_price']}/night, rated {r['review_score']}"
            for i, r in enumerate(payload["results"], 1)
        ]
        return "\n".join(rows)
    if action["type"] == "HANDOFF":
        return f"(conversation handed to an agent: {payload['reason']})"
    return f"(booking completed: {payload['name']})"


def _make_gateway(args: argparse.Namespace) -> ChatGateway:
    workdir = _data_dir()
    workdir.mkdir(parents=True, exist_ok=True)
    services = load_services(args.catalog, args.models, theta_high=args.theta)
    store = SessionStore(workdir / "sessions.json")
    return ChatGateway(
        services,
        store,
        events_path=workdir / "events.jsonl",
        captures_path=workdir / "pending_annotations.jsonl",
    )


def cmd_chat(args: argparse.Namespace) -> int:
    gateway = _make_gateway(args)
    session_id = f"cli-{uuid.uuid4().hex[:12]}"
    print("concierge chat - type a message ('exit' to quit)")
    while True:
        try:
            text = input("you> ").strip()
        except EOFError:
            break
        if not text or text.lower() in ("exit", "/quit"):
            break
        result = gateway.handle_chat(session_id, text)
        for action in result["actions"]:
            print(f"bot> {_render_wire_action(action)}")
        if result["state"] in ("ENDED",):
            print(f"(session {result['state'].lower()})")
            break
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import create_app

    gateway = _make_gateway(args)
    static = args.static if args.static and Path(args.static).is_dir() else None
    app = create_app(gateway, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# --------------------------------------------------------------------------
# Parser.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="concierge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="generate a synthetic catalog (and datasets)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--cities", type=int, default=50)
    p.add_argument("--hotels", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--datasets", help="also write train/eval datasets into this directory")
    p.add_argument("--intent-messages", type=int, default=3000)
    p.add_argument("--ner-messages", type=int, default=1500)
    p.add_argument("--queries", type=int, default=2000)
    p.add_argument("--eval-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("train-intent", help="train the intent classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model path (.npz)")
    p.add_argument("--feature-dim", type=int, default=2**18)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.70)
    p.set_defaults(func=cmd_train_intent)

    p = sub.add_parser("train-ner", help="train an entity tagger")
    p.add_argument("--data", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("combined", "separate"), default="combined")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_ner)

    p = sub.add_parser("train-ranker", help="train the pointwise reranker")
    p.add_argument("--data", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_ranker)

    p = sub.add_parser("index", help="build the retrieval index")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--char-ngram", type=int, default=3)
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("eval", help="evaluate model artifacts against labelled data")
    p.add_argument("--catalog", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--intent-data")
    p.add_argument("--ner-data")
    p.add_argument("--ir-data")
    p.add_argument("--events")
    p.add_argument("--json", action="store_true", help="also print a JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("chat", help="terminal chat against the in-process engine")
    p.add_argument("--catalog", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--theta", type=float, default=0.9)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="run the HTTP chat gateway")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--catalog", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--static", help="directory with the webchat build to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
