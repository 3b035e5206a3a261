"""Command-line pipeline driver.

Subcommands cover the full refinement workflow: prepare chunks, produce
the two intermediate translations, score them, build weighted datasets,
refine, evaluate, rerank, annotate errors, and compare systems. Every
subcommand validates configuration before any network call and writes a
manifest next to its artifacts.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .annotate import aggregate_errors, build_mqm_prompt, parse_mqm, tally_csv
from .config import ConfigError, RunConfig, load_config, write_manifest
from .corpus import (
    CorpusError,
    Document,
    ParallelDocument,
    load_corpus,
    parallel_chunks,
)
from .llm_client import BatchError, LLMClient, LLMClientError
from .metrics import (
    Lexicon,
    MetricError,
    WinTieLoss,
    coherence,
    compare_systems,
    d_bleu,
    histogram_csv,
    ltcr_report,
    metric_report,
    score_distribution,
)
from .prompting import PromptError, load_templates
from .quality import (
    QualityError,
    build_quintuples,
    export_dataset,
)
from .rerank import RerankError, rerank_refine, rerank_select
from .scoring import MockScorerDouble, ScorerClient, ScorerError
from .translate import (
    IntermediatePair,
    ParseReport,
    refine,
    translate_intermediates,
)

logger = logging.getLogger(__name__)

_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    QualityError,
    MetricError,
    PromptError,
    RerankError,
)
_RUNTIME_ERRORS = (LLMClientError, BatchError, ScorerError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the pipeline reserves 2 for runtime
    # failures, so usage problems are remapped to exit 1
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared plumbing


def _write_jsonl(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def _read_jsonl(path: Path, required: tuple[str, ...]) -> list[dict]:
    if not path.exists():
        raise ConfigError(f"input artifact not found: {path}")
    rows = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        missing = [k for k in required if k not in row]
        if missing:
            raise ConfigError(f"{path}:{lineno}: missing fields {missing}")
        rows.append(row)
    return rows


def _load_pairs(cfg: RunConfig) -> list[ParallelDocument]:
    pairs = load_corpus(
        cfg.corpus.src,
        cfg.corpus.format,
        ref_path=cfg.corpus.ref,
        aligned=cfg.corpus.aligned,
        src_lang=cfg.corpus.src_lang,
        tgt_lang=cfg.corpus.tgt_lang,
    )
    return sorted(pairs, key=lambda p: p.doc_id)


def _chunk_pairs(cfg: RunConfig):
    chunks = []
    for pair in _load_pairs(cfg):
        chunks.extend(parallel_chunks(pair, budget=cfg.chunk_budget, tok=cfg.tokenizer))
    return chunks


def _templates(cfg: RunConfig):
    return load_templates(cfg.templates_path) if cfg.templates_path else None


def _decode(params, diverse_flag: bool):
    if diverse_flag:
        return dataclasses.replace(params, do_sample=True, temperature=0.3, top_p=0.7)
    return params


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_doc_files(
    out_dir: Path, subdir: str, rows: list[dict], key: str
) -> list[Path]:
    """One text file per document, sentences in chunk order, one per line."""
    target = out_dir / subdir
    target.mkdir(parents=True, exist_ok=True)
    by_doc: dict[str, list] = {}
    for row in sorted(rows, key=lambda r: (r["doc_id"], r["chunk_index"])):
        if row.get(key) is None:
            continue
        by_doc.setdefault(row["doc_id"], []).extend(row[key])
    paths = []
    for doc_id in sorted(by_doc):
        path = target / f"{doc_id}.txt"
        path.write_text("\n".join(by_doc[doc_id]) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def _load_hyp_docs(path: str | Path, lang: str) -> list[Document]:
    """Hypotheses from a directory of <doc_id>.txt files or a JSONL file."""
    path = Path(path)
    if path.is_dir():
        docs = []
        for txt in sorted(path.glob("*.txt")):
            sentences = [
                line for line in txt.read_text(encoding="utf-8").splitlines() if line
            ]
            docs.append(Document(doc_id=txt.stem, lang=lang, sentences=tuple(sentences)))
        if not docs:
            raise ConfigError(f"no .txt documents found under {path}")
        return docs
    rows = _read_jsonl(path, required=("doc_id", "sentences"))
    return [
        Document(doc_id=r["doc_id"], lang=lang, sentences=tuple(r["sentences"]))
        for r in rows
    ]


def _read_score_file(path: str | Path) -> list[float]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"score file not found: {path}")
    scores = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            scores.append(float(line.strip()))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return scores


def _scorer_backend(cfg: RunConfig):
    """Real HTTP scorer, or the in-process double when base_url is "mock:"."""
    sc = cfg.require("scorer")
    if sc.base_url == "mock" or sc.base_url.startswith("mock:"):
        return MockScorerDouble()
    return ScorerClient(sc)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_prepare(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    rows = []
    for chunk in _chunk_pairs(cfg):
        rows.append(
            {
                "doc_id": chunk.source.doc_id,
                "chunk_index": chunk.source.chunk_index,
                "sentence_span": list(chunk.source.sentence_span),
                "src_sentences": list(chunk.source.sentences),
                "ref_sentences": list(chunk.ref_sentences),
                "total_tokens": chunk.source.total_tokens,
            }
        )
    artifact = _write_jsonl(out / "chunks.jsonl", rows)
    write_manifest(out, "prepare", cfg, _config_inputs(args, cfg), [artifact])
    print(f"prepare: wrote {len(rows)} chunks to {artifact}")
    return 0


def _cmd_translate(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    client = LLMClient(cfg.require("translator"))
    templates = _templates(cfg)
    dp = _decode(cfg.decode_translate, args.diverse or cfg.diverse)
    rows = []
    for chunk in _chunk_pairs(cfg):
        sentences = list(chunk.source.sentences)
        if args.mode == "both":
            inter = translate_intermediates(
                client, sentences, chunk.src_lang, chunk.tgt_lang, dp,
                templates=templates,
            )
            sent2sent: list | None = list(inter.sent2sent)
            doc2doc: list | None = list(inter.doc2doc)
            report = inter.parse_report.to_dict()
            degraded = inter.degraded
        elif args.mode == "sent":
            from .translate import translate_sent2sent

            sent2sent = translate_sent2sent(
                client, sentences, chunk.src_lang, chunk.tgt_lang, dp,
                templates=templates,
            )
            doc2doc, report, degraded = None, None, False
        else:
            from .translate import translate_doc2doc

            doc2doc, parse_report = translate_doc2doc(
                client, sentences, chunk.src_lang, chunk.tgt_lang, dp,
                templates=templates,
            )
            sent2sent, report = None, parse_report.to_dict()
            degraded = parse_report.repaired
        rows.append(
            {
                "doc_id": chunk.source.doc_id,
                "chunk_index": chunk.source.chunk_index,
                "sent2sent": sent2sent,
                "doc2doc": doc2doc,
                "parse_report": report,
                "degraded": degraded,
            }
        )
    artifacts = [_write_jsonl(out / "translations.jsonl", rows)]
    if args.mode in ("both", "sent"):
        artifacts.extend(_write_doc_files(out, "sent2sent", rows, "sent2sent"))
    if args.mode in ("both", "doc"):
        artifacts.extend(_write_doc_files(out, "doc2doc", rows, "doc2doc"))
    write_manifest(out, "translate", cfg, _config_inputs(args, cfg), artifacts)
    print(f"translate: {len(rows)} chunks, mode={args.mode}")
    return 0


def _cmd_score(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    scorer = _scorer_backend(cfg)
    translations = _read_jsonl(
        Path(args.translations or out / "translations.jsonl"),
        required=("doc_id", "chunk_index", "sent2sent", "doc2doc"),
    )
    chunks = {(c.source.doc_id, c.source.chunk_index): c for c in _chunk_pairs(cfg)}
    items_y, items_z, spans = [], [], []
    for row in sorted(translations, key=lambda r: (r["doc_id"], r["chunk_index"])):
        key = (row["doc_id"], row["chunk_index"])
        chunk = chunks.get(key)
        if chunk is None:
            raise ConfigError(f"translations reference unknown chunk {key}")
        if row["sent2sent"] is None or row["doc2doc"] is None:
            raise ConfigError(
                f"chunk {key}: scoring needs both translations; rerun "
                "translate with --mode both"
            )
        n = len(chunk.source.sentences)
        if len(row["sent2sent"]) != n or len(row["doc2doc"]) != n:
            raise ConfigError(f"chunk {key}: translation count != {n} sentences")
        start = len(items_y)
        for src, ref, y_sent, z_sent in zip(
            chunk.source.sentences, chunk.ref_sentences,
            row["sent2sent"], row["doc2doc"],
        ):
            items_y.append({"src": src, "mt": y_sent, "ref": ref})
            items_z.append({"src": src, "mt": z_sent, "ref": ref})
        spans.append((row, start, len(items_y)))
    scores_y = scorer.da_scores(items_y)
    scores_z = scorer.da_scores(items_z)
    rows = [
        {
            "doc_id": row["doc_id"],
            "chunk_index": row["chunk_index"],
            "scores_y": scores_y[start:end],
            "scores_z": scores_z[start:end],
        }
        for row, start, end in spans
    ]
    artifact = _write_jsonl(out / "scores.jsonl", rows)
    write_manifest(out, "score", cfg, _config_inputs(args, cfg), [artifact])
    print(f"score: {len(items_y)} sentences over {len(rows)} chunks")
    return 0


def _cmd_build_dataset(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    templates = _templates(cfg)
    translations = _read_jsonl(
        Path(args.translations or out / "translations.jsonl"),
        required=("doc_id", "chunk_index", "sent2sent", "doc2doc"),
    )
    score_rows = _read_jsonl(
        Path(args.scores or out / "scores.jsonl"),
        required=("doc_id", "chunk_index", "scores_y", "scores_z"),
    )
    scores = {(r["doc_id"], r["chunk_index"]): r for r in score_rows}
    chunks = {(c.source.doc_id, c.source.chunk_index): c for c in _chunk_pairs(cfg)}
    min_weight = args.min_weight if args.min_weight is not None else cfg.min_weight

    quintuples = []
    skipped = 0
    for row in sorted(translations, key=lambda r: (r["doc_id"], r["chunk_index"])):
        key = (row["doc_id"], row["chunk_index"])
        chunk = chunks.get(key)
        score_row = scores.get(key)
        if chunk is None or score_row is None:
            raise ConfigError(f"no chunk/scores for translation {key}")
        if row["sent2sent"] is None or row["doc2doc"] is None:
            raise ConfigError(
                f"chunk {key}: dataset construction needs both translations; "
                "rerun translate with --mode both"
            )
        if row.get("degraded"):
            skipped += 1
            continue
        n = len(chunk.source.sentences)
        report_data = row.get("parse_report")
        inter = IntermediatePair(
            sent2sent=tuple(row["sent2sent"]),
            doc2doc=tuple(row["doc2doc"]),
            parse_report=ParseReport.from_dict(report_data)
            if report_data
            else ParseReport(expected_n=n, found_n=n),
        )
        try:
            quintuples.append(
                build_quintuples(
                    chunk, inter, score_row["scores_y"], score_row["scores_z"],
                    cfg.weights,
                )
            )
        except QualityError as exc:
            logger.warning("skipping chunk %s: %s", key, exc)
            skipped += 1
    if skipped:
        logger.warning("build-dataset: skipped %d degraded/mismatched chunks", skipped)

    stages = (
        ["stage1_naive", "stage2_qa"]
        if args.stage == "both"
        else [{"stage1": "stage1_naive", "stage2": "stage2_qa"}[args.stage]]
    )
    artifacts = []
    counts = {}
    for stage in stages:
        path = out / f"dataset-{stage}.jsonl"
        counts[stage] = export_dataset(
            quintuples, stage, path,
            weight_params=cfg.weights, min_weight=min_weight, templates=templates,
        )
        artifacts.extend([path, path.with_name(path.name + ".meta.json")])
    write_manifest(out, "build-dataset", cfg, _config_inputs(args, cfg), artifacts)
    print(
        "build-dataset: "
        + ", ".join(f"{stage}={count} records" for stage, count in counts.items())
        + (f", skipped {skipped} chunks" if skipped else "")
    )
    return 0


def _cmd_refine(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    client = LLMClient(cfg.require("refiner"))
    templates = _templates(cfg)
    dp = _decode(cfg.decode_refine, args.diverse or cfg.diverse)
    translations = _read_jsonl(
        Path(args.translations or out / "translations.jsonl"),
        required=("doc_id", "chunk_index", "sent2sent", "doc2doc"),
    )
    chunks = {(c.source.doc_id, c.source.chunk_index): c for c in _chunk_pairs(cfg)}
    rows = []
    for row in sorted(translations, key=lambda r: (r["doc_id"], r["chunk_index"])):
        key = (row["doc_id"], row["chunk_index"])
        chunk = chunks.get(key)
        if chunk is None:
            raise ConfigError(f"translations reference unknown chunk {key}")
        if row["sent2sent"] is None or row["doc2doc"] is None:
            raise ConfigError(f"chunk {key}: refinement needs both translations")
        refined, report = refine(
            client, list(chunk.source.sentences),
            row["sent2sent"], row["doc2doc"],
            chunk.src_lang, chunk.tgt_lang, dp, templates=templates,
        )
        rows.append(
            {
                "doc_id": row["doc_id"],
                "chunk_index": row["chunk_index"],
                "refined": refined,
                "parse_report": report.to_dict(),
            }
        )
    artifacts = [_write_jsonl(out / "refined.jsonl", rows)]
    artifacts.extend(_write_doc_files(out, "refined", rows, "refined"))
    write_manifest(out, "refine", cfg, _config_inputs(args, cfg), artifacts)
    print(f"refine: {len(rows)} chunks")
    return 0


def _cmd_evaluate(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    pairs = _load_pairs(cfg)
    ref_docs = [p.reference for p in pairs]
    src_docs = [p.source for p in pairs]
    hyp_path = args.hyp or (out / "refined")
    hyp_docs = _load_hyp_docs(hyp_path, cfg.corpus.tgt_lang)

    bleu = d_bleu(hyp_docs, ref_docs, tokenizer=args.bleu_tokenizer)
    ltcr_value = None
    if cfg.lexicon_path:
        hyp_by_id = {d.doc_id: d for d in hyp_docs}
        src_subset, hyp_subset = [], []
        for src in src_docs:
            hyp = hyp_by_id.get(src.doc_id)
            if hyp is not None and len(hyp.sentences) == len(src.sentences):
                src_subset.append(src)
                hyp_subset.append(hyp)
        if src_subset:
            ltcr_value = ltcr_report(
                src_subset, hyp_subset, Lexicon.from_tsv(cfg.lexicon_path)
            ).value
    coherence_value = None
    scorer_metrics = {}
    if cfg.scorer is not None:
        scorer = _scorer_backend(cfg)
        multi = [d for d in hyp_docs if len(d.sentences) >= 2]
        if multi:
            embeddings = [scorer.embed(list(d.sentences)) for d in multi]
            coherence_value = coherence(embeddings)
            if not 0.0 <= coherence_value <= 1.0:
                # the report schema cannot carry values outside [0, 1]
                logger.warning(
                    "evaluate: coherence %.4f outside [0, 1]; omitted from report",
                    coherence_value,
                )
                coherence_value = None
        ppls = scorer.ppl([d.text() for d in hyp_docs])
        scorer_metrics["ppl_mean"] = sum(ppls) / len(ppls)

    report = metric_report(
        args.system_name, bleu,
        ltcr_value=ltcr_value, coherence_value=coherence_value,
        scorer_metrics=scorer_metrics,
    )
    artifact = out / "report.json"
    artifact.write_text(report.to_json() + "\n", encoding="utf-8")
    write_manifest(out, "evaluate", cfg, _config_inputs(args, cfg), [artifact])
    print(f"evaluate: {args.system_name} d-BLEU {bleu:.4f}")
    return 0


def _cmd_rerank(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    scorer = _scorer_backend(cfg)
    templates = _templates(cfg)
    translations = _read_jsonl(
        Path(args.translations or out / "translations.jsonl"),
        required=("doc_id", "chunk_index", "sent2sent", "doc2doc"),
    )
    chunks = {(c.source.doc_id, c.source.chunk_index): c for c in _chunk_pairs(cfg)}
    client = None
    if args.refine_mode != "none":
        client = LLMClient(cfg.require("refiner"))
    dp = _decode(cfg.decode_refine, args.diverse or cfg.diverse)
    rows = []
    for row in sorted(translations, key=lambda r: (r["doc_id"], r["chunk_index"])):
        key = (row["doc_id"], row["chunk_index"])
        chunk = chunks.get(key)
        if chunk is None:
            raise ConfigError(f"translations reference unknown chunk {key}")
        if row["sent2sent"] is None or row["doc2doc"] is None:
            raise ConfigError(f"chunk {key}: reranking needs both translations")
        y, z = row["sent2sent"], row["doc2doc"]
        kiwi_y = scorer.qe_scores(
            [{"src": s, "mt": m} for s, m in zip(chunk.source.sentences, y)]
        )
        kiwi_z = scorer.qe_scores(
            [{"src": s, "mt": m} for s, m in zip(chunk.source.sentences, z)]
        )
        if args.refine_mode == "none":
            selected = rerank_select(y, z, kiwi_y, kiwi_z)
        else:
            selected = rerank_refine(
                client, chunk.source, y, z, kiwi_y, kiwi_z,
                mode=args.refine_mode, dp=dp,
                src_lang=chunk.src_lang, tgt_lang=chunk.tgt_lang,
                templates=templates,
            )
        rows.append(
            {
                "doc_id": row["doc_id"],
                "chunk_index": row["chunk_index"],
                "reranked": selected,
            }
        )
    artifacts = [_write_jsonl(out / "reranked.jsonl", rows)]
    artifacts.extend(_write_doc_files(out, "reranked", rows, "reranked"))
    write_manifest(out, "rerank", cfg, _config_inputs(args, cfg), artifacts)
    print(f"rerank: {len(rows)} chunks, refine_mode={args.refine_mode}")
    return 0


def _cmd_annotate(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    client = LLMClient(cfg.require("refiner"))
    pairs = _load_pairs(cfg)
    hyp_docs = {
        d.doc_id: d for d in _load_hyp_docs(args.hyp, cfg.corpus.tgt_lang)
    }
    dp = _decode(cfg.decode_refine, False)
    rows = []
    all_records = []
    skipped = 0
    for pair in pairs:
        hyp = hyp_docs.get(pair.doc_id)
        if hyp is None or len(hyp.sentences) != len(pair.source.sentences):
            skipped += 1
            continue
        prompt = build_mqm_prompt(pair.source, pair.reference, hyp)
        reply = client.complete(prompt, dp)
        records = parse_mqm(reply, expected_n=len(hyp.sentences))
        all_records.append(records)
        rows.append(
            {
                "doc_id": pair.doc_id,
                "records": [
                    {
                        "sentence_id": r.sentence_id,
                        "error_types": list(r.error_types),
                        "explanation": r.explanation,
                        "missing": r.missing,
                    }
                    for r in records
                ],
            }
        )
    if skipped:
        logger.warning("annotate: skipped %d docs without matching hypotheses", skipped)
    tally = aggregate_errors(all_records)
    artifacts = [_write_jsonl(out / "annotations.jsonl", rows)]
    csv_path = out / "errors.csv"
    csv_path.write_text(tally_csv(tally), encoding="utf-8")
    artifacts.append(csv_path)
    write_manifest(out, "annotate", cfg, _config_inputs(args, cfg), artifacts)
    print(f"annotate: {len(rows)} docs, {sum(tally.values())} errors")
    return 0


def _cmd_compare(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    scores_a = _read_score_file(args.scores_a)
    scores_b = _read_score_file(args.scores_b)
    tie_eps = args.tie_eps if args.tie_eps is not None else cfg.tie_eps
    result: WinTieLoss = compare_systems(scores_a, scores_b, tie_eps)
    artifact = out / "comparison.json"
    artifact.write_text(
        json.dumps(
            {
                "wins": result.wins,
                "ties": result.ties,
                "losses": result.losses,
                "tie_eps": result.tie_eps,
                "total": result.total,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    write_manifest(out, "compare", cfg, _config_inputs(args, cfg), [artifact])
    print(
        f"compare: wins={result.wins} ties={result.ties} losses={result.losses} "
        f"(eps={result.tie_eps})"
    )
    return 0


def _cmd_stats(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    scores = _read_score_file(args.scores)
    histogram = score_distribution(scores, args.bin_width)
    artifact = out / "histogram.csv"
    artifact.write_text(histogram_csv(histogram), encoding="utf-8")
    write_manifest(out, "stats", cfg, _config_inputs(args, cfg), [artifact])
    print(f"stats: {len(scores)} scores in {len(histogram)} bins")
    return 0


def _config_inputs(args, cfg: RunConfig) -> list:
    inputs = [args.config]
    if Path(cfg.corpus.src).exists():
        inputs.append(cfg.corpus.src)
    if cfg.corpus.ref and Path(cfg.corpus.ref).exists():
        inputs.append(cfg.corpus.ref)
    return inputs


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="docrefine",
        description="Document-level translation refinement pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration file")
        p.set_defaults(handler=handler)
        return p

    add("prepare", _cmd_prepare, "chunk the corpus under the token budget")

    p = add("translate", _cmd_translate, "produce intermediate translations")
    p.add_argument("--mode", choices=("sent", "doc", "both"), default="both")
    p.add_argument("--diverse", action="store_true",
                   help="sample with temperature 0.3 and top_p 0.7")

    p = add("score", _cmd_score, "score intermediate translations")
    p.add_argument("--translations", help="translations.jsonl path override")

    p = add("build-dataset", _cmd_build_dataset, "export weighted training data")
    p.add_argument("--stage", choices=("stage1", "stage2", "both"), default="both")
    p.add_argument("--translations", help="translations.jsonl path override")
    p.add_argument("--scores", help="scores.jsonl path override")
    p.add_argument("--min-weight", type=float, default=None,
                   help="floor applied to exported sentence weights")

    p = add("refine", _cmd_refine, "refine translation pairs into final output")
    p.add_argument("--translations", help="translations.jsonl path override")
    p.add_argument("--diverse", action="store_true")

    p = add("evaluate", _cmd_evaluate, "compute document-level metrics")
    p.add_argument("--hyp", help="hypothesis dir of <doc_id>.txt or JSONL file")
    p.add_argument("--system-name", default="system")
    p.add_argument("--bleu-tokenizer", choices=("13a", "intl"), default="13a")

    p = add("rerank", _cmd_rerank, "pick the better candidate per sentence")
    p.add_argument("--translations", help="translations.jsonl path override")
    p.add_argument("--refine-mode",
                   choices=("none", "as_sent_candidate", "as_doc_candidate"),
                   default="none")
    p.add_argument("--diverse", action="store_true")

    p = add("annotate", _cmd_annotate, "annotate hypothesis errors")
    p.add_argument("--hyp", required=True,
                   help="hypothesis dir of <doc_id>.txt or JSONL file")

    p = add("compare", _cmd_compare, "win/tie/loss between two score lists")
    p.add_argument("--scores-a", required=True)
    p.add_argument("--scores-b", required=True)
    p.add_argument("--tie-eps", type=float, default=None)

    p = add("stats", _cmd_stats, "histogram of a score list")
    p.add_argument("--scores", required=True)
    p.add_argument("--bin-width", type=float, required=True)

    return parser


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        return args.handler(args, cfg)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # pragma: no cover - last-resort diagnostics
        logger.exception("unexpected failure")
        return 2


def main() -> None:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    sys.exit(run_command())


if __name__ == "__main__":
    main()
