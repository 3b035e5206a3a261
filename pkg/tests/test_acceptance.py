"""Acceptance gate: one test per top-level requirement.

Each test prints a PASS/FAIL line on the real stdout so the verdicts
survive pytest's capture. Expected values come from independent in-test
oracles, never from the implementation under test.
"""

import functools
import json
import math
import random
import sys
import time
from collections import Counter

import pytest
import yaml

from docrefine.cli import run_command
from docrefine.corpus import Document, TokenizerSpec, reassemble, split_into_chunks
from docrefine.metrics import compare_systems, d_bleu, ltcr, ltcr_report, Lexicon
from docrefine.prompting import mark_sentences
from docrefine.quality import (
    RefinementQuintuple,
    WeightParams,
    build_dataset_records,
    expand_token_weights,
    instance_weight,
    sentence_weight,
    weighted_nll,
)
from docrefine.rerank import rerank_select
from docrefine.translate import parse_marked
from tests.conftest import (
    ACCEPTANCE_VERDICTS,
    THREE_DOC_CORPUS,
    ChatServer,
    write_jsonl_corpus,
)

WS = TokenizerSpec.whitespace()


def criterion(name):
    """Emit one pass/fail line per acceptance criterion.

    Lines are printed in-stream (visible under -s) and repeated in the
    terminal summary so they survive output capture.
    """

    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] FAIL {name}")
                ACCEPTANCE_VERDICTS.append(f"FAIL {name}")
                raise
            print(f"[ACCEPTANCE] PASS {name}")
            ACCEPTANCE_VERDICTS.append(f"PASS {name}")

        return inner

    return wrap


@criterion("chunking: budget, round-trip, no empties, oversize singleton, < 5 s")
def test_chunking_suite():
    rng = random.Random(20240925)
    start = time.perf_counter()
    docs = []
    for i in range(1000):
        n_sents = rng.randint(1, 40)
        sentences = tuple(("t " * rng.randint(1, 700)).rstrip() for _ in range(n_sents))
        docs.append(Document(f"doc{i:04d}", "en", sentences))

    for doc in docs:
        chunks = split_into_chunks(doc, budget=512, tok=WS)
        assert chunks, "document produced no chunks"
        for chunk in chunks:
            assert len(chunk.sentences) >= 1
            assert all(s for s in chunk.sentences)
            if len(chunk.sentences) > 1:
                assert sum(chunk.token_lengths) <= 512
        rebuilt = reassemble(chunks, [list(c.sentences) for c in chunks], lang=doc.lang)
        assert rebuilt.sentences == doc.sentences

    singleton = Document("big", "en", (("t " * 600).rstrip(),))
    outcome = split_into_chunks(singleton, budget=512, tok=WS)
    assert len(outcome) == 1
    assert outcome[0].sentences == singleton.sentences

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"chunking suite took {elapsed:.2f}s"


@criterion("weights: tabulated hand-oracle cases to 1e-9, 10,000-pair properties, < 2 s")
def test_weight_suite():
    start = time.perf_counter()

    def oracle(da_y, da_z, lam=3.75, eps=0.7):
        return 1.0 + lam * (max(da_y, da_z) - eps)

    tabulated = [
        ((0.70, 0.65), 1.0),
        ((1.00, 0.90), 2.125),
        ((0.60, 0.80), 1.375),
    ]
    for (da_y, da_z), expected in tabulated:
        assert abs(oracle(da_y, da_z) - expected) <= 1e-9, "oracle transcription broken"
        assert abs(sentence_weight(da_y, da_z) - oracle(da_y, da_z)) <= 1e-9

    # instance mode on sentence scores ((0.7, 1.0), (0.6, 0.9)): the hand
    # oracle averages each hypothesis then applies the same affine map,
    # 1 + 3.75 * (max(0.85, 0.75) - 0.7)
    instance_oracle = 1.0 + 3.75 * (max((0.7 + 1.0) / 2, (0.6 + 0.9) / 2) - 0.7)
    assert abs(instance_oracle - 1.5625) <= 1e-9
    got = instance_weight([0.7, 1.0], [0.6, 0.9], WeightParams(mode="instance_avg"))
    assert abs(got - instance_oracle) <= 1e-9

    rng = random.Random(77)
    pairs = [(rng.random(), rng.random()) for _ in range(10000)]
    for a, b in pairs:
        assert sentence_weight(a, b) == sentence_weight(b, a)
        assert abs(sentence_weight(a, b) - oracle(a, b)) <= 1e-9
    ordered = sorted(pairs, key=lambda ab: max(ab))
    previous = -math.inf
    for a, b in ordered:
        weight = sentence_weight(a, b)
        assert weight >= previous - 1e-12
        previous = weight

    elapsed = time.perf_counter() - start
    assert elapsed < 2.0, f"weight suite took {elapsed:.2f}s"


@criterion("loss: all-ones equals plain NLL to 1e-12; weight linearity to 1e-9 relative")
def test_loss_suite():
    rng = random.Random(123)
    for _ in range(1000):
        n = rng.randint(1, 80)
        logprobs = [-rng.random() * 10 for _ in range(n)]
        ref = [" ".join("t" for _ in range(n))]
        ones = expand_token_weights(ref, [1.0], WS)
        assert abs(weighted_nll(logprobs, ones) - (-sum(logprobs))) <= 1e-12

        weights = [rng.random() * 4 + 0.01 for _ in range(n)]
        vector = expand_token_weights([" ".join("t" for _ in range(1))] * n, weights, WS)
        base = weighted_nll(logprobs, vector)
        scale = rng.random() * 9 + 0.1
        scaled_vector = expand_token_weights(
            ["t"] * n, [scale * w for w in weights], WS
        )
        scaled = weighted_nll(logprobs, scaled_vector)
        assert abs(scaled - scale * base) <= 1e-9 * abs(scale * base)


@criterion("augmentation: 2 records per quintuple, shared target bytes, swap flags, stage-1 all ones")
def test_augmentation_suite():
    rng = random.Random(5150)
    quintuples = []
    for k in range(20):
        n = rng.randint(1, 5)
        quintuples.append(
            RefinementQuintuple(
                src=tuple(f"src {k} {i}" for i in range(n)),
                y=tuple(f"y {k} {i}" for i in range(n)),
                z=tuple(f"z {k} {i}" for i in range(n)),
                weights=tuple(1 + rng.random() for _ in range(n)),
                ref=tuple(f"ref {k} {i}" for i in range(n)),
                doc_id=f"doc{k}",
                chunk_index=0,
            )
        )

    stage2 = build_dataset_records(quintuples, "stage2_qa")
    assert len(stage2) == 2 * len(quintuples)
    for first, second in zip(stage2[0::2], stage2[1::2]):
        assert first.target.encode("utf-8") == second.target.encode("utf-8")
        assert (first.meta["swapped"], second.meta["swapped"]) == (False, True)
        assert first.prompt != second.prompt

    stage1 = build_dataset_records(quintuples, "stage1_naive")
    assert len(stage1) == 2 * len(quintuples)
    assert all(w == 1.0 for record in stage1 for w in record.sentence_weights)


@criterion("parser: 1,000 marker round-trips; missing/duplicate/overflow/no-marker repairs")
def test_parser_suite():
    rng = random.Random(31337)
    alphabet = "abcdefghijklmnopqrstuvwxyz ,.!?"
    for _ in range(1000):
        n = rng.randint(1, 10)
        segments = []
        for _ in range(n):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
            text = text.strip() or "x"
            segments.append(text)
        parsed, report = parse_marked(mark_sentences(segments), n)
        assert parsed == segments
        assert not report.repaired
        assert report.found_n == n
        assert report.missing_ids == () and report.duplicate_ids == ()

    segments, report = parse_marked("#1: X.", 2)
    assert segments == ["X.", ""]
    assert report.missing_ids == (2,) and report.repaired and report.found_n == 1

    segments, report = parse_marked("#1: A.\n#1: A2.\n#2: B.", 2)
    assert segments == ["A.", "B."]
    assert report.duplicate_ids == (1,) and report.repaired

    segments, report = parse_marked("#1: A.\n#2: B.\n#3: C.", 2)
    assert segments == ["A.", "B. C."]
    assert report.repaired and report.found_n == 3

    segments, report = parse_marked("Sure, here is prose with no markers.", 3)
    assert segments == ["Sure, here is prose with no markers.", "", ""]
    assert report.found_n == 1 and report.missing_ids == (2, 3) and report.repaired


@criterion("d-BLEU: identity exactly 100.0; brute-force oracle within 0.1 on 50 corpora, < 10 s")
def test_dbleu_suite():
    start = time.perf_counter()

    def oracle_bleu(hyp_token_lists, ref_token_lists):
        numer = [0] * 4
        denom = [0] * 4
        hyp_len = ref_len = 0
        for hyp, ref in zip(hyp_token_lists, ref_token_lists):
            hyp_len += len(hyp)
            ref_len += len(ref)
            for n in range(1, 5):
                hyp_ngrams = Counter(
                    tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1)
                )
                ref_ngrams = Counter(
                    tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)
                )
                denom[n - 1] += max(0, len(hyp) - n + 1)
                numer[n - 1] += sum(
                    min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items()
                )
        if 0 in denom or 0 in numer:
            return 0.0
        geo = math.exp(sum(math.log(a / b) for a, b in zip(numer, denom)) / 4.0)
        bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
        return 100.0 * bp * geo

    rng = random.Random(2718)
    vocab = [f"w{i}" for i in range(15)]

    identity = [
        Document("a", "en", ("alpha beta gamma", "delta epsilon")),
        Document("b", "en", ("one two three four five",)),
    ]
    assert d_bleu(identity, identity) == 100.0

    for trial in range(50):
        hyp_docs, ref_docs, hyp_tokens, ref_tokens = [], [], [], []
        for d in range(rng.randint(1, 5)):
            n_sents = rng.randint(1, 5)
            ref_sents = [
                " ".join(rng.choice(vocab) for _ in range(rng.randint(4, 10)))
                for _ in range(n_sents)
            ]
            hyp_sents = []
            for sent in ref_sents:
                words = sent.split()
                while rng.random() < 0.5:
                    words[rng.randrange(len(words))] = rng.choice(vocab)
                hyp_sents.append(" ".join(words))
            doc_id = f"d{d}"
            hyp_docs.append(Document(doc_id, "en", tuple(hyp_sents)))
            ref_docs.append(Document(doc_id, "en", tuple(ref_sents)))
            hyp_tokens.append(" ".join(hyp_sents).split())
            ref_tokens.append(" ".join(ref_sents).split())
        got = d_bleu(hyp_docs, ref_docs)
        want = oracle_bleu(hyp_tokens, ref_tokens)
        assert abs(got - want) <= 0.1, f"trial {trial}: {got} vs oracle {want}"
        assert d_bleu(hyp_docs, hyp_docs) == 100.0

    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"d-BLEU suite took {elapsed:.2f}s"


@criterion("LTCR: 1.0 / 0.0 / one-third fixtures; invariant under 100 document shuffles")
def test_ltcr_suite():
    lexicon = Lexicon({"laufband": ("treadmill", "running machine")})

    src = [Document("a", "de", ("das Laufband hier", "wo ist das Laufband"))]
    hyp_same = [Document("a", "en", ("the treadmill here", "near the treadmill"))]
    assert ltcr(src, hyp_same, lexicon) == 1.0

    hyp_diff = [Document("a", "en", ("the treadmill here", "near the running machine"))]
    assert ltcr(src, hyp_diff, lexicon) == 0.0

    src3 = [Document("a", "de", ("Laufband 1", "Laufband 2", "Laufband 3"))]
    hyp3 = [Document("a", "en", ("treadmill 1", "treadmill 2", "running machine 3"))]
    report = ltcr_report(src3, hyp3, lexicon)
    assert report.value == pytest.approx(1 / 3)
    assert report.total_pairs == 3 and report.consistent_pairs == 1

    rng = random.Random(404)
    src_docs = []
    hyp_docs = []
    for i in range(8):
        n = rng.randint(2, 5)
        src_docs.append(
            Document(f"d{i}", "de", tuple(f"Laufband satz {j}" for j in range(n)))
        )
        hyp_docs.append(
            Document(
                f"d{i}",
                "en",
                tuple(
                    ("treadmill" if rng.random() < 0.5 else "running machine") + f" {j}"
                    for j in range(n)
                ),
            )
        )
    base = ltcr(src_docs, hyp_docs, lexicon)
    order = list(range(len(src_docs)))
    for _ in range(100):
        rng.shuffle(order)
        shuffled = ltcr(
            [src_docs[i] for i in order], [hyp_docs[i] for i in order], lexicon
        )
        assert shuffled == base


@criterion("rerank: per-index argmax on 1,000 pairs; positive-scaling invariance; fixed tie rule")
def test_rerank_suite():
    rng = random.Random(9090)
    n = 1000
    y = [f"y{i}" for i in range(n)]
    z = [f"z{i}" for i in range(n)]
    kiwi_y = [rng.random() for _ in range(n)]
    kiwi_z = [rng.random() for _ in range(n)]
    # force exact ties at a few indices to pin the tie rule
    for i in range(0, n, 97):
        kiwi_z[i] = kiwi_y[i]

    selected = rerank_select(y, z, kiwi_y, kiwi_z)
    for i in range(n):
        if kiwi_y[i] > kiwi_z[i]:
            assert selected[i] == y[i]
        elif kiwi_y[i] < kiwi_z[i]:
            assert selected[i] == z[i]
        else:
            assert selected[i] == y[i], "tie must keep the first candidate list"

    for _ in range(5):
        c = rng.random() * 999 + 0.001
        assert rerank_select(y, z, [c * s for s in kiwi_y], [c * s for s in kiwi_z]) == selected


@criterion("compare: win+tie+loss == N always; 0.0005 difference ties at eps 0.001")
def test_compare_suite():
    rng = random.Random(616)
    for _ in range(50):
        n = rng.randint(1, 400)
        a = [rng.random() for _ in range(n)]
        b = [rng.random() for _ in range(n)]
        eps = rng.choice([0.0, 0.001, 0.05])
        outcome = compare_systems(a, b, eps)
        assert outcome.wins + outcome.ties + outcome.losses == n

    outcome = compare_systems([0.8005], [0.8000], tie_eps=0.001)
    assert (outcome.wins, outcome.ties, outcome.losses) == (0, 1, 0)


@criterion("end-to-end: prepare/translate/score/build-dataset/refine/evaluate, rerun byte-identical, < 30 s")
def test_end_to_end_suite(tmp_path):
    start = time.perf_counter()
    secondary_loaded_before = "scorer_service" in sys.modules
    server = ChatServer()
    try:
        corpus = write_jsonl_corpus(tmp_path / "corpus.jsonl", THREE_DOC_CORPUS)
        out = tmp_path / "out"
        config = tmp_path / "run.yaml"
        config.write_text(
            yaml.safe_dump(
                {
                    "corpus": {
                        "src": str(corpus),
                        "src_lang": "English",
                        "tgt_lang": "German",
                    },
                    "output_dir": str(out),
                    "endpoints": {
                        "translator": {
                            "base_url": server.base_url,
                            "backoff_base": 0.01,
                        },
                        "scorer": {"base_url": "mock"},
                    },
                }
            ),
            encoding="utf-8",
        )

        hyp_dir = tmp_path / "ref-hyps"
        hyp_dir.mkdir()
        for doc_id, _, ref in THREE_DOC_CORPUS:
            (hyp_dir / f"{doc_id}.txt").write_text(
                "\n".join(ref) + "\n", encoding="utf-8"
            )

        steps = [
            ["prepare"],
            ["translate", "--mode", "both"],
            ["score"],
            ["build-dataset", "--stage", "both"],
            ["refine"],
            ["evaluate", "--hyp", str(hyp_dir), "--system-name", "identity"],
        ]

        def run_pipeline():
            for step in steps:
                code = run_command([step[0], "--config", str(config), *step[1:]])
                assert code == 0, f"step {step} exited {code}"

        run_pipeline()
        artifacts = sorted(p for p in out.rglob("*") if p.is_file())
        assert artifacts, "pipeline produced no artifacts"
        first_run = {p: p.read_bytes() for p in artifacts}
        manifests = [p for p in artifacts if p.name.startswith("manifest-")]
        assert len(manifests) == 6

        run_pipeline()
        second_artifacts = sorted(p for p in out.rglob("*") if p.is_file())
        assert second_artifacts == artifacts
        for path in artifacts:
            assert path.read_bytes() == first_run[path], f"{path} changed between runs"

        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["d_bleu"] == 100.0

        # the whole flow must run on the client-side scorer double; other
        # suites may import the service package, so compare against the
        # snapshot taken before the pipeline ran
        assert ("scorer_service" in sys.modules) == secondary_loaded_before
    finally:
        server.close()

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"end-to-end suite took {elapsed:.2f}s"
