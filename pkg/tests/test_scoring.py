import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from docrefine.scoring import (
    MockScorerDouble,
    ScorerClient,
    ScorerConfig,
    ScorerError,
    fnv1a64,
    fold_unit,
    mock_embedding,
    mock_ppl,
    mock_score,
)


def oracle_fnv1a64(data: bytes) -> int:
    # independent transcription of the 64-bit FNV-1a definition
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class TestHashing:
    def test_empty_input_is_offset_basis(self):
        assert fnv1a64(b"") == 0xCBF29CE484222325

    def test_single_byte_known_vector(self):
        # published FNV-1a test vector for "a"
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C

    def test_matches_oracle_on_varied_inputs(self):
        samples = [b"", b"a", b"foobar", "Grüße|hällo|".encode("utf-8"), bytes(range(256))]
        for data in samples:
            assert fnv1a64(data) == oracle_fnv1a64(data)

    def test_fold_unit_range_and_scale(self):
        assert fold_unit(0) == 0.0
        assert 0.0 <= fold_unit(2**63) < 1.0
        assert fold_unit(2**63) == pytest.approx(0.5)
        # 2**64 - 1 is not representable in float64; the quotient rounds to 1.0
        assert fold_unit(2**64 - 1) <= 1.0


class TestMockFunctions:
    def test_score_composition(self):
        for src, mt, ref in [("s", "m", "r"), ("a b", "c d", ""), ("", "", "")]:
            expected = oracle_fnv1a64(f"{src}|{mt}|{ref}".encode("utf-8")) / 2**64
            assert mock_score(src, mt, ref) == expected

    def test_score_ref_defaults_empty(self):
        assert mock_score("s", "m") == mock_score("s", "m", "")

    def test_score_sensitive_to_each_field(self):
        base = mock_score("s", "m", "r")
        assert mock_score("s2", "m", "r") != base
        assert mock_score("s", "m2", "r") != base
        assert mock_score("s", "m", "r2") != base

    def test_embedding_unit_norm(self):
        for text in ["", "hello", "Grüße aus Köln"]:
            v = mock_embedding(text)
            assert len(v) == 16
            assert math.sqrt(sum(x * x for x in v)) == pytest.approx(1.0, abs=1e-9)

    def test_embedding_dim_parameter(self):
        assert len(mock_embedding("x", dim=4)) == 4

    def test_embedding_deterministic(self):
        assert mock_embedding("same text") == mock_embedding("same text")
        assert mock_embedding("one") != mock_embedding("two")

    def test_ppl_bounds(self):
        for text in ["", "a", "longer text here"]:
            p = mock_ppl(text)
            assert 1.0 <= p <= 100.0


class TestMockScorerDouble:
    def test_score_elementwise(self):
        double = MockScorerDouble()
        items = [{"src": "s1", "mt": "m1", "ref": "r1"}, {"src": "s2", "mt": "m2", "ref": "r2"}]
        assert double.score("da", items) == [
            mock_score("s1", "m1", "r1"),
            mock_score("s2", "m2", "r2"),
        ]

    def test_qe_ignores_missing_ref(self):
        double = MockScorerDouble()
        assert double.score("qe", [{"src": "s", "mt": "m"}]) == [mock_score("s", "m", "")]

    def test_da_requires_ref(self):
        with pytest.raises(ScorerError, match="ref"):
            MockScorerDouble().score("da", [{"src": "s", "mt": "m"}])

    def test_qe_forbids_ref(self):
        with pytest.raises(ScorerError, match="forbids"):
            MockScorerDouble().score("qe", [{"src": "s", "mt": "m", "ref": "r"}])

    def test_unknown_metric_rejected(self):
        with pytest.raises(ScorerError, match="metric"):
            MockScorerDouble().score("bleu", [{"src": "s", "mt": "m"}])

    def test_missing_fields_rejected(self):
        with pytest.raises(ScorerError, match="src/mt"):
            MockScorerDouble().score("qe", [{"mt": "m"}])

    def test_embed_and_ppl(self):
        double = MockScorerDouble()
        assert double.embed(["a", "b"]) == [mock_embedding("a"), mock_embedding("b")]
        assert double.ppl(["a"]) == [mock_ppl("a")]

    def test_health(self):
        assert MockScorerDouble().health() == {"status": "ok", "mode": "mock"}


class _ScorerHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _body(self):
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length).decode("utf-8"))

    def _send(self, status, payload, raw=None):
        data = raw if raw is not None else json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, {"status": "ok", "mode": "mock"})
        else:
            self._send(404, {"detail": "not found"})

    def do_POST(self):
        server = self.server
        with server.lock:
            server.request_count += 1
            mode = server.mode
        if mode == "break":
            self._send(500, {"detail": "internal"})
            return
        if mode == "garbage":
            self._send(200, None, raw=b"this is not json")
            return
        body = self._body()
        if self.path == "/v1/score":
            scores = [
                mock_score(i["src"], i["mt"], i.get("ref", "")) for i in body["items"]
            ]
            if mode == "short":
                scores = scores[:-1]
            self._send(200, {"scores": scores})
        elif self.path == "/v1/embed":
            self._send(200, {"embeddings": [mock_embedding(t) for t in body["texts"]]})
        elif self.path == "/v1/ppl":
            self._send(200, {"ppls": [mock_ppl(t) for t in body["texts"]]})
        else:
            self._send(404, {"detail": "not found"})


@pytest.fixture
def scorer_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScorerHandler)
    server.mode = "ok"
    server.request_count = 0
    server.lock = threading.Lock()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    server.base_url = f"http://127.0.0.1:{server.server_port}"
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


def client_for(scorer_server, **kwargs):
    return ScorerClient(ScorerConfig(base_url=scorer_server.base_url, **kwargs))


class TestScorerConfig:
    def test_validation(self):
        with pytest.raises(ScorerError):
            ScorerConfig(base_url="")
        with pytest.raises(ScorerError):
            ScorerConfig(base_url="http://x", timeout=0)
        with pytest.raises(ScorerError):
            ScorerConfig(base_url="http://x", batch_size=0)


class TestScorerClient:
    def test_matches_double(self, scorer_server):
        client = client_for(scorer_server)
        double = MockScorerDouble()
        items = [{"src": f"s{i}", "mt": f"m{i}", "ref": f"r{i}"} for i in range(7)]
        assert client.score("da", items) == double.score("da", items)
        texts = [f"t{i}" for i in range(5)]
        assert client.embed(texts) == double.embed(texts)
        assert client.ppl(texts) == double.ppl(texts)

    def test_batching_preserves_order(self, scorer_server):
        client = client_for(scorer_server, batch_size=3, max_in_flight=4)
        items = [{"src": f"s{i}", "mt": f"m{i}"} for i in range(10)]
        scores = client.score("qe", items)
        assert scores == [mock_score(f"s{i}", f"m{i}") for i in range(10)]
        assert scorer_server.request_count == 4

    def test_empty_input_sends_nothing(self, scorer_server):
        client = client_for(scorer_server)
        assert client.score("qe", []) == []
        assert client.embed([]) == []
        assert client.ppl([]) == []
        assert client.requests_sent == 0

    def test_client_side_validation_before_network(self, scorer_server):
        client = client_for(scorer_server)
        with pytest.raises(ScorerError, match="ref"):
            client.score("da", [{"src": "s", "mt": "m"}])
        assert client.requests_sent == 0

    def test_server_error_reported_with_status(self, scorer_server):
        scorer_server.mode = "break"
        client = client_for(scorer_server)
        with pytest.raises(ScorerError, match="500"):
            client.score("qe", [{"src": "s", "mt": "m"}])

    def test_malformed_json_reported(self, scorer_server):
        scorer_server.mode = "garbage"
        client = client_for(scorer_server)
        with pytest.raises(ScorerError, match="malformed"):
            client.score("qe", [{"src": "s", "mt": "m"}])

    def test_result_count_mismatch_reported(self, scorer_server):
        scorer_server.mode = "short"
        client = client_for(scorer_server)
        items = [{"src": f"s{i}", "mt": f"m{i}"} for i in range(3)]
        with pytest.raises(ScorerError, match="sent 3 items, got 2"):
            client.score("qe", items)

    def test_unreachable_host(self):
        client = ScorerClient(ScorerConfig(base_url="http://127.0.0.1:1", timeout=0.5))
        with pytest.raises(ScorerError, match="failed"):
            client.score("qe", [{"src": "s", "mt": "m"}])

    def test_health(self, scorer_server):
        client = client_for(scorer_server)
        assert client.health() == {"status": "ok", "mode": "mock"}
