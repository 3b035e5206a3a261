"""Shared fixtures: a scripted localhost chat endpoint and corpus builders.

The chat server implements just enough of the chat-completions protocol
for the pipeline: deterministic echo-style replies derived from the
prompt, optional scripted failures, and concurrency tracking. Everything
is stdlib so the suite runs with no services installed.
"""

from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

MARKER_LINE = re.compile(r"^#(\d+): ?(.*)$")

# verdict lines appended by the acceptance gate, one per criterion
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def _marked_blocks(text: str) -> list[list[str]]:
    """Contiguous runs of marker lines found in the text."""
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        if MARKER_LINE.match(line):
            if current is None:
                current = []
                blocks.append(current)
            current.append(line)
        else:
            current = None
    return blocks


def default_reply(prompt: str) -> str:
    """Deterministic reply rule used by the echo chat server.

    - annotation prompts get a fixed well-formed error report
    - refinement prompts echo the last candidate block
    - document translation prompts echo the marked source block
    - sentence translation prompts uppercase the final line
    """
    if "[Error Types]:" in prompt:
        blocks = _marked_blocks(prompt)
        hyp_block = blocks[-1] if blocks else []
        parts = []
        for line in hyp_block:
            sid = MARKER_LINE.match(line).group(1)
            parts.append(
                f"Sentence #{sid} :\n"
                f"Error types: Omission\n"
                f"Explanation for errors: fixture explanation {sid}"
            )
        return "\n".join(parts)
    blocks = _marked_blocks(prompt)
    if "Improved translation:" in prompt and blocks:
        return "\n".join(blocks[-1])
    if blocks:
        return "\n".join(blocks[-1])
    lines = [l for l in prompt.splitlines() if l.strip()]
    return lines[-1].upper() if lines else ""


class _ChatHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # keep pytest output clean
        pass

    def do_POST(self):
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        with server.lock:
            server.calls += 1
            call_index = server.calls
            server.bodies.append(body)
            server.in_flight += 1
            server.peak_in_flight = max(server.peak_in_flight, server.in_flight)
        try:
            if server.delay:
                time.sleep(server.delay)
            if call_index <= server.fail_first_n:
                self._send(server.fail_status, {"error": "scripted failure"})
                return
            if server.raw_response is not None:
                self._send(200, server.raw_response)
                return
            prompt = body.get("messages", [{}])[0].get("content", "")
            reply = server.reply_fn(prompt)
            self._send(
                200,
                {"choices": [{"message": {"role": "assistant", "content": reply}}]},
            )
        finally:
            with server.lock:
                server.in_flight -= 1

    def _send(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class ChatServer:
    """Owns a ThreadingHTTPServer; exposes counters for assertions."""

    def __init__(self, reply_fn=default_reply):
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
        self._httpd.lock = threading.Lock()
        self._httpd.calls = 0
        self._httpd.bodies = []
        self._httpd.in_flight = 0
        self._httpd.peak_in_flight = 0
        self._httpd.fail_first_n = 0
        self._httpd.fail_status = 429
        self._httpd.delay = 0.0
        self._httpd.raw_response = None
        self._httpd.reply_fn = reply_fn
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address
        return f"http://{host}:{port}"

    @property
    def calls(self) -> int:
        return self._httpd.calls

    @property
    def bodies(self) -> list[dict]:
        return self._httpd.bodies

    @property
    def peak_in_flight(self) -> int:
        return self._httpd.peak_in_flight

    def configure(
        self,
        *,
        fail_first_n: int = 0,
        fail_status: int = 429,
        delay: float = 0.0,
        raw_response: dict | None = None,
    ):
        self._httpd.fail_first_n = fail_first_n
        self._httpd.fail_status = fail_status
        self._httpd.delay = delay
        self._httpd.raw_response = raw_response

    def reset(self):
        with self._httpd.lock:
            self._httpd.calls = 0
            self._httpd.bodies = []
            self._httpd.peak_in_flight = 0
        self.configure()

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def chat_server():
    server = ChatServer()
    yield server
    server.close()


# ---------------------------------------------------------------------------
# corpus builders


def write_jsonl_corpus(path, docs):
    """docs: list of (doc_id, src_sentences, ref_sentences)."""
    with open(path, "w", encoding="utf-8") as handle:
        for doc_id, src, ref in docs:
            handle.write(
                json.dumps(
                    {"doc_id": doc_id, "src": src, "ref": ref}, ensure_ascii=False
                )
                + "\n"
            )
    return path


THREE_DOC_CORPUS = [
    (
        "doc001",
        [
            "The committee met on Monday.",
            "It approved the new budget.",
            "The decision was unanimous.",
        ],
        [
            "Der Ausschuss tagte am Montag.",
            "Er genehmigte den neuen Haushalt.",
            "Die Entscheidung fiel einstimmig.",
        ],
    ),
    (
        "doc002",
        [
            "A storm reached the coast overnight.",
            "Ferries stayed in port until noon.",
        ],
        [
            "Ein Sturm erreichte die Kueste in der Nacht.",
            "Die Faehren blieben bis mittags im Hafen.",
        ],
    ),
    (
        "doc003",
        [
            "The museum opened a new wing.",
            "Visitors praised the light-filled halls.",
            "Tickets sold out within hours.",
            "A second exhibition is planned.",
        ],
        [
            "Das Museum eroeffnete einen neuen Fluegel.",
            "Besucher lobten die lichtdurchfluteten Saele.",
            "Die Karten waren binnen Stunden ausverkauft.",
            "Eine zweite Ausstellung ist geplant.",
        ],
    ),
]
