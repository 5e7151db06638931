"""Chat-labeling client against a scripted local HTTP server."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from mapsmith.errors import LabelFormatError, NetworkError, UsageError
from mapsmith.llm import LlmConfig, llm_label, parse_numbered_reply

LONG = "A rugged terrain with two main areas, both covered in ground and patches of grass."
SHORTS = [
    "Two areas of ground and grass.",
    "Ground rooms joined by one corridor.",
    "Mostly ground with a grass fringe.",
    "Two linked rooms, simple open floor.",
    "Plain ground map with two rooms.",
]


def _reply(lines):
    return "\n".join(f"{i + 1}. {line}" for i, line in enumerate(lines))


def _valid_lines():
    longs = [f"{LONG} Variant number {n} of the set." for n in range(5)]
    return longs + SHORTS


class _ScriptedHandler(BaseHTTPRequestHandler):
    script = []
    requests_seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append(body)
        if not type(self).script:
            self.send_response(500)
            self.end_headers()
            return
        content = type(self).script.pop(0)
        payload = json.dumps({"choices": [{"message": {"content": content}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_chat():
    server = HTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ScriptedHandler.script = []
    _ScriptedHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()
    thread.join(timeout=2)


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("MAPSMITH_API_KEY", "test-key-123")


def test_happy_path_returns_five_five(mock_chat, api_key):
    _ScriptedHandler.script = [_reply(_valid_lines())]
    described = llm_label("describe this map", cfg=LlmConfig(endpoint=mock_chat))
    assert len(described.long) == 5 and len(described.short) == 5
    assert described.short[0] == SHORTS[0]
    body = _ScriptedHandler.requests_seen[0]
    assert body["messages"][0]["role"] == "system"
    assert body["messages"][1] == {"role": "user", "content": "describe this map"}


def test_nine_lines_retries_then_errors(mock_chat, api_key):
    nine = _reply(_valid_lines()[:9])
    _ScriptedHandler.script = [nine, nine]
    with pytest.raises(LabelFormatError) as err:
        llm_label("x", cfg=LlmConfig(endpoint=mock_chat, max_retries=2))
    assert len(_ScriptedHandler.requests_seen) == 2
    assert err.value.raw_response == nine
    # The retry carried a correction message after the bad reply.
    retry_messages = _ScriptedHandler.requests_seen[1]["messages"]
    assert retry_messages[-1]["role"] == "user"
    assert "invalid" in retry_messages[-1]["content"]


def test_overlong_short_triggers_retry_then_succeeds(mock_chat, api_key):
    lines = _valid_lines()
    lines[7] = " ".join(["word"] * 20)  # a 20-word "short" breaks the rules
    _ScriptedHandler.script = [_reply(lines), _reply(_valid_lines())]
    described = llm_label("x", cfg=LlmConfig(endpoint=mock_chat, max_retries=2))
    assert len(_ScriptedHandler.requests_seen) == 2
    assert described.violations() == []


def test_missing_api_key_is_usage_error(mock_chat, monkeypatch):
    monkeypatch.delenv("MAPSMITH_API_KEY", raising=False)
    with pytest.raises(UsageError, match="MAPSMITH_API_KEY"):
        llm_label("x", cfg=LlmConfig(endpoint=mock_chat))


def test_unreachable_endpoint_is_network_error(api_key):
    cfg = LlmConfig(endpoint="http://127.0.0.1:9/none", max_retries=2, timeout=0.5)
    with pytest.raises(NetworkError):
        llm_label("x", cfg=cfg)


def test_parse_rejects_shuffled_numbering():
    with pytest.raises(LabelFormatError, match="missing"):
        parse_numbered_reply(_reply(_valid_lines()[:5]))


def test_parse_accepts_varied_numbering_punctuation():
    lines = _valid_lines()
    text = "\n".join(
        f"{i + 1}{'.' if i % 2 == 0 else ')'} {line}" for i, line in enumerate(lines)
    )
    described = parse_numbered_reply(text)
    assert described.short == tuple(SHORTS)
