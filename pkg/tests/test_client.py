from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from wearlab.errors import ProtocolError, TransportError
from wearlab.prompts.client import ENDPOINT_ENV, HttpLlmClient, RetryPolicy, llm_score


class _Server:
    """Local HTTP server that replays a scripted list of (status, body) replies."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests: list[dict] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                outer.requests.append(json.loads(self.rfile.read(length)))
                status, body = outer.replies.pop(0) if len(outer.replies) > 1 else outer.replies[0]
                payload = body if isinstance(body, bytes) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


def _client(url, attempts=3):
    sleeps: list[float] = []
    client = HttpLlmClient(url, timeout=5.0, retry=RetryPolicy(attempts, 0.5, 2.0, 8.0),
                           sleep=sleeps.append)
    return client, sleeps


def test_score_roundtrip():
    with _Server([(200, {"log_likelihoods": [-0.5, -1.25]})]) as srv:
        client, sleeps = _client(srv.url)
        assert llm_score(client, "p", ["yes.", "no."]) == [-0.5, -1.25]
    assert srv.requests == [{"prompt": "p", "completions": ["yes.", "no."]}]
    assert sleeps == []


def test_complete_roundtrip():
    with _Server([(200, {"completion": "hello"})]) as srv:
        client, _ = _client(srv.url)
        assert client.complete("p") == "hello"
    assert srv.requests == [{"prompt": "p"}]


def test_server_errors_are_retried_with_backoff():
    replies = [(503, {}), (500, {}), (200, {"log_likelihoods": [-1.0]})]
    with _Server(replies) as srv:
        client, sleeps = _client(srv.url)
        assert client.score("p", ["x"]) == [-1.0]
    assert len(srv.requests) == 3 and sleeps == [0.5, 1.0]


def test_retries_exhausted_raise_transport_error():
    with _Server([(502, {})]) as srv:
        client, sleeps = _client(srv.url, attempts=4)
        with pytest.raises(TransportError):
            client.score("p", ["x"])
    assert len(srv.requests) == 4 and sleeps == [0.5, 1.0, 2.0]


def test_client_errors_are_not_retried():
    with _Server([(400, {"error": "bad"})]) as srv:
        client, _ = _client(srv.url)
        with pytest.raises(ProtocolError):
            client.score("p", ["x"])
    assert len(srv.requests) == 1


@pytest.mark.parametrize("body", [b"not json", b"[1, 2]", {"log_likelihoods": "x"},
                                  {"log_likelihoods": [None]}, {"other": 1}])
def test_malformed_responses(body):
    with _Server([(200, body)]) as srv:
        client, _ = _client(srv.url)
        with pytest.raises(ProtocolError):
            client.score("p", ["x"])


def test_wrong_length_or_non_finite_rejected():
    with _Server([(200, {"log_likelihoods": [-1.0]})]) as srv:
        client, _ = _client(srv.url)
        with pytest.raises(ProtocolError):
            llm_score(client, "p", ["yes.", "no."])


def test_unreachable_endpoint():
    client, sleeps = _client("http://127.0.0.1:9/none", attempts=2)
    with pytest.raises(TransportError):
        client.complete("p")
    assert sleeps == [0.5]


def test_endpoint_from_environment(monkeypatch):
    monkeypatch.setenv(ENDPOINT_ENV, "http://example.invalid/x")
    assert HttpLlmClient().endpoint == "http://example.invalid/x"
    monkeypatch.delenv(ENDPOINT_ENV)
    with pytest.raises(ProtocolError):
        HttpLlmClient()


def test_backoff_is_capped():
    assert RetryPolicy(6, 1.0, 3.0, 5.0).delays() == [1.0, 3.0, 5.0, 5.0, 5.0]
    assert RetryPolicy(1).delays() == []
