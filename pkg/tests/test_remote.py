import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from claimstage.errors import RemoteContractError, RemoteTransportError, ValidationError
from claimstage.remote import RemoteEmbedder, RemoteEmbedderConfig


class _MockEmbedServer:
    """Scriptable /embed endpoint; each enqueued behavior serves one request."""

    def __init__(self):
        self.requests: list[dict] = []
        self.behaviors: list = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = json.loads(self.rfile.read(length))
                server.requests.append({"path": self.path, "body": body})
                behavior = server.behaviors.pop(0) if server.behaviors else server.echo
                status, payload = behavior(body)
                raw = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def log_message(self, *args):
                pass

        self.httpd = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @staticmethod
    def echo(body):
        """Default behavior: deterministic 4-dim vector per text."""
        vectors = [[float(len(t)), float(i), 1.0, 0.0] for i, t in enumerate(body["texts"])]
        return 200, {"dim": 4, "vectors": vectors}

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture()
def server():
    with _MockEmbedServer() as mock:
        yield mock


def _client(server, **kwargs) -> RemoteEmbedder:
    defaults = dict(endpoint=server.endpoint, model="test-model", batch_size=4,
                    backoff_base=0.01)
    defaults.update(kwargs)
    return RemoteEmbedder(RemoteEmbedderConfig(**defaults))


class TestFetchBatch:
    def test_empty_batch_makes_no_network_call(self, server):
        out = _client(server).fetch_batch([])
        assert out.shape == (0, 0)
        assert server.requests == []

    def test_vectors_returned_in_input_order(self, server):
        out = _client(server).fetch_batch(["a", "bb", "ccc"])
        assert out.shape == (3, 4)
        assert out[:, 1].tolist() == [0.0, 1.0, 2.0]   # server marks input position
        assert out[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_request_carries_model_and_path(self, server):
        _client(server).fetch_batch(["x"])
        assert server.requests[0]["path"] == "/embed"
        assert server.requests[0]["body"]["model"] == "test-model"

    def test_oversized_batch_rejected_before_any_call(self, server):
        with pytest.raises(ValidationError):
            _client(server).fetch_batch(["x"] * 5)
        assert server.requests == []

    def test_store_matches_fixture_oracle(self, server):
        texts = ["alpha", "beta"]
        out = _client(server).fetch_batch(texts)
        expected = np.array([[5.0, 0.0, 1.0, 0.0], [4.0, 1.0, 1.0, 0.0]], dtype=np.float32)
        assert np.array_equal(out, expected)


class TestContractViolations:
    def test_dim_change_across_batches_is_contract_error(self, server):
        client = _client(server, batch_size=2, max_attempts=1)
        server.behaviors = [
            lambda body: (200, {"dim": 4, "vectors": [[0.0] * 4] * len(body["texts"])}),
            lambda body: (200, {"dim": 2, "vectors": [[0.0] * 2] * len(body["texts"])}),
        ]
        with pytest.raises(RemoteContractError, match="dim changed across batches"):
            client.embed_all(["a", "b", "c"])

    def test_partial_response_fails_whole_batch(self, server):
        server.behaviors = [lambda body: (200, {"dim": 4, "vectors": [[0.0] * 4]})] * 3
        with pytest.raises(RemoteContractError, match="partial response"):
            _client(server).fetch_batch(["a", "b"])

    def test_ragged_vectors_rejected(self, server):
        server.behaviors = [
            lambda body: (200, {"dim": 4, "vectors": [[0.0] * 4, [0.0] * 3]})
        ] * 3
        with pytest.raises(RemoteContractError):
            _client(server).fetch_batch(["a", "b"])

    def test_missing_keys_rejected(self, server):
        server.behaviors = [lambda body: (200, {"oops": 1})] * 3
        with pytest.raises(RemoteContractError, match="missing dim/vectors"):
            _client(server).fetch_batch(["a"])


class TestRetryPolicy:
    def test_non_2xx_retried_then_fails(self, server):
        server.behaviors = [lambda body: (500, {"error": "boom"})] * 5
        with pytest.raises(RemoteTransportError, match="returned 500"):
            _client(server).fetch_batch(["a"])
        assert len(server.requests) == 3  # default max_attempts

    def test_recovers_after_transient_failure(self, server):
        server.behaviors = [lambda body: (503, {"error": "busy"})]
        out = _client(server).fetch_batch(["abc"])
        assert out.shape == (1, 4)
        assert len(server.requests) == 2

    def test_unreachable_endpoint_is_transport_error(self):
        config = RemoteEmbedderConfig(
            endpoint="http://127.0.0.1:1", model="m", max_attempts=2, backoff_base=0.01,
            timeout=0.5,
        )
        with pytest.raises(RemoteTransportError):
            RemoteEmbedder(config).fetch_batch(["x"])


class TestEmbedAll:
    def test_chunks_preserve_order_and_dim(self, server):
        client = _client(server, batch_size=2)
        out = client.embed_all(["a", "bb", "ccc", "dddd", "eeeee"])
        assert out.shape == (5, 4)
        assert out[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert len(server.requests) == 3

    def test_empty_input(self, server):
        assert _client(server).embed_all([]).shape == (0, 0)
        assert server.requests == []
