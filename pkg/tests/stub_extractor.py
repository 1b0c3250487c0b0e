"""Deterministic pseudo-embedding backend for tests.

``pseudo_vector`` is a pure function of (word, layer, dim) seeded from a
blake2 digest, so every test session and every process produces identical
embeddings. ``StubExtractorServer`` serves them over the extractor sidecar
wire format (POST /embed) with the documented error codes.
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

_PUNCT = ".,!?;:"


def pseudo_vector(word: str, layer: int, dim: int) -> np.ndarray:
    key = f"{word.casefold()}|{layer}".encode("utf-8")
    seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=dim)


def whitespace_words(sentence: str) -> list[str]:
    words = []
    for token in sentence.split():
        stripped = token.strip(_PUNCT).casefold()
        if stripped:
            words.append(stripped)
    return words


def corpus_jsonl(sentences: list[str], layers: list[int], dim: int) -> str:
    """Render the ingestion wire format for a toy corpus."""
    lines = []
    for line_no, sentence in enumerate(sentences):
        for word in whitespace_words(sentence):
            for layer in layers:
                lines.append(
                    json.dumps(
                        {
                            "word": word,
                            "context_id": str(line_no),
                            "layer": layer,
                            "vector": [float(x) for x in pseudo_vector(word, layer, dim)],
                        },
                        sort_keys=True,
                    )
                )
    return "\n".join(lines) + "\n"


def norms_csv(words: list[str], n_features: int = 5, lo: float = 0.0,
              hi: float = 6.0) -> str:
    """Synthetic norm file over ``words`` with deterministic ratings."""
    header = "word," + ",".join(f"F{i}" for i in range(n_features))
    rows = []
    for word in words:
        key = f"norm|{word.casefold()}".encode("utf-8")
        seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
        rng = np.random.default_rng(seed)
        values = rng.uniform(lo, hi, size=n_features)
        rows.append(word + "," + ",".join(repr(float(v)) for v in values))
    return "\n".join([header, *rows]) + "\n"


class _Handler(BaseHTTPRequestHandler):
    server: "StubExtractorServer"

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, body: dict) -> None:
        raw = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_POST(self):
        if self.path != "/embed":
            self._reply(404, {"error": "not_found", "detail": self.path})
            return
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length))
        sentence = request["sentence"]
        word = request["word"]
        occurrence = int(request.get("occurrence", 0))
        layer = int(request["layer"])

        srv = self.server
        if srv.known_models is not None and request["model_name"] not in srv.known_models:
            self._reply(404, {"error": "unknown_model",
                              "detail": f"no model {request['model_name']!r}"})
            return
        if not 0 <= layer <= srv.max_layer:
            self._reply(422, {"error": "layer_out_of_range",
                              "detail": f"layer {layer} outside [0, {srv.max_layer}]"})
            return
        count = whitespace_words(sentence).count(word.casefold())
        if count <= occurrence:
            self._reply(
                422,
                {"error": "word_not_found",
                 "detail": f"word {word!r} occurs {count} times in the sentence, "
                           f"occurrence {occurrence} requested"},
            )
            return
        vector = pseudo_vector(word, layer, srv.dim)
        self._reply(200, {"vector": [float(x) for x in vector], "dim": srv.dim})


class StubExtractorServer(ThreadingHTTPServer):
    """In-process extractor sidecar; use as a context manager."""

    def __init__(self, dim: int, max_layer: int = 12, known_models=None):
        super().__init__(("127.0.0.1", 0), _Handler)
        self.dim = dim
        self.max_layer = max_layer
        self.known_models = known_models
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"

    def __enter__(self) -> "StubExtractorServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()
        self.server_close()
        self._thread.join(timeout=5)
