"""Deterministic in-process mock of the assistant/grounder/embedding services."""

from __future__ import annotations

import base64
import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

WIDTH, HEIGHT = 640, 480

ASSISTANT_TEXT = {
    b"imageA": "1. chair\n2. wooden table\n3. unicorn",
    b"imageB": "a lamp, the chair, chair",
}

# labels the grounder can actually find; 'unicorn' is a hallucination
GROUNDABLE = {"chair", "wooden table", "lamp"}


def band_mask_row_major(row_start, row_end):
    bitmap = np.zeros((HEIGHT, WIDTH), dtype=bool)
    bitmap[row_start:row_end] = True
    flat = bitmap.ravel(order="C")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return bitmap, counts


def block_mask_column_major(col_start, col_end):
    bitmap = np.zeros((HEIGHT, WIDTH), dtype=bool)
    bitmap[:, col_start:col_end] = True
    flat = bitmap.ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return bitmap, counts


CHAIR_BITMAP, CHAIR_COUNTS_ROW_MAJOR = band_mask_row_major(100, 200)
_, OTHER_COUNTS_ROW_MAJOR = band_mask_row_major(250, 300)
_, TABLE_COUNTS_COL_MAJOR = block_mask_column_major(50, 150)
_, LAMP_COUNTS_COL_MAJOR = block_mask_column_major(400, 500)


def deterministic_vector(label: str, dim: int = 8) -> list[float]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.normal(size=dim)
    return (vec / np.linalg.norm(vec)).tolist()


class MockServices:
    """HTTP server exposing /assistant, /grounder, /embed with canned answers."""

    def __init__(self, drift_embeddings: bool = False):
        self.requests: list[tuple[str, dict]] = []
        self.drift_embeddings = drift_embeddings
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers["Content-Length"])
                payload = json.loads(self.rfile.read(length))
                outer.requests.append((self.path, payload))
                body = json.dumps(outer.respond(self.path, payload)).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def respond(self, path: str, payload: dict) -> dict:
        if path == "/assistant":
            image = base64.b64decode(payload["image"])
            return {"text": ASSISTANT_TEXT.get(image, "")}
        if path == "/grounder":
            detections = []
            for label in payload["labels"]:
                if label not in GROUNDABLE:
                    continue
                if label == "chair":  # two instances, row-major runs
                    detections.append({
                        "label": "chair", "score": 0.95, "order": "row-major",
                        "counts": CHAIR_COUNTS_ROW_MAJOR,
                        "width": WIDTH, "height": HEIGHT,
                    })
                    detections.append({
                        "label": "chair", "score": 0.8, "order": "row-major",
                        "counts": OTHER_COUNTS_ROW_MAJOR,
                        "width": WIDTH, "height": HEIGHT,
                    })
                elif label == "wooden table":
                    detections.append({
                        "label": "wooden table", "score": 0.9,
                        "order": "column-major",
                        "counts": TABLE_COUNTS_COL_MAJOR,
                        "width": WIDTH, "height": HEIGHT,
                    })
                elif label == "lamp":
                    detections.append({
                        "label": "lamp", "score": 0.85, "order": "column-major",
                        "counts": LAMP_COUNTS_COL_MAJOR,
                        "width": WIDTH, "height": HEIGHT,
                    })
            return {"detections": detections}
        if path == "/embed":
            dim = 8
            vectors = []
            for idx, label in enumerate(payload["labels"]):
                d = dim + 1 if (self.drift_embeddings and idx % 2) else dim
                vectors.append(deterministic_vector(label, d))
            return {"vectors": vectors}
        raise AssertionError(f"unexpected path {path}")

    def __enter__(self):
        self.thread.start()
        host, port = self.server.server_address
        self.base = f"http://{host}:{port}"
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    @property
    def assistant_url(self):
        return f"{self.base}/assistant"

    @property
    def grounder_url(self):
        return f"{self.base}/grounder"

    @property
    def embed_url(self):
        return f"{self.base}/embed"
