"""HTTP clients for the assistant, grounder, and embedding services.

Endpoints come from POVO_ASSISTANT_URL, POVO_GROUNDER_URL and POVO_EMBED_URL
unless passed explicitly. Request/response schemas are documented with JSON
examples in the adapter README.
"""

from __future__ import annotations

import base64
import os
import time

import numpy as np
import requests

from .errors import DimDriftError, EmptyResponseError, EndpointError
from .parse import AssistantResponse, parse_object_list
from .rle import to_column_major

OBJECT_LIST_PROMPT = "List the object names in the scene"

ASSISTANT_URL_VAR = "POVO_ASSISTANT_URL"
GROUNDER_URL_VAR = "POVO_GROUNDER_URL"
EMBED_URL_VAR = "POVO_EMBED_URL"

_RETRIES = 2
_BACKOFF_S = 0.2


def _endpoint(explicit: str | None, env_var: str) -> str:
    url = explicit or os.environ.get(env_var)
    if not url:
        raise EndpointError(f"no endpoint configured; set {env_var} or pass a URL")
    return url


def _post(url: str, payload: dict) -> dict:
    last = None
    for attempt in range(_RETRIES + 1):
        try:
            response = requests.post(url, json=payload, timeout=60)
            if response.status_code == 200:
                return response.json()
            last = EndpointError(f"{url} returned HTTP {response.status_code}: {response.text[:200]}")
            if response.status_code < 500:
                raise last
        except requests.RequestException as exc:
            last = EndpointError(f"request to {url} failed: {exc}")
        if attempt < _RETRIES:
            time.sleep(_BACKOFF_S * (attempt + 1))
    raise last


def _encode_image(image_path) -> str:
    with open(image_path, "rb") as fh:
        return base64.b64encode(fh.read()).decode("ascii")


def list_objects(image_path, endpoint: str | None = None) -> AssistantResponse:
    """Ask the vision assistant for the objects in one image."""
    url = _endpoint(endpoint, ASSISTANT_URL_VAR)
    doc = _post(url, {"image": _encode_image(image_path), "prompt": OBJECT_LIST_PROMPT})
    text = doc.get("text", "")
    parsed = parse_object_list(text)
    if not parsed.parsed_labels:
        raise EmptyResponseError(f"assistant returned no object names for {image_path}")
    return parsed


def ground(image_path, labels, endpoint: str | None = None) -> list[dict]:
    """Ground labels in one image; only labels with at least one mask survive.

    Returns interchange-format mask dicts ({label, score, rle}) with RLEs
    re-encoded column-major regardless of what the service produced.
    """
    if not labels:
        raise ValueError("ground() needs a non-empty label list")
    url = _endpoint(endpoint, GROUNDER_URL_VAR)
    doc = _post(url, {"image": _encode_image(image_path), "labels": list(labels)})
    masks = []
    for det in doc.get("detections", []):
        if det["label"] not in labels:
            continue
        masks.append(
            {
                "label": det["label"],
                "score": float(det.get("score", 1.0)),
                "rle": to_column_major(
                    det["counts"], int(det["width"]), int(det["height"]),
                    det.get("order", "column-major"),
                ),
            }
        )
    return masks


def embed_labels(labels, endpoint: str | None = None, batch_size: int = 16) -> dict:
    """Embed labels in batches; returns the interchange embedding-table document."""
    if not labels:
        raise ValueError("embed_labels() needs a non-empty label list")
    url = _endpoint(endpoint, EMBED_URL_VAR)
    labels = list(labels)
    dim = None
    entries = []
    for start in range(0, len(labels), batch_size):
        batch = labels[start : start + batch_size]
        doc = _post(url, {"labels": batch})
        vectors = doc.get("vectors", [])
        if len(vectors) != len(batch):
            raise EndpointError(f"{url} returned {len(vectors)} vectors for {len(batch)} labels")
        for label, vec in zip(batch, vectors):
            vec = np.asarray(vec, dtype=np.float64)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise DimDriftError(
                    f"embedding dim drifted from {dim} to {vec.shape[0]} at label {label!r}"
                )
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise EndpointError(f"embedding service returned a zero vector for {label!r}")
            entries.append({"label": label, "vector": (vec / norm).tolist()})
    return {"dim": int(dim), "entries": entries}
