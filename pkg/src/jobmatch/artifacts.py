"""Deterministic on-disk artifacts with integrity and freshness checks.

Every stage output is an envelope carrying a magic string, a format
version, the content hashes of its direct inputs, and the hash of its own
payload. Reruns with the same configuration must produce byte-identical
files, so JSON is canonicalised and zip members get a fixed timestamp.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import zipfile

import numpy as np

from .errors import ArtifactError

MAGIC_PREFIX = "jobmatch/"
FORMAT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def canonical_json(obj) -> str:
    """Stable text form: sorted keys, tight separators, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _envelope(kind: str, payload, inputs=None, meta=None) -> dict:
    return {
        "magic": MAGIC_PREFIX + kind,
        "format_version": FORMAT_VERSION,
        "inputs": dict(inputs or {}),
        "meta": dict(meta or {}),
        "payload": payload,
        "content_hash": sha256_text(canonical_json(payload)),
    }


def write_json_artifact(path: str, kind: str, payload, *, inputs=None,
                        meta=None) -> str:
    """Write an envelope and return its content hash."""
    env = _envelope(kind, payload, inputs, meta)
    write_text(path, canonical_json(env) + "\n")
    return env["content_hash"]


def _check_envelope(env: dict, kind: str, path: str) -> dict:
    magic = env.get("magic")
    if magic != MAGIC_PREFIX + kind:
        raise ArtifactError(
            f"{path}: expected a {MAGIC_PREFIX}{kind} artifact, found {magic!r}"
        )
    version = env.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: unsupported format_version {version!r} "
            f"(this build reads {FORMAT_VERSION})"
        )
    return env


def load_json_artifact(path: str, kind: str, *, expected_inputs=None) -> dict:
    """Load and verify an envelope; returns the whole envelope."""
    if not os.path.exists(path):
        raise ArtifactError(f"{path}: artifact not found; run its stage first")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            env = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: unreadable artifact ({exc})") from exc
    if not isinstance(env, dict):
        raise ArtifactError(f"{path}: artifact envelope must be an object")
    _check_envelope(env, kind, path)
    want = sha256_text(canonical_json(env.get("payload")))
    if env.get("content_hash") != want:
        raise ArtifactError(f"{path}: payload does not match its content_hash")
    if expected_inputs:
        check_inputs(env, expected_inputs, path)
    return env


def check_inputs(env: dict, expected: dict, name: str):
    """Fail when an artifact was built from different upstream content."""
    recorded = env.get("inputs", {})
    for key, want in expected.items():
        got = recorded.get(key)
        if got != want:
            raise ArtifactError(
                f"{name} is stale: it was built from {key} "
                f"{str(got)[:12]!r} but the current {key} is {want[:12]!r}; "
                f"re-run the stage that writes it"
            )


def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(array),
                              allow_pickle=False)
    return buf.getvalue()


def save_matrix_artifact(path: str, kind: str, arrays: dict, *, inputs=None,
                         meta=None) -> str:
    """Zip of .npy members plus an envelope, with fixed member timestamps
    so identical content means identical bytes. Returns the content hash."""
    blobs = {}
    meta = dict(meta or {})
    digest = hashlib.sha256()
    digest.update(canonical_json(meta).encode("utf-8"))
    for name in sorted(arrays):
        blob = _npy_bytes(np.asarray(arrays[name]))
        blobs[name + ".npy"] = blob
        digest.update(name.encode("utf-8"))
        digest.update(blob)
    content_hash = digest.hexdigest()
    env = {
        "magic": MAGIC_PREFIX + kind,
        "format_version": FORMAT_VERSION,
        "inputs": dict(inputs or {}),
        "meta": meta,
        "arrays": sorted(arrays),
        "content_hash": content_hash,
    }
    with open(path, "wb") as fh:
        with zipfile.ZipFile(fh, "w", compression=zipfile.ZIP_STORED) as zf:
            info = zipfile.ZipInfo("envelope.json", date_time=_ZIP_EPOCH)
            zf.writestr(info, canonical_json(env) + "\n")
            for name in sorted(blobs):
                info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
                zf.writestr(info, blobs[name])
    return content_hash


def load_matrix_artifact(path: str, kind: str, *, expected_inputs=None):
    """Returns (arrays dict, envelope) after verifying hashes."""
    if not os.path.exists(path):
        raise ArtifactError(f"{path}: artifact not found; run its stage first")
    try:
        with zipfile.ZipFile(path, "r") as zf:
            env = json.loads(zf.read("envelope.json").decode("utf-8"))
            _check_envelope(env, kind, path)
            arrays = {}
            digest = hashlib.sha256()
            digest.update(
                canonical_json(env.get("meta", {})).encode("utf-8"))
            for name in env["arrays"]:
                blob = zf.read(name + ".npy")
                digest.update(name.encode("utf-8"))
                digest.update(blob)
                arrays[name] = np.lib.format.read_array(
                    io.BytesIO(blob), allow_pickle=False
                )
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        raise ArtifactError(f"{path}: unreadable artifact ({exc})") from exc
    if digest.hexdigest() != env.get("content_hash"):
        raise ArtifactError(f"{path}: arrays do not match the content_hash")
    if expected_inputs:
        check_inputs(env, expected_inputs, path)
    return arrays, env
