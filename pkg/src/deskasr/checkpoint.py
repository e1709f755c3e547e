"""Parameter checkpoints: flat binary of little-endian float64 + sidecar manifest.

The binary file is the concatenation of every tensor's row-major bytes; the
manifest (``<binary>.json``) lists name, shape and byte offset per tensor plus
an arbitrary ``extra`` dict (model config, optimizer scalars, rng state).
Round trips are bit-exact, which is what the training determinism check relies
on, so nothing time- or environment-dependent may be written here.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from deskasr.errors import DataError


def manifest_path(bin_path: str | Path) -> Path:
    return Path(str(bin_path) + ".json")


def save_tensors(bin_path: str | Path, tensors: dict[str, np.ndarray], extra: dict | None = None) -> None:
    bin_path = Path(bin_path)
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        blob = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(b"".join(blobs))
    manifest = {"tensors": entries, "extra": extra or {}}
    manifest_path(bin_path).write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_tensors(bin_path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    bin_path = Path(bin_path)
    if not bin_path.exists():
        raise DataError(f"checkpoint binary not found: {bin_path}")
    mpath = manifest_path(bin_path)
    if not mpath.exists():
        raise DataError(f"checkpoint manifest not found: {mpath}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    raw = bin_path.read_bytes()
    out: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(raw):
            raise DataError(f"checkpoint truncated at tensor '{entry['name']}'")
        arr = np.frombuffer(raw[start:end], dtype="<f8").reshape(shape)
        out[entry["name"]] = arr.astype(np.float64)
    return out, manifest.get("extra", {})
