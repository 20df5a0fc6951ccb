"""On-disk cache for extracted feature vectors, keyed by (image_id, flipped).

Layout: a directory holding ``index.json`` (key -> blob offset/length plus a
shared provenance header) and ``features.bin`` (little-endian float32,
concatenated). Blobs are append-only; the index is rewritten atomically, so
a crash mid-put leaves at worst an orphaned blob, never a corrupt index.

Values are stored as float32: callers get back exactly the float32 bits
they put in. Concurrent readers are safe against a single writer; writes
are serialized by an internal lock.
"""

import json
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import FeatureNotFoundError, ProvenanceConflictError
from .types import FeatureVector, Provenance

_INDEX_NAME = "index.json"
_BLOB_NAME = "features.bin"


def _key(image_id: str, flipped: bool) -> str:
    return f"{int(bool(flipped))}:{image_id}"


class FeatureStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index_path = self.root / _INDEX_NAME
        self._blob_path = self.root / _BLOB_NAME
        if self._index_path.exists():
            with self._index_path.open("r", encoding="utf-8") as fh:
                self._index = json.load(fh)
        else:
            self._index = {"format_version": 1, "dim": None, "provenance": None,
                           "entries": {}}
        if not self._blob_path.exists():
            self._blob_path.touch()

    def __len__(self):
        return len(self._index["entries"])

    def __contains__(self, key) -> bool:
        image_id, flipped = key
        return _key(image_id, flipped) in self._index["entries"]

    @property
    def dim(self):
        return self._index["dim"]

    @property
    def provenance(self):
        p = self._index["provenance"]
        return None if p is None else Provenance.from_dict(p)

    def _check_compatible(self, v: FeatureVector):
        if self._index["dim"] is None:
            return
        if v.dim != self._index["dim"]:
            raise ProvenanceConflictError(
                f"store holds dim {self._index['dim']}, got dim {v.dim}"
            )
        stored = Provenance.from_dict(self._index["provenance"])
        if not stored.compatible(v.provenance):
            raise ProvenanceConflictError(
                f"store provenance {stored} incompatible with {v.provenance}"
            )

    def _write_index(self):
        tmp = self._index_path.with_suffix(".json.tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            json.dump(self._index, fh, sort_keys=True)
        tmp.replace(self._index_path)

    def put(self, image_id: str, flipped: bool, v: FeatureVector) -> None:
        values = np.ascontiguousarray(v.values, dtype="<f4")
        with self._lock:
            self._check_compatible(v)
            raw = values.tobytes()
            with self._blob_path.open("ab") as fh:
                offset = fh.tell()
                fh.write(raw)
            if self._index["dim"] is None:
                self._index["dim"] = v.dim
                # The store spans both flips of one configuration.
                prov = replace(v.provenance, flipped=False)
                self._index["provenance"] = prov.to_dict()
            self._index["entries"][_key(image_id, flipped)] = {
                "offset": offset,
                "length": len(raw),
            }
            self._write_index()

    def get(self, image_id: str, flipped: bool) -> FeatureVector:
        entry = self._index["entries"].get(_key(image_id, flipped))
        if entry is None:
            raise FeatureNotFoundError((image_id, flipped))
        with self._blob_path.open("rb") as fh:
            fh.seek(entry["offset"])
            raw = fh.read(entry["length"])
        values = np.frombuffer(raw, dtype="<f4").copy()
        prov = replace(
            Provenance.from_dict(self._index["provenance"]), flipped=bool(flipped)
        )
        return FeatureVector(values, prov)
