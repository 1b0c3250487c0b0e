"""On-disk store for contextual word embeddings.

Layout under the store directory:

    manifest.json          committed view: model name, dimensionality,
                           per-layer record counts
    layer_<L>.bin          little-endian float32 vectors, back to back
    layer_<L>.idx.jsonl    one JSON line per record: word, context_id,
                           byte offset into the .bin file

Appends are atomic per batch: data and index bytes are written first and
the manifest is replaced last (tmp file + rename), so readers only ever
see fully committed batches. Single writer, multiple readers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .norms import NormSpace

_FORMAT_VERSION = 1
_ITEM_BYTES = 4  # float32


class DimensionalityError(ValueError):
    """A record's vector length does not match the store."""


class UnknownLayerError(KeyError):
    """The requested layer holds no records."""


class StoreIntegrityError(RuntimeError):
    """Data files are shorter than the committed manifest claims."""


@dataclass(frozen=True)
class EmbeddingRecord:
    """One contextual embedding for a (word, context, layer) triple."""

    word: str
    context_id: str
    layer: int
    vector: np.ndarray

    @classmethod
    def from_json(cls, line: str) -> "EmbeddingRecord":
        raw = json.loads(line)
        return cls(
            word=str(raw["word"]),
            context_id=str(raw["context_id"]),
            layer=int(raw["layer"]),
            vector=np.asarray(raw["vector"], dtype=np.float32),
        )


@dataclass(frozen=True)
class WordAggregate:
    """Per-word mean vector over all contexts at one layer."""

    word: str
    layer: int
    mean_vector: np.ndarray
    context_count: int


@dataclass
class StoreManifest:
    model_name: str
    dimensionality: int
    record_count: dict[int, int] = field(default_factory=dict)
    format_version: int = _FORMAT_VERSION

    @property
    def layers(self) -> list[int]:
        return sorted(self.record_count)

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "model_name": self.model_name,
            "dimensionality": self.dimensionality,
            "layers": self.layers,
            "record_count": {str(k): v for k, v in sorted(self.record_count.items())},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StoreManifest":
        doc = json.loads(text)
        return cls(
            model_name=doc["model_name"],
            dimensionality=int(doc["dimensionality"]),
            record_count={int(k): int(v) for k, v in doc["record_count"].items()},
            format_version=int(doc["format_version"]),
        )


class EmbeddingStore:
    """Append-only embedding store rooted at a directory."""

    def __init__(self, root: Path, manifest: StoreManifest):
        self.root = root
        self.manifest = manifest

    @classmethod
    def create(cls, root: str | Path, model_name: str, dimensionality: int) -> "EmbeddingStore":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        if (root / "manifest.json").exists():
            raise FileExistsError(f"store already exists at {root}")
        store = cls(root, StoreManifest(model_name, dimensionality))
        store._write_manifest()
        return store

    @classmethod
    def open(cls, root: str | Path) -> "EmbeddingStore":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no store manifest at {manifest_path}")
        store = cls(root, StoreManifest.from_json(manifest_path.read_text(encoding="utf-8")))
        store._check_integrity()
        return store

    def _bin_path(self, layer: int) -> Path:
        return self.root / f"layer_{layer}.bin"

    def _idx_path(self, layer: int) -> Path:
        return self.root / f"layer_{layer}.idx.jsonl"

    def _write_manifest(self) -> None:
        tmp = self.root / "manifest.json.tmp"
        tmp.write_text(self.manifest.to_json() + "\n", encoding="utf-8")
        os.replace(tmp, self.root / "manifest.json")

    def _check_integrity(self) -> None:
        dim = self.manifest.dimensionality
        for layer, count in self.manifest.record_count.items():
            need = count * dim * _ITEM_BYTES
            bin_path = self._bin_path(layer)
            have = bin_path.stat().st_size if bin_path.exists() else 0
            if have < need:
                raise StoreIntegrityError(
                    f"{bin_path}: {have} bytes on disk, manifest commits {need}"
                )

    def append_records(self, records: Iterable[EmbeddingRecord]) -> StoreManifest:
        """Durably append a batch; either every record lands or none does.

        The whole batch is validated before any byte is written, so a
        dimensionality mismatch rejects the batch as a unit.
        """
        batch = list(records)
        dim = self.manifest.dimensionality
        for rec in batch:
            if rec.vector.shape != (dim,):
                raise DimensionalityError(
                    f"record for {rec.word!r} has dimension {rec.vector.shape}, "
                    f"store holds {dim}"
                )
            if rec.layer < 0:
                raise ValueError(f"negative layer {rec.layer}")
        if not batch:
            return self.manifest

        by_layer: dict[int, list[EmbeddingRecord]] = {}
        for rec in batch:
            by_layer.setdefault(rec.layer, []).append(rec)

        for layer, recs in sorted(by_layer.items()):
            committed = self.manifest.record_count.get(layer, 0)
            data_off = committed * dim * _ITEM_BYTES
            bin_path, idx_path = self._bin_path(layer), self._idx_path(layer)
            # Truncate past the committed point first: drops orphan bytes
            # from a previously interrupted append.
            with open(bin_path, "ab") as fh:
                fh.truncate(data_off)
            committed_idx_bytes = self._idx_committed_bytes(layer, committed)
            with open(idx_path, "ab") as fh:
                fh.truncate(committed_idx_bytes)

            with open(bin_path, "r+b") as data_fh, open(idx_path, "a", encoding="utf-8") as idx_fh:
                data_fh.seek(data_off)
                offset = data_off
                for rec in recs:
                    payload = np.ascontiguousarray(rec.vector, dtype="<f4").tobytes()
                    data_fh.write(payload)
                    idx_fh.write(
                        json.dumps(
                            {"word": rec.word.casefold(), "context_id": rec.context_id,
                             "offset": offset},
                            sort_keys=True,
                        )
                        + "\n"
                    )
                    offset += len(payload)
                data_fh.flush()
                os.fsync(data_fh.fileno())
                idx_fh.flush()
                os.fsync(idx_fh.fileno())
            self.manifest.record_count[layer] = committed + len(recs)

        self._write_manifest()
        return self.manifest

    def _idx_committed_bytes(self, layer: int, committed: int) -> int:
        idx_path = self._idx_path(layer)
        if not idx_path.exists() or committed == 0:
            return 0
        total = 0
        with open(idx_path, "rb") as fh:
            for i, line in enumerate(fh):
                if i >= committed:
                    break
                total += len(line)
        return total

    def iter_records(self, layer: int) -> Iterator[EmbeddingRecord]:
        """Committed records for a layer, in append order."""
        if layer not in self.manifest.record_count:
            raise UnknownLayerError(
                f"layer {layer} not in store; available: {self.manifest.layers}"
            )
        count = self.manifest.record_count[layer]
        dim = self.manifest.dimensionality
        data = np.memmap(self._bin_path(layer), dtype="<f4", mode="r",
                         shape=(count, dim))
        with open(self._idx_path(layer), encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if i >= count:
                    break
                entry = json.loads(line)
                yield EmbeddingRecord(
                    word=entry["word"],
                    context_id=entry["context_id"],
                    layer=layer,
                    vector=np.array(data[i]),
                )

    def aggregate(self, layer: int) -> list[WordAggregate]:
        """Arithmetic mean per distinct word at ``layer``.

        Accumulation runs in float64 regardless of the float32 storage.
        Results are sorted by word.
        """
        sums: dict[str, np.ndarray] = {}
        counts: dict[str, int] = {}
        dim = self.manifest.dimensionality
        for rec in self.iter_records(layer):
            if rec.word not in sums:
                sums[rec.word] = np.zeros(dim, dtype=np.float64)
                counts[rec.word] = 0
            sums[rec.word] += rec.vector.astype(np.float64)
            counts[rec.word] += 1
        out = []
        for word in sorted(sums):
            mean = sums[word] / counts[word]
            mean.setflags(write=False)
            out.append(WordAggregate(word=word, layer=layer, mean_vector=mean,
                                     context_count=counts[word]))
        return out


@dataclass(frozen=True)
class TrainingSet:
    """Paired (embedding, target) matrices, one row per word, sorted by word."""

    words: tuple[str, ...]
    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.words)


def build_training_pairs(aggregates: list[WordAggregate], space: NormSpace) -> TrainingSet:
    """Intersect aggregate words with the norm vocabulary (case-folded).

    Inputs are the mean embeddings, targets the norm vectors. Order is
    deterministic: sorted by word.
    """
    by_word = {agg.word.casefold(): agg for agg in aggregates}
    shared = sorted(set(by_word) & set(space.vocabulary))
    if not shared:
        raise ValueError(
            f"no overlap between {len(by_word)} aggregate words and "
            f"{len(space.vocabulary)} norm words"
        )
    inputs = np.stack([by_word[w].mean_vector for w in shared]).astype(np.float64)
    targets = np.stack([space.vocabulary[w] for w in shared]).astype(np.float64)
    return TrainingSet(words=tuple(shared), inputs=inputs, targets=targets)


def read_ingestion_jsonl(path: str | Path) -> Iterator[EmbeddingRecord]:
    """Parse the extractor wire format: one JSON record per line."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EmbeddingRecord.from_json(line)
