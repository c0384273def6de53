"""Embedding bank persistence: binary vector file + JSON manifest sidecar.

Byte layout (little-endian throughout):

    header, 24 bytes:
        magic      4 bytes   b"MPAB"
        version    u32       1
        dim        u32       vector length, >= 1
        dtype      u8        1 = IEEE-754 binary32
        pad        3 bytes   zero
        record_count u64

    record, 12 + 4*dim bytes, repeated record_count times:
        class_id   u32
        item_id    u32
        view_id    u16
        modality   u8        0 raw, 1 natural, 2 geometric, 3 semantic, 4 uncertain
        reserved   u8        zero
        vector     dim * f32

The manifest is a UTF-8 JSON file at ``<bank path>.manifest`` and must name
every class id that appears in the bank.  Vectors are stored binary32 and
widened to binary64 on read; the round-trip is bit-exact at binary32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    BankIoError,
    DimMismatchError,
    DuplicateRecordError,
    FormatError,
)
from .model import LabeledEmbedding, Modality

MAGIC = b"MPAB"
VERSION = 1
DTYPE_FLOAT32 = 1

_HEADER = struct.Struct("<4sIIB3xQ")
_RECORD_PREFIX = struct.Struct("<IIHBB")

HEADER_SIZE = _HEADER.size  # 24


def record_size(dim: int) -> int:
    return _RECORD_PREFIX.size + 4 * dim  # 12 + 4*dim


@dataclass
class Manifest:
    """Human-editable sidecar naming the classes and recording provenance."""

    dataset_name: str
    encoder_id: str
    class_names: dict[int, str]
    metadata: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "dataset_name": self.dataset_name,
            "encoder_id": self.encoder_id,
            "class_names": {str(k): v for k, v in sorted(self.class_names.items())},
            "metadata": dict(self.metadata),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            payload = json.loads(text)
            return cls(
                dataset_name=str(payload["dataset_name"]),
                encoder_id=str(payload["encoder_id"]),
                class_names={int(k): str(v) for k, v in payload["class_names"].items()},
                metadata={str(k): str(v) for k, v in payload.get("metadata", {}).items()},
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid manifest: {exc}") from exc


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest")


def write_bank(records, manifest: Manifest, path) -> None:
    """Persist records + manifest; round-trips bit-exactly through read_bank."""
    records = list(records)
    if not records:
        raise ValueError("cannot write an empty bank")
    dim = records[0].dim
    seen: set[tuple[int, int, int, int]] = set()
    for rec in records:
        if rec.dim != dim:
            raise DimMismatchError(
                f"record {rec.key} has dim {rec.dim}, bank dim is {dim}"
            )
        if rec.key in seen:
            raise DuplicateRecordError(f"duplicate record key {rec.key}")
        seen.add(rec.key)
        if rec.class_id not in manifest.class_names:
            raise FormatError(f"manifest has no name for class {rec.class_id}")

    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, dim, DTYPE_FLOAT32, len(records)))
            for rec in records:
                fh.write(
                    _RECORD_PREFIX.pack(
                        rec.class_id, rec.item_id, rec.view_id, int(rec.modality), 0
                    )
                )
                fh.write(rec.vector.astype("<f4").tobytes())
        manifest_path(path).write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise BankIoError(f"failed to write bank at {path}: {exc}") from exc


def read_bank(path) -> tuple[list[LabeledEmbedding], Manifest]:
    """Load records in file order, validating the header and file length."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"bank file not found: {path}")
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise BankIoError(f"failed to read bank at {path}: {exc}") from exc

    if len(blob) < HEADER_SIZE:
        raise FormatError("file shorter than the bank header")
    magic, version, dim, dtype, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if dim < 1:
        raise FormatError("dim must be at least 1")
    expected = HEADER_SIZE + count * record_size(dim)
    if len(blob) != expected:
        raise FormatError(
            f"file length {len(blob)} does not match {count} records of dim {dim}"
        )

    mpath = manifest_path(path)
    if not mpath.exists():
        raise FormatError(f"missing manifest sidecar: {mpath}")
    manifest = Manifest.from_json(mpath.read_text(encoding="utf-8"))

    records: list[LabeledEmbedding] = []
    offset = HEADER_SIZE
    for _ in range(count):
        class_id, item_id, view_id, modality, _reserved = _RECORD_PREFIX.unpack_from(
            blob, offset
        )
        offset += _RECORD_PREFIX.size
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
        if modality not in Modality._value2member_map_:
            raise FormatError(f"unknown modality code {modality}")
        if not np.all(np.isfinite(values)):
            raise FormatError("record contains non-finite values")
        if class_id not in manifest.class_names:
            raise FormatError(f"manifest has no name for class {class_id}")
        records.append(
            LabeledEmbedding(
                class_id=class_id,
                item_id=item_id,
                view_id=view_id,
                modality=Modality(modality),
                vector=values.astype(np.float64),
            )
        )
    return records, manifest


class Bank:
    """In-memory view of a bank with per-class and per-item indexes.

    Immutable after construction; concurrent readers need no locking.
    """

    def __init__(self, records, manifest: Manifest):
        self.records = list(records)
        if not self.records:
            raise ValueError("bank must contain at least one record")
        self.manifest = manifest
        self.dim = self.records[0].dim
        self._raw_items: dict[int, list[int]] = {}
        self._by_item: dict[tuple[int, int], list[LabeledEmbedding]] = {}
        self._semantic: dict[int, list[LabeledEmbedding]] = {}
        self._modalities: set[Modality] = set()
        for rec in self.records:
            self._modalities.add(rec.modality)
            if rec.modality == Modality.VISUAL_RAW:
                self._raw_items.setdefault(rec.class_id, []).append(rec.item_id)
            if rec.modality in (Modality.VISUAL_NATURAL, Modality.VISUAL_GEOMETRIC):
                self._by_item.setdefault((rec.class_id, rec.item_id), []).append(rec)
            if rec.modality == Modality.SEMANTIC:
                self._semantic.setdefault(rec.class_id, []).append(rec)
        self._raw_vectors = {
            (rec.class_id, rec.item_id): rec.vector
            for rec in self.records
            if rec.modality == Modality.VISUAL_RAW and rec.view_id == 0
        }
        for items in self._raw_items.values():
            items.sort()
        for rows in self._by_item.values():
            rows.sort(key=lambda r: (r.view_id, int(r.modality)))
        for rows in self._semantic.values():
            rows.sort(key=lambda r: (r.view_id, r.item_id))

    def class_ids(self) -> list[int]:
        """Classes that have at least one raw record, ascending."""
        return sorted(self._raw_items)

    def raw_item_ids(self, class_id: int) -> list[int]:
        return list(self._raw_items.get(class_id, []))

    def raw_vector(self, class_id: int, item_id: int) -> np.ndarray:
        try:
            return self._raw_vectors[(class_id, item_id)]
        except KeyError:
            raise FormatError(
                f"no raw record for class {class_id} item {item_id}"
            ) from None

    def view_rows(self, class_id: int, item_id: int) -> list[LabeledEmbedding]:
        return list(self._by_item.get((class_id, item_id), []))

    def semantic_rows(self, class_id: int) -> list[LabeledEmbedding]:
        return list(self._semantic.get(class_id, []))

    def has_modality(self, modality: Modality) -> bool:
        return modality in self._modalities

    def class_name(self, class_id: int) -> str:
        return self.manifest.class_names[class_id]


def load_bank(path) -> Bank:
    records, manifest = read_bank(path)
    return Bank(records, manifest)
