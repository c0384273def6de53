"""Bank file writer/reader implementing the engine's byte layout.

Independent implementation against the documented format (the service never
imports the engine): little-endian, 24-byte header (magic "MPAB", version
u32 = 1, dim u32, dtype u8 = 1 for binary32, 3 zero pad bytes, record count
u64), then fixed-stride records of class_id u32, item_id u32, view_id u16,
modality u8, reserved u8 = 0 and dim binary32 values.  The manifest is a
JSON sidecar at "<bank path>.manifest".
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"MPAB"
VERSION = 1
DTYPE_FLOAT32 = 1

MODALITY_RAW = 0
MODALITY_NATURAL = 1
MODALITY_GEOMETRIC = 2
MODALITY_SEMANTIC = 3
MODALITY_UNCERTAIN = 4

_HEADER = struct.Struct("<4sIIB3xQ")
_RECORD_PREFIX = struct.Struct("<IIHBB")


@dataclass
class BankRecord:
    class_id: int
    item_id: int
    view_id: int
    modality: int
    vector: list[float]


def write_bank_file(
    path,
    records: list[BankRecord],
    *,
    dataset_name: str,
    encoder_id: str,
    class_names: dict[int, str],
    metadata: dict[str, str] | None = None,
) -> None:
    if not records:
        raise ValueError("cannot write an empty bank")
    dim = len(records[0].vector)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, DTYPE_FLOAT32, len(records)))
        for rec in records:
            if len(rec.vector) != dim:
                raise ValueError("records must share one dimensionality")
            fh.write(
                _RECORD_PREFIX.pack(
                    rec.class_id, rec.item_id, rec.view_id, rec.modality, 0
                )
            )
            fh.write(np.asarray(rec.vector, dtype="<f4").tobytes())
    manifest = {
        "dataset_name": dataset_name,
        "encoder_id": encoder_id,
        "class_names": {str(k): v for k, v in sorted(class_names.items())},
        "metadata": dict(metadata or {}),
    }
    Path(str(path) + ".manifest").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def read_bank_file(path) -> tuple[list[BankRecord], dict]:
    blob = Path(path).read_bytes()
    magic, version, dim, dtype, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC or version != VERSION or dtype != DTYPE_FLOAT32:
        raise ValueError("not a supported bank file")
    records = []
    offset = _HEADER.size
    for _ in range(count):
        class_id, item_id, view_id, modality, _pad = _RECORD_PREFIX.unpack_from(
            blob, offset
        )
        offset += _RECORD_PREFIX.size
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
        records.append(
            BankRecord(class_id, item_id, view_id, modality, [float(x) for x in values])
        )
    manifest = json.loads(Path(str(path) + ".manifest").read_text(encoding="utf-8"))
    return records, manifest
