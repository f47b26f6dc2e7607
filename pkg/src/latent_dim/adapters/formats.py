"""Encode and decode the artifacts written by the studies.

Snapshot matrices use the LDSN binary format: the magic bytes `LDSN`, a u32
format version, the u64 row and column counts, the u64 generation seed and the
32 byte config digest, followed by the row-major payload of f64 values. Every
integer and float is little endian.

Tables and the split sizes of the snapshots are CSV files whose first lines are
`#` comments holding the format version, the config hash and the seed. Floats
are written with 17 significant digits so that equal numbers give equal bytes.
"""

import csv
import io
import struct
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, validator

from ..exceptions import SnapshotFormatError

SNAPSHOT_MAGIC = b"LDSN"
SNAPSHOT_FORMAT_VERSION = 1
CSV_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ32s")


class SnapshotMatrix(BaseModel):
    """Model the content of a snapshot file."""

    values: np.ndarray
    seed: int
    config_digest: bytes

    class Config:
        """Configure the pydantic model."""

        arbitrary_types_allowed = True

    @validator("values")
    @classmethod
    def _is_matrix(cls, values: np.ndarray) -> np.ndarray:
        if values.ndim != 2:
            raise ValueError("snapshot payloads are matrices")
        return values

    @validator("config_digest")
    @classmethod
    def _is_digest(cls, digest: bytes) -> bytes:
        if len(digest) != 32:
            raise ValueError("the config digest must have 32 bytes")
        return digest


def encode_snapshots(matrix: SnapshotMatrix) -> bytes:
    """Serialize a snapshot matrix in the LDSN format."""
    rows, cols = matrix.values.shape
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_FORMAT_VERSION,
        rows,
        cols,
        matrix.seed,
        matrix.config_digest,
    )
    payload = np.ascontiguousarray(matrix.values, dtype="<f8").tobytes()
    return header + payload


def decode_snapshots(data: bytes) -> SnapshotMatrix:
    """Parse a LDSN file.

    Raises:
        SnapshotFormatError: if the magic, the version or the size are wrong.
    """
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"File of {len(data)} bytes is too short for LDSN")
    magic, version, rows, cols, seed, digest = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"Wrong magic bytes {magic!r}, expected LDSN")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotFormatError(f"Unsupported snapshot format version {version}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise SnapshotFormatError(
            f"Payload of {len(data) - _HEADER.size} bytes for a {rows}x{cols} matrix"
        )
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    return SnapshotMatrix(values=values.astype(float), seed=seed, config_digest=digest)


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def format_csv(
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
    seed: int,
    comments: Optional[List[str]] = None,
) -> str:
    """Render a table as CSV text with its self describing header."""
    buffer = io.StringIO()
    buffer.write(f"# latent-dim csv format {CSV_FORMAT_VERSION}\n")
    buffer.write(f"# config_hash {config_hash}\n")
    buffer.write(f"# seed {seed}\n")
    for comment in comments or []:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(value) for value in row])
    return buffer.getvalue()


def parse_csv(text: str) -> List[List[str]]:
    """Return the header and data rows of a CSV written by `format_csv`."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.reader(lines))


def format_split(n_train: int, n_test: int, config_hash: str, seed: int) -> str:
    """Render the train/test split sizes with the CSV header."""
    return format_csv(["n_train", "n_test"], [(n_train, n_test)], config_hash, seed)


def parse_split(text: str) -> Tuple[int, int]:
    """Return the train and test sizes written by `format_split`.

    Raises:
        SnapshotFormatError: if the text is not a split file.
    """
    if not text.startswith(f"# latent-dim csv format {CSV_FORMAT_VERSION}\n"):
        raise SnapshotFormatError("The split file has no latent-dim header")
    rows = parse_csv(text)
    if len(rows) != 2 or rows[0] != ["n_train", "n_test"]:
        raise SnapshotFormatError(f"Malformed split file: {rows}")
    try:
        n_train, n_test = (int(value) for value in rows[1])
    except ValueError as error:
        raise SnapshotFormatError(f"Malformed split sizes: {rows[1]}") from error
    return n_train, n_test
