"""Binary container shared by stream, feature and checkpoint files.

Byte layout (all integers little-endian):

    offset  size  field
    0       8     magic  b"LIPWAVE\\0"
    8       4     format version (uint32), currently 1
    12      16    kind tag, ascii padded with NUL ("baseband", "phase",
                  "features", "checkpoint")
    28      8     header length H (uint64)
    36      H     header, UTF-8 JSON with sorted keys; header["arrays"]
                  lists {"name", "shape"} in on-disk order
    36+H    ...   the arrays, each C-order little-endian float64,
                  concatenated in declared order

Complex data is stored as separate real/imag arrays. Writers emit
deterministic bytes for identical inputs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LIPWAVE\0"
FORMAT_VERSION = 1
_KIND_BYTES = 16


def write_container(path: str | Path, kind: str, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    """Write named float64 arrays plus a JSON header under a kind tag."""
    kind_b = kind.encode("ascii")
    if len(kind_b) > _KIND_BYTES:
        raise ValueError("kind tag too long")
    header = dict(header)
    header["arrays"] = [{"name": name, "shape": list(arr.shape)} for name, arr in arrays]
    header_b = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(kind_b.ljust(_KIND_BYTES, b"\0"))
        fh.write(struct.pack("<Q", len(header_b)))
        fh.write(header_b)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path: str | Path, expected_kind: str | None = None) -> tuple[str, dict, dict[str, np.ndarray]]:
    """Read a container; returns (kind, header, {name: float64 array})."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a lipwave container")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        kind = fh.read(_KIND_BYTES).rstrip(b"\0").decode("ascii")
        if expected_kind is not None and kind != expected_kind:
            raise ValueError(f"{path}: expected kind {expected_kind!r}, found {kind!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            arrays[spec["name"]] = data.copy()
    return kind, header, arrays


# --- typed wrappers ---------------------------------------------------------


def write_baseband(path: str | Path, stream) -> None:
    from lipwave.demod import BasebandStream  # local import to avoid cycle

    assert isinstance(stream, BasebandStream)
    header = {
        "channel_count": stream.channel_count,
        "rate_hz": stream.rate_hz,
        "channel_frequencies_hz": list(map(float, stream.channel_frequencies_hz)),
        "warmup_samples": stream.warmup_samples,
        "tail_samples": stream.tail_samples,
    }
    write_container(path, "baseband", header,
                    [("real", stream.channels.real), ("imag", stream.channels.imag)])


def read_baseband(path: str | Path):
    from lipwave.demod import BasebandStream

    _, header, arrays = read_container(path, "baseband")
    return BasebandStream(
        arrays["real"] + 1j * arrays["imag"],
        header["rate_hz"],
        np.asarray(header["channel_frequencies_hz"]),
        warmup_samples=header["warmup_samples"],
        tail_samples=header["tail_samples"],
    )


def write_phase(path: str | Path, stream) -> None:
    from lipwave.demod import PhaseStream

    assert isinstance(stream, PhaseStream)
    header = {
        "rate_hz": stream.rate_hz,
        "warmup_samples": stream.warmup_samples,
        "tail_samples": stream.tail_samples,
    }
    write_container(path, "phase", header,
                    [("phase", stream.channels), ("unreliable", stream.unreliable.astype(np.float64))])


def read_phase(path: str | Path):
    from lipwave.demod import PhaseStream

    _, header, arrays = read_container(path, "phase")
    return PhaseStream(
        arrays["phase"],
        header["rate_hz"],
        unreliable=arrays["unreliable"] > 0.5,
        warmup_samples=header["warmup_samples"],
        tail_samples=header["tail_samples"],
    )


def write_features(path: str | Path, features, extra: dict | None = None) -> None:
    from lipwave.features import FeatureMatrix

    assert isinstance(features, FeatureMatrix)
    header = {"feature_choice": features.feature_choice, "rate_hz": features.rate_hz}
    if extra:
        header.update(extra)
    write_container(path, "features", header, [("values", features.values)])


def read_features(path: str | Path):
    from lipwave.features import FeatureMatrix

    _, header, arrays = read_container(path, "features")
    return FeatureMatrix(arrays["values"], header["feature_choice"], header["rate_hz"])
