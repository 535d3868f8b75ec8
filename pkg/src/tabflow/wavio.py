"""Minimal RIFF/WAVE reader and writer.

Mono only; PCM 16-bit integer and IEEE 32-bit float encodings. The float
encoding round-trips bit exactly. An optional comment string is stored in a
LIST/INFO ICMT chunk (used to embed the pipeline config hash); readers that
do not know the chunk skip it.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

_FMT_PCM = 1
_FMT_FLOAT = 3


def write_wav(path, samples: np.ndarray, sample_rate: int, encoding: str = "float32",
              comment: str | None = None) -> None:
    """Write a mono WAV file. encoding is 'float32' or 'int16'."""
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise DataError(f"expected mono 1-D samples, got shape {samples.shape}")
    if encoding == "float32":
        data = samples.astype("<f4", copy=False).tobytes()
        fmt_tag, bits = _FMT_FLOAT, 32
    elif encoding == "int16":
        clipped = np.clip(samples, -1.0, 1.0)
        data = np.round(clipped * 32767.0).astype("<i2").tobytes()
        fmt_tag, bits = _FMT_PCM, 16
    else:
        raise DataError(f"unknown WAV encoding {encoding!r}")

    block_align = bits // 8
    fmt_chunk = struct.pack("<HHIIHH", fmt_tag, 1, sample_rate,
                            sample_rate * block_align, block_align, bits)
    chunks = [(b"fmt ", fmt_chunk)]
    if comment is not None:
        text = comment.encode("utf-8") + b"\x00"
        info = b"INFO" + b"ICMT" + struct.pack("<I", len(text)) + text
        if len(text) % 2:
            info += b"\x00"
        chunks.append((b"LIST", info))
    chunks.append((b"data", data))

    body = b"WAVE"
    for tag, payload in chunks:
        body += tag + struct.pack("<I", len(payload)) + payload
        if len(payload) % 2:
            body += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono WAV file; returns (samples, sample_rate).

    float32 data is returned untouched; int16 is scaled by 1/32767.
    """
    samples, rate, _ = read_wav_with_comment(path)
    return samples, rate


def read_wav_with_comment(path) -> tuple[np.ndarray, int, str | None]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise DataError(f"{path}: not a RIFF/WAVE file")

    pos = 12
    fmt = None
    data = None
    comment = None
    while pos + 8 <= len(blob):
        tag = blob[pos:pos + 4]
        size = struct.unpack_from("<I", blob, pos + 4)[0]
        payload = blob[pos + 8:pos + 8 + size]
        if tag == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", payload)
        elif tag == b"data":
            data = payload
        elif tag == b"LIST" and payload[:4] == b"INFO":
            p = 4
            while p + 8 <= len(payload):
                sub, sublen = payload[p:p + 4], struct.unpack_from("<I", payload, p + 4)[0]
                if sub == b"ICMT":
                    comment = payload[p + 8:p + 8 + sublen].rstrip(b"\x00").decode("utf-8")
                p += 8 + sublen + (sublen % 2)
        pos += 8 + size + (size % 2)

    if fmt is None or data is None:
        raise DataError(f"{path}: missing fmt or data chunk")
    fmt_tag, channels, rate, _, _, bits = fmt
    if channels != 1:
        raise DataError(f"{path}: expected mono, got {channels} channels")
    if fmt_tag == _FMT_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4")
    elif fmt_tag == _FMT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32767.0
    else:
        raise DataError(f"{path}: unsupported format tag {fmt_tag} / {bits} bits")
    return samples.copy(), rate, comment
