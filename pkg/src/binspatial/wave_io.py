"""Stereo WAV reading and writing.

Integer PCM is scaled by ``2 ** (bits - 1)`` so PCM16 maps onto
``[-1, 1 - 2**-15]``. Output is always 32-bit float.
"""

from __future__ import annotations

import os
import struct
import warnings

import numpy as np
from scipy.io import wavfile

from binspatial.errors import IoFailure, MalformedContainer, NotStereo, UnsupportedEncoding
from binspatial.signal import BinauralSignal

_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def _sniff_format(path) -> tuple[int, int]:
    """Return (format tag, bits per sample) from the RIFF ``fmt `` chunk."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] not in (b"RIFF", b"RIFX") or head[8:12] != b"WAVE":
            raise MalformedContainer(f"{path}: not a RIFF/WAVE file")
        endian = "<" if head[:4] == b"RIFF" else ">"
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                raise MalformedContainer(f"{path}: no fmt chunk")
            cid, size = chunk[:4], struct.unpack(endian + "I", chunk[4:])[0]
            if cid == b"fmt ":
                body = fh.read(size)
                if len(body) < 16:
                    raise MalformedContainer(f"{path}: truncated fmt chunk")
                tag, _, _, _, _, bits = struct.unpack(endian + "HHIIHH", body[:16])
                if tag == _EXTENSIBLE and len(body) >= 26:
                    tag = struct.unpack(endian + "H", body[24:26])[0]
                return tag, bits
            fh.seek(size + (size & 1), os.SEEK_CUR)


def _read_samples(path) -> tuple[np.ndarray, int]:
    try:
        tag, bits = _sniff_format(path)
    except FileNotFoundError as exc:
        raise IoFailure(f"{path}: no such file") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if (tag, bits) not in ((_PCM, 16), (_PCM, 24), (_FLOAT, 32)):
        raise UnsupportedEncoding(f"{path}: format tag {tag} with {bits} bits")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, EOFError, struct.error) as exc:
        raise MalformedContainer(f"{path}: {exc}") from exc
    if tag == _FLOAT:
        samples = data.astype(np.float64)
    elif bits == 16:
        samples = data.astype(np.float64) / 2.0**15
    else:
        # scipy left-justifies 24-bit samples in int32.
        samples = data.astype(np.float64) / 2.0**31
    if samples.ndim == 1:
        samples = samples[:, None]
    if not np.all(np.isfinite(samples)):
        raise MalformedContainer(f"{path}: non-finite samples")
    return samples, int(rate)


def read_wav(path) -> BinauralSignal:
    """Read a 2-channel PCM16, PCM24 or float32 WAV file."""
    samples, rate = _read_samples(path)
    if samples.shape[1] != 2:
        raise NotStereo(f"{path}: {samples.shape[1]} channel(s)")
    if samples.shape[0] < 1:
        raise MalformedContainer(f"{path}: no sample frames")
    return BinauralSignal(samples[:, 0], samples[:, 1], rate)


def read_mono(path) -> tuple[np.ndarray, int]:
    """Read any supported WAV file and average its channels to one."""
    samples, rate = _read_samples(path)
    return samples.mean(axis=1), rate


def write_wav(path, signal: BinauralSignal) -> None:
    """Write ``signal`` as a float32 stereo WAV."""
    data = np.stack([signal.left, signal.right], axis=1).astype(np.float32)
    try:
        wavfile.write(path, signal.sample_rate_hz, data)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
