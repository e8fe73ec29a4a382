"""Minimal AVI (RIFF) muxer/demuxer for MJPEG video with PCM audio.

Backs the builtin media toolkit so the pipeline can run hermetically where
no external media executable is installed. Files are standard enough for
common players; the reader loads the whole file into memory, which is fine
for the short sources this backend targets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import cv2
import numpy as np

AVIF_HASINDEX = 0x00000010
AVIF_ISINTERLEAVED = 0x00000100
AVIIF_KEYFRAME = 0x00000010

_FPS_SCALE = 1000  # video dwScale; dwRate = fps * 1000


def _chunk(fourcc: bytes, payload: bytes) -> bytes:
    data = struct.pack("<4sI", fourcc, len(payload)) + payload
    if len(payload) % 2:
        data += b"\x00"
    return data


def _list_chunk(list_type: bytes, payload: bytes) -> bytes:
    return _chunk(b"LIST", list_type + payload)


def _avi_main_header(n_frames: int, fps: float, width: int, height: int, n_streams: int,
                     max_chunk: int) -> bytes:
    usec_per_frame = int(round(1_000_000 / fps))
    return _chunk(
        b"avih",
        struct.pack(
            "<10I4I",
            usec_per_frame,
            0,
            0,
            AVIF_HASINDEX | AVIF_ISINTERLEAVED,
            n_frames,
            0,
            n_streams,
            max_chunk,
            width,
            height,
            0, 0, 0, 0,
        ),
    )


def _video_stream_headers(n_frames: int, fps: float, width: int, height: int,
                          max_chunk: int) -> bytes:
    strh = _chunk(
        b"strh",
        struct.pack(
            "<4s4sIHHIIIIIIII4H",
            b"vids",
            b"MJPG",
            0, 0, 0, 0,
            _FPS_SCALE,
            int(round(fps * _FPS_SCALE)),
            0,
            n_frames,
            max_chunk,
            0xFFFFFFFF,
            0,
            0, 0, width, height,
        ),
    )
    strf = _chunk(
        b"strf",
        struct.pack(
            "<IiiHH4sIiiII",
            40, width, height, 1, 24, b"MJPG", width * height * 3, 0, 0, 0, 0,
        ),
    )
    return _list_chunk(b"strl", strh + strf)


def _audio_stream_headers(n_sample_frames: int, sample_rate: int, channels: int) -> bytes:
    block_align = 2 * channels
    byte_rate = sample_rate * block_align
    strh = _chunk(
        b"strh",
        struct.pack(
            "<4s4sIHHIIIIIIII4H",
            b"auds",
            b"\x00\x00\x00\x00",
            0, 0, 0, 0,
            block_align,
            byte_rate,
            0,
            n_sample_frames,
            byte_rate,
            0xFFFFFFFF,
            block_align,
            0, 0, 0, 0,
        ),
    )
    strf = _chunk(
        b"strf",
        struct.pack("<HHIIHH", 1, channels, sample_rate, byte_rate, block_align, 16),
    )
    return _list_chunk(b"strl", strh + strf)


def write_avi(
    path: Path | str,
    frames: Iterable[np.ndarray],
    fps: float,
    audio: np.ndarray | None = None,
    sample_rate: int = 44100,
    jpeg_quality: int = 90,
) -> None:
    """Write BGR uint8 frames (all the same size) and optional int16 audio.

    ``audio`` is shaped (n,) for mono or (n, channels); it is interleaved
    with the video so the file streams correctly.
    """
    encode_params = [int(cv2.IMWRITE_JPEG_QUALITY), jpeg_quality]
    jpegs: list[bytes] = []
    width = height = 0
    for frame in frames:
        if not jpegs:
            height, width = frame.shape[:2]
        ok, buf = cv2.imencode(".jpg", frame, encode_params)
        if not ok:
            raise RuntimeError("JPEG encode failed")
        jpegs.append(bytes(buf))
    if not jpegs:
        raise ValueError("write_avi requires at least one frame")

    has_audio = audio is not None and len(audio) > 0
    if has_audio:
        if audio.dtype != np.int16:
            raise ValueError("audio must be int16 PCM")
        if audio.ndim == 1:
            audio = audio.reshape(-1, 1)
        channels = audio.shape[1]
    else:
        channels = 0

    # Interleave: after video frame i, enough audio to cover (i+1)/fps seconds.
    movi = bytearray(b"movi")
    index: list[tuple[bytes, int, int, int]] = []  # ckid, flags, offset, size
    audio_cursor = 0
    for i, jpeg in enumerate(jpegs):
        index.append((b"00dc", AVIIF_KEYFRAME, len(movi), len(jpeg)))
        movi += _chunk(b"00dc", jpeg)
        if has_audio:
            boundary = min(len(audio), int(round((i + 1) * sample_rate / fps)))
            if boundary > audio_cursor:
                block = audio[audio_cursor:boundary].tobytes()
                index.append((b"01wb", 0, len(movi), len(block)))
                movi += _chunk(b"01wb", block)
                audio_cursor = boundary
    if has_audio and audio_cursor < len(audio):
        block = audio[audio_cursor:].tobytes()
        index.append((b"01wb", 0, len(movi), len(block)))
        movi += _chunk(b"01wb", block)

    max_chunk = max(len(j) for j in jpegs)
    headers = _avi_main_header(
        len(jpegs), fps, width, height, 2 if has_audio else 1, max_chunk
    )
    headers += _video_stream_headers(len(jpegs), fps, width, height, max_chunk)
    if has_audio:
        headers += _audio_stream_headers(len(audio), sample_rate, channels)
    hdrl = _list_chunk(b"hdrl", headers)

    idx_payload = b"".join(
        struct.pack("<4sIII", ckid, flags, off, size) for ckid, flags, off, size in index
    )
    body = hdrl + _list_chunk(b"movi", bytes(movi)[4:]) + _chunk(b"idx1", idx_payload)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI4s", b"RIFF", len(body) + 4, b"AVI ") + body)


@dataclass
class _StreamInfo:
    fcc_type: bytes
    scale: int
    rate: int
    length: int
    sample_size: int
    format_payload: bytes


class AviReader:
    """Random access to MJPEG frames and PCM audio of one AVI file."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        data = self.path.read_bytes()
        if data[:4] != b"RIFF" or data[8:12] != b"AVI ":
            raise ValueError(f"not an AVI file: {path}")
        self._streams: list[_StreamInfo] = []
        self._frame_chunks: list[tuple[int, int]] = []  # (offset, size) of jpeg data
        self._audio_chunks: list[tuple[int, int]] = []
        self._data = data
        self._walk(12, len(data))
        video = next((s for s in self._streams if s.fcc_type == b"vids"), None)
        if video is None:
            raise ValueError("no video stream")
        self.fps = video.rate / video.scale if video.scale else 0.0
        self.width, self.height = self._video_size(video)
        self.n_frames = len(self._frame_chunks)
        audio = next((s for s in self._streams if s.fcc_type == b"auds"), None)
        if audio is not None:
            tag, channels, rate = struct.unpack("<HHI", audio.format_payload[:8])
            if tag != 1:
                raise ValueError("only PCM audio supported")
            self.sample_rate = rate
            self.audio_channels = channels
        else:
            self.sample_rate = 0
            self.audio_channels = 0

    def _walk(self, pos: int, end: int) -> None:
        while pos + 8 <= end:
            fourcc, size = struct.unpack_from("<4sI", self._data, pos)
            body = pos + 8
            if fourcc == b"LIST":
                list_type = self._data[body : body + 4]
                if list_type in (b"hdrl", b"movi", b"strl", b"rec "):
                    self._walk(body + 4, body + size)
            elif fourcc == b"strh":
                fcc_type = self._data[body : body + 4]
                scale, rate, _start, length = struct.unpack_from("<IIII", self._data, body + 20)
                sample_size = struct.unpack_from("<I", self._data, body + 44)[0]
                self._streams.append(_StreamInfo(fcc_type, scale, rate, length, sample_size, b""))
            elif fourcc == b"strf":
                if self._streams and not self._streams[-1].format_payload:
                    self._streams[-1].format_payload = self._data[body : body + size]
            elif fourcc[2:] == b"dc" or fourcc[2:] == b"db":
                self._frame_chunks.append((body, size))
            elif fourcc[2:] == b"wb":
                self._audio_chunks.append((body, size))
            pos = body + size + (size % 2)

    @staticmethod
    def _video_size(video: _StreamInfo) -> tuple[int, int]:
        width, height = struct.unpack_from("<ii", video.format_payload, 4)
        return int(width), abs(int(height))

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps if self.fps else 0.0

    def frame(self, idx: int) -> np.ndarray:
        if not (0 <= idx < self.n_frames):
            raise IndexError(f"frame {idx} out of range [0, {self.n_frames})")
        off, size = self._frame_chunks[idx]
        buf = np.frombuffer(self._data, dtype=np.uint8, count=size, offset=off)
        frame = cv2.imdecode(buf, cv2.IMREAD_COLOR)
        if frame is None:
            raise ValueError(f"failed to decode frame {idx}")
        return frame

    def frames(self, start: int, stop: int) -> Iterator[np.ndarray]:
        for idx in range(start, stop):
            yield self.frame(idx)

    def audio(self) -> np.ndarray:
        """All PCM audio as int16 shaped (n, channels); empty if no audio."""
        if not self._audio_chunks:
            return np.zeros((0, 1), dtype=np.int16)
        raw = b"".join(self._data[off : off + size] for off, size in self._audio_chunks)
        pcm = np.frombuffer(raw, dtype="<i2")
        return pcm.reshape(-1, self.audio_channels)
