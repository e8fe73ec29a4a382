"""Media toolkit: frame decode, audio extraction, and container writing.

Two interchangeable backends sit behind the same contract:

* ``BuiltinToolkit`` — pure Python over the bundled AVI muxer/demuxer; no
  external executables, fully deterministic, used by the hermetic tests.
* ``FfmpegToolkit`` — shells out to ffmpeg/ffprobe for arbitrary containers.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Protocol

import cv2
import numpy as np

from ..audio import Waveform
from ..model import TimeSpan


@dataclass(frozen=True)
class MediaInfo:
    duration_s: float
    fps: float
    width: int
    height: int
    n_frames: int
    sample_rate: int
    audio_channels: int


class MediaToolkit(Protocol):
    def probe(self, path: Path) -> MediaInfo: ...

    def extract_frame(self, path: Path, timestamp_s: float) -> np.ndarray: ...

    def save_frame_png(self, path: Path, timestamp_s: float, out_path: Path) -> None: ...

    def iter_frames(self, path: Path, span: TimeSpan) -> Iterator[tuple[float, np.ndarray]]: ...

    def extract_audio(self, path: Path, span: TimeSpan | None = None) -> Waveform: ...

    def write_video(
        self,
        out_path: Path,
        frames: Iterable[np.ndarray],
        fps: float,
        audio: Waveform | None,
        stereo: bool = True,
    ) -> None: ...


class BuiltinToolkit:
    """AVI-only backend with no subprocess dependencies."""

    def __init__(self, jpeg_quality: int = 90) -> None:
        self.jpeg_quality = jpeg_quality
        self._readers: dict[Path, "AviReader"] = {}

    def _reader(self, path: Path):
        from .avi import AviReader

        path = Path(path)
        if path not in self._readers:
            self._readers[path] = AviReader(path)
        return self._readers[path]

    def probe(self, path: Path) -> MediaInfo:
        r = self._reader(path)
        return MediaInfo(
            duration_s=r.duration_s,
            fps=r.fps,
            width=r.width,
            height=r.height,
            n_frames=r.n_frames,
            sample_rate=r.sample_rate,
            audio_channels=r.audio_channels,
        )

    def _frame_index(self, path: Path, timestamp_s: float) -> int:
        r = self._reader(path)
        idx = int(timestamp_s * r.fps)
        return min(max(idx, 0), r.n_frames - 1)

    def extract_frame(self, path: Path, timestamp_s: float) -> np.ndarray:
        r = self._reader(path)
        return r.frame(self._frame_index(path, timestamp_s))

    def save_frame_png(self, path: Path, timestamp_s: float, out_path: Path) -> None:
        frame = self.extract_frame(path, timestamp_s)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        if not cv2.imwrite(str(out_path), frame):
            raise RuntimeError(f"failed to write {out_path}")

    def iter_frames(self, path: Path, span: TimeSpan) -> Iterator[tuple[float, np.ndarray]]:
        r = self._reader(path)
        first = max(0, int(span.start_s * r.fps))
        last = min(r.n_frames, int(np.ceil(span.end_s * r.fps)))
        for idx in range(first, last):
            yield idx / r.fps, r.frame(idx)

    def extract_audio(self, path: Path, span: TimeSpan | None = None) -> Waveform:
        r = self._reader(path)
        pcm = r.audio()
        if pcm.size == 0:
            raise ValueError(f"{path} has no audio stream")
        mono = pcm.astype(np.float32).mean(axis=1) / 32768.0
        if span is not None:
            a = int(round(span.start_s * r.sample_rate))
            b = int(round(span.end_s * r.sample_rate))
            mono = mono[max(0, a) : min(len(mono), b)]
        return Waveform(mono.astype(np.float32), r.sample_rate)

    def write_video(
        self,
        out_path: Path,
        frames: Iterable[np.ndarray],
        fps: float,
        audio: Waveform | None,
        stereo: bool = True,
    ) -> None:
        from .avi import write_avi

        pcm = None
        rate = 44100
        if audio is not None:
            rate = audio.sample_rate
            mono = np.round(np.clip(audio.samples, -1.0, 1.0) * 32767.0).astype(np.int16)
            pcm = np.column_stack([mono, mono]) if stereo else mono
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_avi(out_path, frames, fps, pcm, rate, self.jpeg_quality)


class FfmpegToolkit:
    """Subprocess backend for arbitrary containers (requires ffmpeg tools)."""

    def __init__(
        self,
        ffmpeg_path: str = "ffmpeg",
        ffprobe_path: str = "ffprobe",
        sample_rate: int = 44100,
    ) -> None:
        if shutil.which(ffmpeg_path) is None or shutil.which(ffprobe_path) is None:
            raise RuntimeError(
                f"media toolkit executables not found ({ffmpeg_path}/{ffprobe_path}); "
                "use the builtin toolkit or install ffmpeg"
            )
        self.ffmpeg = ffmpeg_path
        self.ffprobe = ffprobe_path
        self.sample_rate = sample_rate

    def _run(self, cmd: list[str]) -> bytes:
        proc = subprocess.run(cmd, capture_output=True)
        if proc.returncode != 0:
            raise RuntimeError(
                f"{cmd[0]} failed ({proc.returncode}): {proc.stderr.decode(errors='replace')[-2000:]}"
            )
        return proc.stdout

    def probe(self, path: Path) -> MediaInfo:
        out = self._run(
            [
                self.ffprobe, "-v", "error", "-print_format", "json",
                "-show_format", "-show_streams", str(path),
            ]
        )
        info = json.loads(out)
        duration = float(info.get("format", {}).get("duration", 0.0))
        video = next(s for s in info["streams"] if s["codec_type"] == "video")
        num, den = (video.get("avg_frame_rate") or "0/1").split("/")
        fps = float(num) / float(den) if float(den) else 0.0
        audio = next((s for s in info["streams"] if s["codec_type"] == "audio"), None)
        return MediaInfo(
            duration_s=duration,
            fps=fps,
            width=int(video["width"]),
            height=int(video["height"]),
            n_frames=int(video.get("nb_frames") or round(duration * fps)),
            sample_rate=int(audio["sample_rate"]) if audio else 0,
            audio_channels=int(audio["channels"]) if audio else 0,
        )

    def extract_frame(self, path: Path, timestamp_s: float) -> np.ndarray:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "frame.png"
            self._run(
                [
                    self.ffmpeg, "-v", "error", "-ss", f"{timestamp_s:.3f}", "-i", str(path),
                    "-frames:v", "1", "-y", str(out),
                ]
            )
            frame = cv2.imread(str(out))
        if frame is None:
            raise RuntimeError(f"no frame decoded at {timestamp_s}s from {path}")
        return frame

    def save_frame_png(self, path: Path, timestamp_s: float, out_path: Path) -> None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        self._run(
            [
                self.ffmpeg, "-v", "error", "-ss", f"{timestamp_s:.3f}", "-i", str(path),
                "-frames:v", "1", "-y", str(out_path),
            ]
        )

    def iter_frames(self, path: Path, span: TimeSpan) -> Iterator[tuple[float, np.ndarray]]:
        info = self.probe(path)
        raw = self._run(
            [
                self.ffmpeg, "-v", "error",
                "-ss", f"{span.start_s:.6f}", "-to", f"{span.end_s:.6f}",
                "-i", str(path),
                "-f", "rawvideo", "-pix_fmt", "bgr24", "-",
            ]
        )
        frame_bytes = info.width * info.height * 3
        first = int(span.start_s * info.fps)
        for i in range(len(raw) // frame_bytes):
            frame = np.frombuffer(
                raw, dtype=np.uint8, count=frame_bytes, offset=i * frame_bytes
            ).reshape(info.height, info.width, 3)
            yield (first + i) / info.fps, frame

    def extract_audio(self, path: Path, span: TimeSpan | None = None) -> Waveform:
        cmd = [self.ffmpeg, "-v", "error"]
        if span is not None:
            cmd += ["-ss", f"{span.start_s:.6f}", "-to", f"{span.end_s:.6f}"]
        cmd += [
            "-i", str(path), "-vn", "-ac", "1", "-ar", str(self.sample_rate),
            "-f", "s16le", "-",
        ]
        raw = self._run(cmd)
        pcm = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
        return Waveform(pcm, self.sample_rate)

    def write_video(
        self,
        out_path: Path,
        frames: Iterable[np.ndarray],
        fps: float,
        audio: Waveform | None,
        stereo: bool = True,
    ) -> None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory() as tmp:
            wav_path = None
            if audio is not None:
                from ..audio import write_wav

                wav_path = Path(tmp) / "audio.wav"
                write_wav(wav_path, audio)
            frames = iter(frames)
            first = next(frames)
            h, w = first.shape[:2]
            cmd = [
                self.ffmpeg, "-v", "error",
                "-f", "rawvideo", "-pix_fmt", "bgr24", "-s", f"{w}x{h}",
                "-r", f"{fps}", "-i", "-",
            ]
            if wav_path is not None:
                cmd += ["-i", str(wav_path)]
                if stereo:
                    cmd += ["-ac", "2"]
            cmd += ["-pix_fmt", "yuv420p", "-shortest", "-y", str(out_path)]
            proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stderr=subprocess.PIPE)
            assert proc.stdin is not None
            proc.stdin.write(first.tobytes())
            for frame in frames:
                proc.stdin.write(frame.tobytes())
            proc.stdin.close()
            stderr = proc.stderr.read() if proc.stderr else b""
            if proc.wait() != 0:
                raise RuntimeError(f"ffmpeg mux failed: {stderr.decode(errors='replace')[-2000:]}")


def build_toolkit(kind: str, **kwargs) -> MediaToolkit:
    if kind == "builtin":
        return BuiltinToolkit(jpeg_quality=kwargs.get("jpeg_quality", 90))
    if kind == "ffmpeg":
        return FfmpegToolkit(
            ffmpeg_path=kwargs.get("ffmpeg_path", "ffmpeg"),
            ffprobe_path=kwargs.get("ffprobe_path", "ffprobe"),
            sample_rate=kwargs.get("sample_rate", 44100),
        )
    raise ValueError(f"unknown media toolkit {kind!r}")
