"""Sample-level audio primitives: loudness, gain, fades, ducking, mixing.

Everything here is a pure function over in-memory waveforms; file decode and
encode live in the media toolkit. Internal processing is 32-bit float mono.
"Volume" throughout means RMS dBFS.
"""

from __future__ import annotations

import logging
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SILENCE_DBFS = float("-inf")

# Sidechain envelope analysis: 50 ms RMS windows advanced every 10 ms.
DUCK_WINDOW_S = 0.05
DUCK_HOP_S = 0.01


@dataclass(frozen=True)
class Waveform:
    """Mono float32 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be 1-D (mono)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if len(self.samples) and not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples.astype(np.float32), self.sample_rate, self.channels)


def silence(duration_s: float, sample_rate: int) -> Waveform:
    n = int(round(duration_s * sample_rate))
    return Waveform(np.zeros(n, dtype=np.float32), sample_rate)


@dataclass(frozen=True)
class DuckParams:
    duck_db: float = -12.0
    threshold_dbfs: float = -40.0
    attack_s: float = 0.05
    release_s: float = 0.5

    def __post_init__(self) -> None:
        if self.duck_db >= 0:
            raise ValueError("duck_db must be negative")
        if self.attack_s <= 0 or self.release_s <= 0:
            raise ValueError("attack_s and release_s must be positive")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


def rms_dbfs(w: Waveform) -> float:
    """RMS level in dBFS; all-zero (or empty) input returns -inf."""
    if len(w.samples) == 0:
        return SILENCE_DBFS
    rms = math.sqrt(float(np.mean(np.square(w.samples, dtype=np.float64))))
    if rms == 0.0:
        return SILENCE_DBFS
    return 20.0 * math.log10(rms)


def apply_gain(w: Waveform, gain_db: float) -> Waveform:
    if gain_db == 0.0:
        return w
    return w.with_samples(w.samples.astype(np.float64) * db_to_linear(gain_db))


def match_loudness(w: Waveform, target_dbfs: float, ceiling_dbfs: float = -1.0) -> Waveform:
    """Gain the signal so its RMS hits ``target_dbfs``, capped so the peak
    never exceeds ``ceiling_dbfs`` (clipping guard). Silent input is returned
    unchanged."""
    current = rms_dbfs(w)
    if current == SILENCE_DBFS:
        log.warning("match_loudness: silent input left unchanged")
        return w
    gain_lin = db_to_linear(target_dbfs - current)
    peak = float(np.max(np.abs(w.samples)))
    ceiling_lin = db_to_linear(ceiling_dbfs)
    if peak * gain_lin > ceiling_lin:
        gain_lin = ceiling_lin / peak
    return w.with_samples(w.samples.astype(np.float64) * gain_lin)


def _ramp_up(n: int) -> np.ndarray:
    # Sample k of an n-sample ramp scales by k/(n-1); a 1-sample ramp is 0.
    if n == 1:
        return np.zeros(1, dtype=np.float64)
    return np.arange(n, dtype=np.float64) / (n - 1)


def fade(w: Waveform, fade_in_s: float, fade_out_s: float) -> Waveform:
    """Linear fade ramps. Fades that together exceed the clip duration are
    shrunk proportionally so they exactly cover it."""
    n = len(w.samples)
    n_in = int(round(fade_in_s * w.sample_rate))
    n_out = int(round(fade_out_s * w.sample_rate))
    if n_in == 0 and n_out == 0:
        return w
    total = n_in + n_out
    if total > n:
        n_in = int(n_in * n / total)
        n_out = int(n_out * n / total)
    out = w.samples.astype(np.float64).copy()
    if n_in > 0:
        out[:n_in] *= _ramp_up(n_in)
    if n_out > 0:
        out[n - n_out :] *= _ramp_up(n_out)[::-1]
    return w.with_samples(out)


def _duck_targets(foreground: np.ndarray, sample_rate: int, p: DuckParams) -> np.ndarray:
    """Per-hop linear gain targets from the foreground RMS envelope."""
    hop = max(1, int(round(DUCK_HOP_S * sample_rate)))
    win = max(1, int(round(DUCK_WINDOW_S * sample_rate)))
    n = len(foreground)
    n_hops = max(1, -(-n // hop))
    threshold_lin = db_to_linear(p.threshold_dbfs)
    duck_lin = db_to_linear(p.duck_db)
    fg64 = foreground.astype(np.float64)
    targets = np.empty(n_hops, dtype=np.float64)
    for k in range(n_hops):
        chunk = fg64[k * hop : k * hop + win]
        rms = math.sqrt(float(np.mean(np.square(chunk)))) if len(chunk) else 0.0
        targets[k] = duck_lin if rms > threshold_lin else 1.0
    return targets


def duck(music: Waveform, foreground: Waveform, p: DuckParams) -> Waveform:
    """Sidechain-duck the music bed under the foreground bus.

    The foreground short-window RMS envelope drives a per-sample gain that
    ramps toward duck_db (attack) while the envelope exceeds the threshold
    and recovers to unity (release) when it falls below. The shorter input
    is zero-padded to the longer one.
    """
    if music.sample_rate != foreground.sample_rate:
        raise ValueError("duck requires equal sample rates")
    n = max(len(music.samples), len(foreground.samples))
    mus = np.zeros(n, dtype=np.float64)
    mus[: len(music.samples)] = music.samples
    fg = np.zeros(n, dtype=np.float32)
    fg[: len(foreground.samples)] = foreground.samples

    hop = max(1, int(round(DUCK_HOP_S * music.sample_rate)))
    targets = _duck_targets(fg, music.sample_rate, p)
    coeff_attack = 1.0 - math.exp(-1.0 / (p.attack_s * music.sample_rate))
    coeff_release = 1.0 - math.exp(-1.0 / (p.release_s * music.sample_rate))

    gain = np.empty(n, dtype=np.float64)
    g = 1.0
    for k, target in enumerate(targets):
        start = k * hop
        stop = min(start + hop, n)
        block = stop - start
        if block <= 0:
            break
        if target == g:
            gain[start:stop] = g
            continue
        # Within a block the target is constant, so the one-pole recursion
        # g += c*(t - g) closes to t + (g0 - t)*(1-c)^i.
        c = coeff_attack if target < g else coeff_release
        decay = np.power(1.0 - c, np.arange(1, block + 1, dtype=np.float64))
        gain[start:stop] = target + (g - target) * decay
        g = gain[stop - 1]
    return music.with_samples(mus * gain)


def mix(tracks: list[Waveform], offsets_s: list[float], duration_s: float | None = None) -> Waveform:
    """Sample-wise sum of tracks at the given offsets.

    If the summed peak exceeds -1 dBFS the whole mix is scaled down to that
    ceiling (logged), then hard-clipped to [-1, 1] as a final guard.
    """
    if not tracks:
        raise ValueError("mix requires at least one track")
    if len(tracks) != len(offsets_s):
        raise ValueError("one offset per track required")
    rate = tracks[0].sample_rate
    for t in tracks:
        if t.sample_rate != rate:
            raise ValueError("mix requires equal sample rates")
    for off in offsets_s:
        if off < 0:
            raise ValueError(f"negative offset {off}")
    ends = [int(round(off * rate)) + len(t.samples) for t, off in zip(tracks, offsets_s)]
    n = max(ends)
    if duration_s is not None:
        n = max(n, int(round(duration_s * rate)))
    out = np.zeros(n, dtype=np.float64)
    for t, off in zip(tracks, offsets_s):
        start = int(round(off * rate))
        out[start : start + len(t.samples)] += t.samples
    ceiling = db_to_linear(-1.0)
    peak = float(np.max(np.abs(out))) if n else 0.0
    if peak > ceiling:
        log.warning("mix peak %.3f above -1 dBFS ceiling; scaling down", peak)
        out *= ceiling / peak
    np.clip(out, -1.0, 1.0, out=out)
    if duration_s is not None:
        out = out[: int(round(duration_s * rate))]
    return Waveform(out.astype(np.float32), rate)


def concat(waveforms: list[Waveform]) -> Waveform:
    if not waveforms:
        raise ValueError("concat requires at least one waveform")
    rate = waveforms[0].sample_rate
    for w in waveforms:
        if w.sample_rate != rate:
            raise ValueError("concat requires equal sample rates")
    return Waveform(np.concatenate([w.samples for w in waveforms]), rate)


def trim_or_pad(w: Waveform, n_samples: int) -> Waveform:
    """Exact-length helper used when locking audio to the video duration."""
    if len(w.samples) == n_samples:
        return w
    if len(w.samples) > n_samples:
        return w.with_samples(w.samples[:n_samples])
    out = np.zeros(n_samples, dtype=np.float32)
    out[: len(w.samples)] = w.samples
    return w.with_samples(out)


# --- WAV file I/O (16-bit PCM) -------------------------------------------

def write_wav(path: Path | str, w: Waveform) -> None:
    data = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(data * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path: Path | str) -> Waveform:
    with wave.open(str(path), "rb") as fh:
        n_channels = fh.getnchannels()
        width = fh.getsampwidth()
        rate = fh.getframerate()
        frames = fh.readframes(fh.getnframes())
    if width != 2:
        raise ValueError(f"only 16-bit PCM WAV supported, got width {width}")
    pcm = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        pcm = pcm.reshape(-1, n_channels).mean(axis=1)
    return Waveform(pcm.astype(np.float32), rate)


def wav_bytes(w: Waveform) -> bytes:
    import io

    buf = io.BytesIO()
    data = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(data * 32767.0).astype("<i2")
    with wave.open(buf, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())
    return buf.getvalue()


def waveform_from_wav_bytes(data: bytes) -> Waveform:
    import io

    buf = io.BytesIO(data)
    with wave.open(buf, "rb") as fh:
        n_channels = fh.getnchannels()
        width = fh.getsampwidth()
        rate = fh.getframerate()
        frames = fh.readframes(fh.getnframes())
    if width != 2:
        raise ValueError(f"only 16-bit PCM WAV supported, got width {width}")
    pcm = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        pcm = pcm.reshape(-1, n_channels).mean(axis=1)
    return Waveform(pcm.astype(np.float32), rate)
