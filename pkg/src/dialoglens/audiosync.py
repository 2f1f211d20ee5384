"""Multi-track recording alignment and lecture/discussion splitting.

Each group places its own recorder, so a session yields several
unsynchronized tracks. Alignment cross-correlates 1 kHz amplitude
envelopes; the lecture portion, audible on every recorder at once, is
found by thresholding cross-track window similarity and excised before
transcription-side processing.
"""

from __future__ import annotations

import enum
import wave
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .corpus import ValidationWarning

ENVELOPE_RATE_HZ = 1000.0
DEFAULT_MAX_LAG_S = 60.0
LOW_CONFIDENCE_COSINE = 0.2

WINDOW_S = 5.0
HOP_S = 2.5
SEARCH_RADIUS_S = 2.0
OTSU_BINS = 64


@dataclass(frozen=True)
class AudioTrack:
    """Mono waveform in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path: Union[str, Path]) -> AudioTrack:
    """Read a PCM WAV file (8/16/24/32-bit); multichannel is downmixed."""
    with wave.open(str(path), "rb") as wf:
        n_channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())

    if width == 1:
        x = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
        x = (x - 128.0) / 128.0
    elif width == 2:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((b.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = b
        x = (np.frombuffer(padded.tobytes(), dtype="<i4") >> 8).astype(np.float64) / 8388608.0
    elif width == 4:
        x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise ValueError(f"unsupported sample width {width} bytes")

    if n_channels > 1:
        x = x.reshape(-1, n_channels).mean(axis=1)
    return AudioTrack(x, float(rate))


def save_wav(path: Union[str, Path], track: AudioTrack) -> None:
    """Write a track as 16-bit mono PCM."""
    clipped = np.clip(track.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(round(track.sample_rate)))
        wf.writeframes(pcm.tobytes())


def amplitude_envelope(track: AudioTrack, rate_hz: float = ENVELOPE_RATE_HZ) -> np.ndarray:
    """Mean absolute amplitude per 1/rate_hz block."""
    n_blocks = int(track.samples.size * rate_hz / track.sample_rate)
    if n_blocks < 1:
        raise ValueError("track shorter than one envelope block")
    edges = np.floor(np.arange(n_blocks) * track.sample_rate / rate_hz).astype(np.intp)
    sums = np.add.reduceat(np.abs(track.samples), edges)
    counts = np.diff(np.append(edges, track.samples.size))
    return sums / counts


@dataclass(frozen=True)
class OffsetEstimate:
    """Cross-correlation alignment result.

    `offset_s` is how much later the same content appears in `other`
    than in the reference; subtract it from `other`'s timestamps to
    align. `low_confidence` flags a weak correlation peak.
    """

    offset_s: float
    peak_cosine: float
    low_confidence: bool


def estimate_offset(
    reference: AudioTrack,
    other: AudioTrack,
    max_lag_s: float = DEFAULT_MAX_LAG_S,
) -> OffsetEstimate:
    """Find the time offset of `other` relative to `reference`.

    Envelopes are cross-correlated with FFTs, so long tracks stay
    cheap. The search is limited to +/- max_lag_s; the peak normalized
    correlation below LOW_CONFIDENCE_COSINE sets `low_confidence`.
    """
    if reference.sample_rate != other.sample_rate:
        raise ValueError("tracks must share one sample rate")
    a = amplitude_envelope(reference)
    b = amplitude_envelope(other)
    n = int(2 ** np.ceil(np.log2(a.size + b.size)))
    # circular correlation c[k] = sum_t a[t + k] b[t]
    corr = np.fft.irfft(np.fft.rfft(a, n) * np.conj(np.fft.rfft(b, n)), n)

    max_lag = int(round(max_lag_s * ENVELOPE_RATE_HZ))
    max_lag = min(max_lag, a.size - 1, b.size - 1)
    lags = np.arange(-max_lag, max_lag + 1)
    window = corr[lags % n]
    best = int(np.argmax(window))
    k = int(lags[best])

    norm = float(np.linalg.norm(a) * np.linalg.norm(b))
    cosine = float(window[best] / norm) if norm > 0 else 0.0
    # content appearing later in `other` means b[t] = a[t - d], peaking
    # at k = -d, so the reported offset negates the peak lag
    return OffsetEstimate(
        offset_s=-k / ENVELOPE_RATE_HZ,
        peak_cosine=cosine,
        low_confidence=cosine < LOW_CONFIDENCE_COSINE,
    )


class WindowLabel(enum.Enum):
    LECTURE = "Lecture"
    DISCUSSION = "Discussion"


@dataclass(frozen=True)
class SimilarityProfile:
    """Per track, per window: peak correlation with any other track."""

    values: np.ndarray  # (n_tracks, n_windows)
    window_s: float
    hop_s: float

    def window_start(self, index: int) -> float:
        return index * self.hop_s

    @property
    def n_windows(self) -> int:
        return int(self.values.shape[1])


def _correlate_valid(hay: np.ndarray, needle: np.ndarray) -> np.ndarray:
    """c[k] = sum_t hay[k + t] * needle[t] for every full overlap, by FFT."""
    n = int(2 ** np.ceil(np.log2(hay.size)))
    c = np.fft.irfft(np.fft.rfft(hay, n) * np.conj(np.fft.rfft(needle, n)), n)
    return c[: hay.size - needle.size + 1]


def similarity_profile(
    tracks: Sequence[AudioTrack],
    window_s: float = WINDOW_S,
    hop_s: float = HOP_S,
    search_radius_s: float = SEARCH_RADIUS_S,
) -> SimilarityProfile:
    """Windowed full-band cross-track similarity on aligned tracks.

    Every window of every track is zero-meaned and unit-normalized and
    correlated against same-position windows of the other tracks over
    shifts within +/- search_radius_s; the profile keeps the maximum.
    Windows count floor((min duration - window)/hop) + 1. Values are
    invariant to any per-track constant gain.
    """
    if len(tracks) < 2:
        raise ValueError("similarity needs at least two tracks")
    rate = tracks[0].sample_rate
    if any(t.sample_rate != rate for t in tracks):
        raise ValueError("tracks must share one sample rate")
    waves = [t.samples for t in tracks]
    win = int(round(window_s * rate))
    hop = int(round(hop_s * rate))
    radius = int(round(search_radius_s * rate))
    shortest = min(x.size for x in waves)
    n_windows = (shortest - win) // hop + 1
    if n_windows < 1:
        raise ValueError("tracks shorter than one analysis window")

    def normalized(seg: np.ndarray) -> np.ndarray | None:
        seg = seg - seg.mean()
        norm = np.linalg.norm(seg)
        if norm == 0:
            return None
        return seg / norm

    values = np.zeros((len(tracks), n_windows))
    for w in range(n_windows):
        start = w * hop
        units = [normalized(x[start : start + win]) for x in waves]
        for i, x_i in enumerate(waves):
            lo = max(0, start - radius)
            hi = min(x_i.size, start + win + radius)
            hay = x_i[lo:hi]
            if hay.size < win:
                continue
            # norms of every length-win haystack window about its own
            # mean, via running sums
            csum = np.cumsum(np.concatenate(([0.0], hay)))
            csq = np.cumsum(np.concatenate(([0.0], hay * hay)))
            sums = csum[win:] - csum[:-win]
            sumsq = csq[win:] - csq[:-win]
            norms = np.sqrt(np.maximum(sumsq - sums * sums / win, 0.0))
            best = 0.0
            for j, u_j in enumerate(units):
                if j == i or u_j is None:
                    continue
                # u_j sums to zero, so the haystack window's own mean
                # drops out of the dot product
                num = _correlate_valid(hay, u_j)
                with np.errstate(invalid="ignore", divide="ignore"):
                    scores = np.where(norms > 0, num / norms, 0.0)
                best = max(best, float(scores.max()))
            values[i, w] = best
    return SimilarityProfile(values, window_s, hop_s)


def otsu_threshold(values: np.ndarray, bins: int = OTSU_BINS) -> float:
    """Histogram threshold maximizing between-class variance."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("no values to threshold")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise ValueError("degenerate value range")
    hist, edges = np.histogram(x, bins=bins, range=(lo, hi))
    p = hist.astype(np.float64) / x.size
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(p)
    w1 = 1.0 - w0
    m = np.cumsum(p * centers)
    m_total = m[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        between = np.where(
            (w0 > 0) & (w1 > 0), (m_total * w0 - m) ** 2 / (w0 * w1), 0.0
        )
    return float(centers[int(np.argmax(between))])


@dataclass(frozen=True)
class SplitDecision:
    """Lecture/discussion labels for each track's windows."""

    labels: tuple[tuple[WindowLabel, ...], ...]
    threshold: float | None
    window_s: float
    hop_s: float


def threshold_profile(profile: SimilarityProfile) -> SplitDecision:
    """Label windows above the pooled Otsu threshold as Lecture.

    A degenerate profile (all windows alike) cannot support a split;
    everything is labeled Discussion and a warning is raised.
    """
    try:
        thr = otsu_threshold(profile.values)
    except ValueError:
        warnings.warn(
            "similarity profile is degenerate; labeling all windows Discussion",
            ValidationWarning,
            stacklevel=2,
        )
        labels = tuple(
            tuple(WindowLabel.DISCUSSION for _ in range(profile.n_windows))
            for _ in range(profile.values.shape[0])
        )
        return SplitDecision(labels, None, profile.window_s, profile.hop_s)
    labels = tuple(
        tuple(
            WindowLabel.LECTURE if v >= thr else WindowLabel.DISCUSSION for v in row
        )
        for row in profile.values
    )
    return SplitDecision(labels, thr, profile.window_s, profile.hop_s)


def keep_intervals(
    track_labels: Sequence[WindowLabel],
    duration_s: float,
    window_s: float = WINDOW_S,
    hop_s: float = HOP_S,
) -> list[tuple[float, float]]:
    """Complement of the union of lecture windows within [0, duration]."""
    lecture: list[tuple[float, float]] = []
    for w, label in enumerate(track_labels):
        if label is WindowLabel.LECTURE:
            start = w * hop_s
            end = min(start + window_s, duration_s)
            if lecture and start <= lecture[-1][1]:
                lecture[-1] = (lecture[-1][0], max(lecture[-1][1], end))
            else:
                lecture.append((start, end))
    keep: list[tuple[float, float]] = []
    cursor = 0.0
    for start, end in lecture:
        if start > cursor:
            keep.append((cursor, start))
        cursor = max(cursor, end)
    if cursor < duration_s:
        keep.append((cursor, duration_s))
    return keep


def excise_lecture(
    track: AudioTrack,
    track_labels: Sequence[WindowLabel],
    window_s: float = WINDOW_S,
    hop_s: float = HOP_S,
) -> tuple[AudioTrack, list[tuple[float, float]]]:
    """Drop lecture audio, returning the spliced track and kept spans."""
    spans = keep_intervals(track_labels, track.duration, window_s, hop_s)
    if not spans:
        warnings.warn(
            "every window is lecture; excised track is empty",
            ValidationWarning,
            stacklevel=2,
        )
    pieces = [
        track.samples[int(round(s * track.sample_rate)) : int(round(e * track.sample_rate))]
        for s, e in spans
    ]
    samples = np.concatenate(pieces) if pieces else np.empty(0)
    return AudioTrack(samples, track.sample_rate), spans


def write_cut_list(path: Union[str, Path], spans: Sequence[tuple[float, float]]) -> None:
    """Write kept spans as a two-column CSV."""
    lines = ["keep_start_s,keep_end_s"]
    lines += [f"{s!r},{e!r}" for s, e in spans]
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_cut_list(path: Union[str, Path]) -> list[tuple[float, float]]:
    text = Path(path).read_text("utf-8").splitlines()
    if not text or text[0].strip() != "keep_start_s,keep_end_s":
        raise ValueError("malformed cut list header")
    spans = []
    for line in text[1:]:
        if not line.strip():
            continue
        s, e = (float(c) for c in line.split(","))
        spans.append((s, e))
    return spans
