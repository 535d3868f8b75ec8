"""Deterministic plucked-string instrument, amplifier waveshaper, and RMS tools.

The instrument is a Karplus-Strong string: a seeded noise burst feeds a
fractional delay line whose loop filter blends a direct tap with a two-point
average. Brightness b sets the blend (y = ((1+b)/2) d1 + ((1-b)/2) d2 around
a per-trip loss), so b=1 rings bright and b=0 damps highs quickly. Two named
style presets render the same score with identical musical content but a
different sound, which is what the flow model trains on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DataError
from .tabscore import Score, TechniqueKind, event_pitch

DEFAULT_SAMPLE_RATE = 44100
RELEASE_TAIL_SEC = 1.0
CHORD_STAGGER_SEC = 0.008
VIBRATO_RATE_HZ = 5.5
VIBRATO_CENTS = 20.0
PALM_MUTE_DECAY_FACTOR = 0.25
BASE_T60_SEC = 3.0  # ring time at decay_scale 1.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float samples plus their sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise DataError(f"audio must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("audio contains non-finite samples")
        if self.sample_rate <= 0:
            raise DataError(f"sample rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class RenderStyle:
    name: str
    excitation_seed: int
    brightness: float       # 0 dark .. 1 bright (loop-filter blend)
    decay_scale: float      # multiplies the base ring time
    detune_cents: float     # per-note random detune bound
    timing_jitter_ms: float  # per-note random onset shift bound
    pick_noise_gain: float  # attack transient level relative to the pluck
    excitation_cutoff: float | None = None  # one-pole lowpass on the pluck noise

    def __post_init__(self):
        if not (0.0 <= self.brightness <= 1.0):
            raise DataError(f"brightness must be in [0, 1], got {self.brightness}")
        if self.decay_scale <= 0:
            raise DataError(f"decay_scale must be > 0, got {self.decay_scale}")
        if self.timing_jitter_ms < 0 or self.pick_noise_gain < 0:
            raise DataError("timing_jitter_ms and pick_noise_gain must be >= 0")
        if self.excitation_cutoff is not None and self.excitation_cutoff <= 0:
            raise DataError("excitation_cutoff must be > 0 when set")


# The presets share the excitation seed, so both styles pluck the same noise
# burst per note: a pair differs by loop filtering, decay, excitation color,
# and pick noise (the style), not by the excitation realization (the
# content). Jitter and detune stay zero in the presets to keep pairs
# sample-aligned; nonzero values work and are exercised in the tests. The
# brightness gap is kept small because the loop filter's dispersion differs
# with its blend, and strongly different blends drift partial phases apart
# mid-note; the audible contrast comes mostly from the phase-neutral knobs
# (decay, excitation color, pick noise).
SYNTHETIC = RenderStyle("synthetic", excitation_seed=11, brightness=0.82,
                        decay_scale=1.0, detune_cents=0.0, timing_jitter_ms=0.0,
                        pick_noise_gain=0.0)
PSEUDO_REAL = RenderStyle("pseudo_real", excitation_seed=11, brightness=0.70,
                          decay_scale=0.55, detune_cents=0.0, timing_jitter_ms=0.0,
                          pick_noise_gain=0.3, excitation_cutoff=2200.0)
STYLE_PRESETS = {s.name: s for s in (SYNTHETIC, PSEUDO_REAL)}


def _pitch_curve(f0: float, n: int, dur_samples: int, technique, target_f: float | None,
                 sample_rate: int) -> np.ndarray:
    """Per-sample fundamental over the note buffer (tail holds the end value)."""
    t_frac = np.minimum(np.arange(n, dtype=np.float64) / max(dur_samples, 1), 1.0)
    if technique.kind is TechniqueKind.BEND:
        return f0 * 2.0 ** (technique.bend_semitones * t_frac / 12.0)
    if technique.kind is TechniqueKind.SLIDE and target_f is not None:
        return f0 * (target_f / f0) ** t_frac
    if technique.kind is TechniqueKind.VIBRATO:
        t = np.arange(n, dtype=np.float64) / sample_rate
        return f0 * 2.0 ** ((VIBRATO_CENTS / 1200.0) * np.sin(2 * np.pi * VIBRATO_RATE_HZ * t))
    return np.full(n, f0)


def _synth_string(delay: np.ndarray, a1: float, a2: float, rho: float,
                  excitation: np.ndarray) -> np.ndarray:
    """Run the delay-line feedback loop; block size stays under the minimum
    delay so each block only reads already-computed samples."""
    n = len(delay)
    guard = int(np.ceil(delay.max())) + 4
    y = np.zeros(guard + n)
    y[guard:guard + len(excitation)] = excitation
    block = max(1, int(delay.min()) - 4)
    start = 0
    while start < n:
        end = min(n, start + block)
        pos = np.arange(start, end) - delay[start:end] + guard
        idx = pos.astype(np.int64)
        frac = pos - idx
        d1 = y[idx] * (1.0 - frac) + y[idx + 1] * frac
        d2 = y[idx - 1] * (1.0 - frac) + y[idx] * frac
        y[guard + start:guard + end] += rho * (a1 * d1 + a2 * d2)
        start = end
    return y[guard:]


def render(score: Score, style: RenderStyle,
           sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Render a score deterministically; same length for every style so that
    two renders of one score stay sample-aligned."""
    if not score.events:
        raise DataError("cannot render an empty score")
    if sample_rate < 8000:
        raise DataError(f"sample rate must be >= 8000, got {sample_rate}")

    fs = float(sample_rate)
    spt = score.seconds_per_tick()
    total = int(round((score.last_offset_ticks * spt + RELEASE_TAIL_SEC) * fs))
    out = np.zeros(total)

    seeds = np.random.SeedSequence(style.excitation_seed).spawn(len(score.events))
    events = list(score.events)

    # same-onset events strum low string first, 8 ms apart
    stagger: dict[int, float] = {}
    by_onset: dict[int, list] = {}
    for k, ev in enumerate(events):
        by_onset.setdefault(ev.onset_ticks, []).append((ev.string, k))
    for group in by_onset.values():
        for rank, (_, k) in enumerate(sorted(group, reverse=True)):
            stagger[k] = rank * CHORD_STAGGER_SEC

    for k, ev in enumerate(events):
        rng = np.random.default_rng(seeds[k])
        f0 = event_pitch(score, ev)
        if style.detune_cents:
            f0 *= 2.0 ** (rng.uniform(-style.detune_cents, style.detune_cents) / 1200.0)
        jitter = rng.uniform(-1.0, 1.0) * style.timing_jitter_ms / 1000.0
        onset = max(0.0, ev.onset_ticks * spt + stagger[k] + jitter)
        s0 = int(round(onset * fs))
        if s0 >= total:
            continue

        dur_samples = max(1, int(round(ev.duration_ticks * spt * fs)))
        n = min(dur_samples + int(RELEASE_TAIL_SEC * fs), total - s0)

        target_f = None
        if ev.technique.kind is TechniqueKind.SLIDE:
            midi = score.string_pitch(ev.string) + ev.technique.slide_to_fret
            target_f = 440.0 * 2.0 ** ((midi - 69) / 12.0)
        freq = _pitch_curve(f0, n, dur_samples, ev.technique, target_f, sample_rate)
        if freq.max() > fs / 4.0:
            raise DataError(
                f"event pitch {freq.max():.1f} Hz exceeds {fs / 4:.0f} Hz "
                f"(string {ev.string}, fret {ev.fret} at rate {sample_rate})"
            )

        b = style.brightness
        delay = fs / freq - (1.0 - b) / 2.0  # loop filter adds (1-b)/2 samples
        a1, a2 = (1.0 + b) / 2.0, (1.0 - b) / 2.0

        t60 = BASE_T60_SEC * style.decay_scale
        if ev.technique.kind is TechniqueKind.PALM_MUTE:
            t60 *= PALM_MUTE_DECAY_FACTOR
        rho = 10.0 ** (-3.0 * (fs / f0) / (t60 * fs))

        amp = 0.22 * (ev.velocity / 127.0)
        if ev.technique.kind in (TechniqueKind.HAMMER_ON, TechniqueKind.PULL_OFF):
            amp *= 0.5  # legato re-excitation at -6 dB
        burst = min(n, max(2, int(round(fs / f0))))
        excitation = rng.uniform(-1.0, 1.0, burst)
        if style.excitation_cutoff is not None:
            a_lp = 1.0 - np.exp(-2.0 * np.pi * style.excitation_cutoff / fs)
            excitation = lfilter([a_lp], [1.0, -(1.0 - a_lp)], excitation)
        excitation = (excitation - excitation.mean()) * amp

        note = _synth_string(delay, a1, a2, rho, excitation)
        if style.pick_noise_gain:
            m = min(n, int(0.003 * fs))
            fade = np.linspace(1.0, 0.0, m) ** 2
            note[:m] += style.pick_noise_gain * amp * rng.uniform(-1.0, 1.0, m) * fade
        out[s0:s0 + n] += note

    peak = np.max(np.abs(out))
    if peak > 0.995:
        out *= 0.995 / peak
    return AudioBuffer(out.astype(np.float32), sample_rate)


def amp_process(audio: AudioBuffer, drive: float = 6.0,
                tone_cutoff: float | None = 5000.0) -> AudioBuffer:
    """Memoryless tanh drive followed by a one-pole lowpass; peak kept <= 1.

    A cutoff of None (or >= Nyquist) bypasses the filter.
    """
    if drive <= 0:
        raise DataError(f"drive must be > 0, got {drive}")
    x = audio.samples.astype(np.float64)
    y = np.tanh(drive * x)
    if tone_cutoff is not None and tone_cutoff < audio.sample_rate / 2.0:
        a = 1.0 - np.exp(-2.0 * np.pi * tone_cutoff / audio.sample_rate)
        y = lfilter([a], [1.0, -(1.0 - a)], y)
    peak = np.max(np.abs(y)) if len(y) else 0.0
    if peak > 1.0:
        y /= peak
    return AudioBuffer(y.astype(np.float32), audio.sample_rate)


def normalize_rms(audio: AudioBuffer, target_db: float) -> AudioBuffer:
    """Scale so the RMS level hits target_db (dB re full scale)."""
    x = audio.samples.astype(np.float64)
    rms = float(np.sqrt(np.mean(np.square(x))))
    if rms == 0.0:
        raise DataError("cannot normalize silence")
    gain = 10.0 ** (target_db / 20.0) / rms
    return AudioBuffer((x * gain).astype(np.float32), audio.sample_rate)
