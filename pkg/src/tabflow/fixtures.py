"""Deterministic corpora and implementation-independent oracles for tests.

Nothing here shares code with the modules under test beyond primitive
arithmetic: the DCT oracle is the literal O(N^2) double sum, the pitch oracle
is plain autocorrelation, and the onset counter thresholds a sample-domain
energy envelope.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .tabscore import (DEFAULT_VELOCITY, NoteEvent, Score, Technique,
                       TechniqueKind)


def gaussian_2d_pairs(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Paired draws from N(0, I) and N((3,3), 0.25 I), both [n, 2]."""
    if n < 1:
        raise DataError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, 2))
    x1 = 3.0 + 0.5 * rng.standard_normal((n, 2))
    return x0, x1


def oracle_dct(frame: np.ndarray) -> np.ndarray:
    """Direct-sum orthonormal DCT-II: X_k = s_k sum_n x_n cos(pi(2n+1)k / 2N)."""
    x = np.asarray(frame, dtype=np.float64)
    n = len(x)
    out = np.empty(n)
    idx = np.arange(n)
    for k in range(n):
        scale = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        out[k] = scale * np.sum(x * np.cos(np.pi * (2 * idx + 1) * k / (2 * n)))
    return out


def oracle_pitch(samples: np.ndarray, sample_rate: int, fmin: float = 50.0,
                 fmax: float = 2000.0) -> float:
    """Autocorrelation fundamental estimate with parabolic peak refinement."""
    x = np.asarray(samples, dtype=np.float64)
    x = x - x.mean()
    if np.max(np.abs(x)) < 1e-9:
        raise DataError("cannot estimate pitch of silence")
    ac = np.correlate(x, x, mode="full")[len(x) - 1:]
    lag_min = max(2, int(sample_rate / fmax))
    lag_max = min(len(ac) - 2, int(sample_rate / fmin))
    if lag_max <= lag_min:
        raise DataError("segment too short for pitch estimation")
    seg = ac[lag_min:lag_max]
    k = int(np.argmax(seg)) + lag_min
    y0, y1, y2 = ac[k - 1], ac[k], ac[k + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    return sample_rate / (k + shift)


def cents_between(f_measured: float, f_reference: float) -> float:
    return 1200.0 * np.log2(f_measured / f_reference)


def rms_db(samples: np.ndarray) -> float:
    """RMS level in dB re full scale."""
    rms = np.sqrt(np.mean(np.square(np.asarray(samples, dtype=np.float64))))
    if rms == 0.0:
        return -np.inf
    return 20.0 * np.log10(rms)


def count_onsets(samples: np.ndarray, sample_rate: int,
                 threshold_ratio: float = 4.0, window_ms: float = 10.0,
                 min_gap_ms: float = 40.0) -> int:
    """Count upward jumps of a short-window energy envelope."""
    x = np.asarray(samples, dtype=np.float64)
    win = max(1, int(sample_rate * window_ms / 1000.0))
    n_win = len(x) // win
    env = np.sqrt(np.mean(x[:n_win * win].reshape(n_win, win) ** 2, axis=1))
    floor = max(env.max() * 1e-3, 1e-9)
    env = np.concatenate([[floor], env])  # a leading note counts as an onset
    onsets = 0
    last = -10 ** 9
    gap = int(min_gap_ms / window_ms)
    for i in range(1, n_win + 1):
        if env[i] > threshold_ratio * max(env[i - 1], floor) and i - last >= gap:
            onsets += 1
            last = i
    return onsets


_TOY_DURATIONS = (240, 480, 480, 960, 960, 1920)


def random_score(rng: np.random.Generator, target_seconds: float = 20.0,
                 tempo_bpm: float = 120.0) -> Score:
    """Random valid score mixing single notes, chords, and techniques."""
    spt = 60.0 / (tempo_bpm * 960)
    events: list[NoteEvent] = []
    onset = 0
    while onset * spt < target_seconds:
        duration = int(rng.choice(_TOY_DURATIONS))
        velocity = int(rng.integers(70, 115)) if rng.uniform() < 0.3 else DEFAULT_VELOCITY
        if rng.uniform() < 0.25:
            strings = rng.choice(6, size=int(rng.integers(2, 5)), replace=False) + 1
            base_fret = int(rng.integers(0, 9))
            for s in strings:
                events.append(NoteEvent(onset, duration, int(s),
                                        base_fret + int(rng.integers(0, 3)),
                                        velocity))
        else:
            string = int(rng.integers(1, 7))
            fret = int(rng.integers(0, 13))
            technique = Technique()
            r = rng.uniform()
            if r < 0.12:
                technique = Technique(TechniqueKind.BEND,
                                      bend_semitones=float(rng.choice([0.5, 1.0, 2.0])))
            elif r < 0.22:
                technique = Technique(TechniqueKind.PALM_MUTE)
            elif r < 0.30:
                technique = Technique(TechniqueKind.HAMMER_ON)
            elif r < 0.36:
                technique = Technique(TechniqueKind.PULL_OFF)
            elif r < 0.44:
                technique = Technique(TechniqueKind.SLIDE,
                                      slide_to_fret=int(np.clip(fret + rng.integers(-4, 5),
                                                                0, 24)))
            elif r < 0.52:
                technique = Technique(TechniqueKind.VIBRATO)
            events.append(NoteEvent(onset, duration, string, fret, velocity, technique))
        onset += duration if rng.uniform() < 0.8 else duration + 480
    return Score(tempo_bpm=tempo_bpm, events=tuple(events))


def toy_corpus(n_scores: int = 10, seed: int = 0,
               target_seconds: float = 20.0) -> list[Score]:
    """Seed-fixed list of generated scores; same seed, same scores."""
    if n_scores < 1:
        raise DataError(f"need n_scores >= 1, got {n_scores}")
    rng = np.random.default_rng(seed)
    return [random_score(rng, target_seconds=target_seconds) for _ in range(n_scores)]
