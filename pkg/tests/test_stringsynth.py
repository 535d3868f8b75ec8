import numpy as np
import pytest

from tabflow.errors import DataError
from tabflow.fixtures import cents_between, count_onsets, oracle_pitch, rms_db
from tabflow.stringsynth import (PSEUDO_REAL, SYNTHETIC, AudioBuffer,
                                 RenderStyle, STYLE_PRESETS, amp_process,
                                 normalize_rms, render)
from tabflow.tabscore import NoteEvent, Score, Technique, TechniqueKind
from tabflow import event_pitch

FS = 44100


def one_note_score(string=6, fret=0, technique=Technique(), duration=1920):
    return Score(events=(NoteEvent(0, duration, string, fret, technique=technique),))


def steady(samples, start=0.15, end=0.45):
    return samples[int(start * FS):int(end * FS)]


def test_presets_exist_with_required_properties():
    assert set(STYLE_PRESETS) == {"synthetic", "pseudo_real"}
    assert SYNTHETIC.timing_jitter_ms == 0.0 and SYNTHETIC.detune_cents == 0.0
    assert PSEUDO_REAL.timing_jitter_ms <= 10.0
    assert PSEUDO_REAL.detune_cents <= 5.0
    assert PSEUDO_REAL.brightness != SYNTHETIC.brightness
    assert PSEUDO_REAL.decay_scale != SYNTHETIC.decay_scale


def test_open_low_e_fundamental_within_10_cents():
    score = one_note_score(6, 0)
    audio = render(score, SYNTHETIC, FS)
    f = oracle_pitch(steady(audio.samples), FS)
    assert abs(cents_between(f, event_pitch(score, score.events[0]))) < 10.0
    assert f == pytest.approx(82.4069, rel=0.01)


def test_fret_12_doubles_fundamental():
    f_open = oracle_pitch(steady(render(one_note_score(6, 0), SYNTHETIC, FS).samples), FS)
    f_12 = oracle_pitch(steady(render(one_note_score(6, 12), SYNTHETIC, FS).samples), FS)
    assert f_12 / f_open == pytest.approx(2.0, abs=0.02)


@pytest.mark.parametrize("string", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("fret", [0, 12])
def test_all_strings_in_tune_for_both_styles(string, fret):
    score = one_note_score(string, fret)
    reference = event_pitch(score, score.events[0])
    for style in (SYNTHETIC, PSEUDO_REAL):
        audio = render(score, style, FS)
        f = oracle_pitch(steady(audio.samples), FS)
        budget = 10.0 + style.detune_cents
        assert abs(cents_between(f, reference)) < budget


def test_palm_mute_decays_at_least_6_db_faster():
    plain = render(one_note_score(6, 0), SYNTHETIC, FS).samples
    muted = render(one_note_score(6, 0, Technique(TechniqueKind.PALM_MUTE)),
                   SYNTHETIC, FS).samples
    window = slice(int(0.4 * FS), int(0.6 * FS))
    assert rms_db(muted[window]) <= rms_db(plain[window]) - 6.0


def test_render_is_deterministic():
    score = one_note_score(4, 7)
    a = render(score, PSEUDO_REAL, FS).samples
    b = render(score, PSEUDO_REAL, FS).samples
    assert np.array_equal(a, b)


def test_render_length_is_last_offset_plus_tail_for_both_styles():
    score = Score(events=(NoteEvent(0, 960, 6, 0), NoteEvent(960, 960, 5, 2)))
    n_expected = int(round((1920 * score.seconds_per_tick() + 1.0) * FS))
    for style in (SYNTHETIC, PSEUDO_REAL):
        assert len(render(score, style, FS).samples) == n_expected


def test_content_pairing_equal_onset_counts():
    score = Score(events=tuple(NoteEvent(3840 * i, 960, 6, i) for i in range(4)))
    a = render(score, SYNTHETIC, FS)
    b = render(score, PSEUDO_REAL, FS)
    assert count_onsets(a.samples, FS) == count_onsets(b.samples, FS) == 4


def test_chord_stagger_is_8ms_per_ascending_string():
    score = Score(events=(NoteEvent(0, 1920, 6, 0), NoteEvent(0, 1920, 5, 0),
                          NoteEvent(0, 1920, 4, 0)))
    samples = render(score, SYNTHETIC, FS).samples
    # strings start at 0 / 8 / 16 ms; energy before 8 ms comes from string 6 only
    first = np.flatnonzero(np.abs(samples) > 1e-6)[0]
    assert first < int(0.002 * FS)


def test_bend_glides_pitch_to_target():
    technique = Technique(TechniqueKind.BEND, bend_semitones=2.0)
    score = one_note_score(6, 5, technique, duration=3840)  # 2 s at 120 bpm
    samples = render(score, SYNTHETIC, FS).samples
    f_ref = event_pitch(score, score.events[0])
    f_start = oracle_pitch(samples[int(0.05 * FS):int(0.35 * FS)], FS)
    f_end = oracle_pitch(samples[int(1.75 * FS):int(2.0 * FS)], FS)
    assert abs(cents_between(f_start, f_ref)) < 60.0  # still gliding upward
    assert abs(cents_between(f_end, f_ref * 2 ** (2 / 12))) < 25.0


def test_slide_reaches_target_fret():
    technique = Technique(TechniqueKind.SLIDE, slide_to_fret=7)
    score = one_note_score(6, 3, technique, duration=3840)
    samples = render(score, SYNTHETIC, FS).samples
    target = event_pitch(score, NoteEvent(0, 1, 6, 7))
    f_end = oracle_pitch(samples[int(1.8 * FS):int(2.05 * FS)], FS)
    assert abs(cents_between(f_end, target)) < 25.0


def test_legato_reexcites_quieter():
    plain = render(one_note_score(5, 5), SYNTHETIC, FS).samples
    hammered = render(one_note_score(5, 5, Technique(TechniqueKind.HAMMER_ON)),
                      SYNTHETIC, FS).samples
    early = slice(0, int(0.1 * FS))
    assert rms_db(hammered[early]) == pytest.approx(rms_db(plain[early]) - 6.0, abs=1.5)


def test_empty_score_rejected():
    with pytest.raises(DataError, match="empty"):
        render(Score(), SYNTHETIC, FS)


def test_pitch_above_quarter_rate_rejected():
    high_tuning = tuple(p + 14 for p in Score().tuning)  # open string 1 at MIDI 78
    score = Score(tuning=high_tuning,
                  events=(NoteEvent(0, 1920, 1, 24),))  # MIDI 102 ~ 2960 Hz
    with pytest.raises(DataError, match="exceeds"):
        render(score, SYNTHETIC, 8000)  # limit is 2 kHz at 8 kHz rate


def test_low_sample_rate_bound():
    with pytest.raises(DataError, match="8000"):
        render(one_note_score(), SYNTHETIC, 4000)


def test_render_stays_in_unit_range():
    events = tuple(NoteEvent(0, 1920, s, 0, velocity=127) for s in range(1, 7))
    audio = render(Score(events=events), PSEUDO_REAL, FS)
    assert np.abs(audio.samples).max() <= 1.0


# --- amplifier ---------------------------------------------------------------

def test_amp_zero_in_zero_out():
    out = amp_process(AudioBuffer(np.zeros(256), FS), drive=6.0)
    assert np.array_equal(out.samples, np.zeros(256, dtype=np.float32))


def test_amp_small_signal_linearity():
    rng = np.random.default_rng(0)
    x = (0.1 * rng.uniform(-1, 1, 4096))
    drive = 1e-2
    out = amp_process(AudioBuffer(x, FS), drive=drive, tone_cutoff=None).samples
    assert np.max(np.abs(out - drive * x)) < 1e-4


def test_amp_constant_one_drive_two_is_tanh_two():
    x = np.ones(64)
    out = amp_process(AudioBuffer(x, FS), drive=2.0, tone_cutoff=None).samples
    assert out[0] == pytest.approx(np.tanh(2.0), abs=1e-6)
    assert out[0] == pytest.approx(0.9640, abs=1e-4)


def test_amp_never_exceeds_unit_range():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, 8192)
    out = amp_process(AudioBuffer(x, FS), drive=10.0, tone_cutoff=2000.0).samples
    assert np.abs(out).max() <= 1.0
    assert len(out) == len(x)


def test_amp_is_monotone_memoryless_before_filter():
    x = np.linspace(-1, 1, 101)
    out = amp_process(AudioBuffer(x, FS), drive=4.0, tone_cutoff=None).samples
    assert np.all(np.diff(out) > 0)


# --- RMS normalization --------------------------------------------------------

def test_normalize_sine_to_minus_9_db():
    t = np.arange(FS) / FS
    sine = AudioBuffer(np.sin(2 * np.pi * 220.0 * t), FS)
    out = normalize_rms(sine, -9.0)
    gain = out.samples[1000] / sine.samples[1000]
    assert gain == pytest.approx(10 ** (-9 / 20) * np.sqrt(2), abs=1e-4)
    assert gain == pytest.approx(0.5012, abs=2e-3)
    rms = np.sqrt(np.mean(out.samples.astype(np.float64) ** 2))
    assert rms == pytest.approx(10 ** (-9 / 20), rel=1e-6)


def test_normalize_fixed_point():
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.5, 0.5, 10000)
    once = normalize_rms(AudioBuffer(x, FS), -9.0)
    twice = normalize_rms(once, -9.0)
    np.testing.assert_allclose(twice.samples, once.samples, rtol=1e-6)


def test_normalize_silence_rejected():
    with pytest.raises(DataError, match="silence"):
        normalize_rms(AudioBuffer(np.zeros(100), FS), -9.0)


def test_normalize_preserves_shape():
    rng = np.random.default_rng(3)
    x = rng.uniform(-0.2, 0.2, 5000)
    out = normalize_rms(AudioBuffer(x, FS), -9.0).samples.astype(np.float64)
    ratio = out[np.abs(x) > 0.01] / x[np.abs(x) > 0.01]
    assert ratio.std() / ratio.mean() < 1e-6


def test_style_validation():
    with pytest.raises(DataError):
        RenderStyle("bad", 0, brightness=1.5, decay_scale=1.0, detune_cents=0,
                    timing_jitter_ms=0, pick_noise_gain=0)
    with pytest.raises(DataError):
        RenderStyle("bad", 0, brightness=0.5, decay_scale=0.0, detune_cents=0,
                    timing_jitter_ms=0, pick_noise_gain=0)
