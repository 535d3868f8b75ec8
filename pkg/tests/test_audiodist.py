import numpy as np
import pytest

from tabflow.audiodist import (EmbeddingSet, band_of, embed, fad,
                               frechet_gaussian, kad, median_bandwidth,
                               recon_distance, LOG_FLOOR)
from tabflow.errors import DataError
from tabflow.latentcodec import encode
from tabflow.stringsynth import AudioBuffer

FS = 44100


def _set(arr):
    return EmbeddingSet(np.asarray(arr, dtype=np.float64))


# --- embedding ----------------------------------------------------------------

def test_silence_embeds_to_constant_log_floor():
    e = embed(AudioBuffer(np.zeros(8192), FS))
    assert np.allclose(e.vectors, np.log(LOG_FLOOR))


def test_sine_activates_band_containing_440():
    t = np.arange(2 * FS) / FS
    e = embed(AudioBuffer(0.5 * np.sin(2 * np.pi * 440.0 * t), FS))
    expected = band_of(440.0)
    assert np.all(np.argmax(e.vectors, axis=1) == expected)


def test_frame_count_matches_codec():
    rng = np.random.default_rng(0)
    audio = AudioBuffer(rng.uniform(-0.3, 0.3, 50000), FS)
    assert len(embed(audio)) == encode(audio, 64).n_frames


def test_embed_rejects_short_audio():
    with pytest.raises(DataError):
        embed(AudioBuffer(np.zeros(512), FS))


def test_embedding_is_deterministic():
    rng = np.random.default_rng(1)
    audio = AudioBuffer(rng.uniform(-0.3, 0.3, 20000), FS)
    assert np.array_equal(embed(audio).vectors, embed(audio).vectors)


# --- FAD ----------------------------------------------------------------------

def test_fad_of_identical_sets_is_zero():
    rng = np.random.default_rng(2)
    x = _set(rng.standard_normal((400, 8)))
    assert fad(x, x) < 1e-6


def test_fad_mean_shift_matches_closed_form():
    rng = np.random.default_rng(3)
    a = _set(rng.standard_normal((100_000, 1)))
    b = _set(rng.standard_normal((100_000, 1)) + 1.0)
    assert fad(a, b) == pytest.approx(1.0, abs=0.05)


def test_frechet_trace_term_diagonal_fixture():
    # Tr(I + 4I - 2*sqrt(4)*I) over E=2 dims = 2 exactly
    val = frechet_gaussian(np.zeros(2), np.eye(2), np.zeros(2), 4.0 * np.eye(2))
    assert val == pytest.approx(2.0, abs=1e-9)


def test_fad_symmetry():
    rng = np.random.default_rng(4)
    a = _set(rng.standard_normal((300, 5)))
    b = _set(rng.standard_normal((300, 5)) * 1.5 + 0.3)
    assert fad(a, b) == pytest.approx(fad(b, a), abs=1e-9)


def test_fad_invariant_under_joint_rotation():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((2000, 6))
    b = rng.standard_normal((2000, 6)) * 0.7 + 0.5
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    base = fad(_set(a), _set(b))
    rotated = fad(_set(a @ q), _set(b @ q))
    assert rotated == pytest.approx(base, abs=1e-6)


def test_fad_monotone_in_mean_separation():
    rng = np.random.default_rng(6)
    base = rng.standard_normal((10_000, 1))
    values = [fad(_set(base), _set(rng.standard_normal((10_000, 1)) + d))
              for d in (0.5, 1.0, 2.0)]
    assert values[0] < values[1] < values[2]


def test_fad_dim_mismatch_rejected():
    with pytest.raises(DataError):
        fad(_set(np.zeros((10, 3))), _set(np.zeros((10, 4))))


def test_fad_needs_two_vectors():
    with pytest.raises(DataError):
        fad(_set(np.zeros((1, 3))), _set(np.zeros((10, 3))))


# --- KAD ----------------------------------------------------------------------

def test_kad_same_distribution_magnitude_small():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((2000, 1))
    assert abs(kad(_set(z[:1000]), _set(z[1000:]))) < 0.01


def test_kad_separation_exceeds_10x_baseline():
    rng = np.random.default_rng(8)
    z = rng.standard_normal((2000, 1))
    baseline = abs(kad(_set(z[:1000]), _set(z[1000:])))
    shifted = kad(_set(rng.standard_normal((1000, 1))),
                  _set(rng.standard_normal((1000, 1)) + 5.0))
    assert shifted > 10 * max(baseline, 1e-6)


def test_kad_hand_computed_two_point_sets():
    a = _set(np.zeros((2, 1)))
    b = _set(np.ones((2, 1)))
    expected = 1.0 + 1.0 - 2.0 * np.exp(-0.5)  # k(0,0)=k(1,1)=1, k(0,1)=e^-1/2
    assert kad(a, b, bandwidth=1.0) == pytest.approx(expected, abs=1e-12)


def test_kad_symmetry():
    rng = np.random.default_rng(9)
    a = _set(rng.standard_normal((200, 3)))
    b = _set(rng.standard_normal((200, 3)) + 0.4)
    assert kad(a, b) == pytest.approx(kad(b, a), abs=1e-9)


def test_median_bandwidth_positive():
    rng = np.random.default_rng(10)
    a = _set(rng.standard_normal((50, 2)))
    b = _set(rng.standard_normal((50, 2)))
    assert median_bandwidth(a, b) > 0


# --- reconstruction distance ---------------------------------------------------

def test_recon_identical_is_zero():
    rng = np.random.default_rng(11)
    x = _set(rng.standard_normal((20, 4)))
    assert recon_distance(x, x) == 0.0


def test_recon_single_frame_pythagorean():
    a = np.zeros((1, 8))
    b = np.zeros((1, 8))
    b[0, :2] = (3.0, 4.0)
    assert recon_distance(_set(a), _set(b)) == pytest.approx(5.0)


def test_recon_homogeneity():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((30, 4))
    d = rng.standard_normal((30, 4))
    one = recon_distance(_set(a), _set(a + d))
    two = recon_distance(_set(a), _set(a + 2 * d))
    assert two == pytest.approx(2 * one, rel=1e-9)


def test_recon_triangle_inequality():
    rng = np.random.default_rng(13)
    a, b, c = (rng.standard_normal((40, 5)) for _ in range(3))
    assert recon_distance(_set(a), _set(c)) <= (
        recon_distance(_set(a), _set(b)) + recon_distance(_set(b), _set(c)) + 1e-12)


def test_recon_frame_mismatch_rejected():
    with pytest.raises(DataError, match="aligned"):
        recon_distance(_set(np.zeros((3, 4))), _set(np.zeros((4, 4))))
