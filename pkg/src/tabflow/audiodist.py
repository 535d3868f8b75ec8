"""Distribution and reconstruction distances over filterbank embeddings.

Each audio frame (1024 samples, hop 512, Hann) maps to a 64-band triangular
log-magnitude filterbank vector on a mel-spaced grid between 60 and 8000 Hz.
FAD is the Frechet (2-Wasserstein) distance between Gaussians fitted to two
embedding sets; KAD is the unbiased squared MMD with a Gaussian RBF kernel
and the median-distance bandwidth heuristic; the reconstruction distance is
the per-frame embedding difference norm averaged over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .latentcodec import FRAME_HOP, FRAME_LEN, hann_periodic, frame_count
from .stringsynth import AudioBuffer

EMBED_DIMS = 64
FMIN_HZ = 60.0
FMAX_HZ = 8000.0
COV_JITTER = 1e-6
LOG_FLOOR = 1e-8


@dataclass(frozen=True)
class EmbeddingSet:
    """M x E matrix of frame embeddings pooled over a corpus."""

    vectors: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise DataError(f"embeddings must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("embeddings contain non-finite values")
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    cov: np.ndarray


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def band_edges(n_bands: int = EMBED_DIMS, fmin: float = FMIN_HZ,
               fmax: float = FMAX_HZ) -> np.ndarray:
    """n_bands + 2 triangle edge frequencies, mel spaced."""
    return _mel_inv(np.linspace(_mel(fmin), _mel(fmax), n_bands + 2))


def band_centers(n_bands: int = EMBED_DIMS) -> np.ndarray:
    return band_edges(n_bands)[1:-1]


def band_of(freq: float, n_bands: int = EMBED_DIMS) -> int:
    """Index of the band with the strongest triangle response at freq."""
    edges = band_edges(n_bands)
    lo, mid, hi = edges[:-2], edges[1:-1], edges[2:]
    up = (freq - lo) / (mid - lo)
    down = (hi - freq) / (hi - mid)
    return int(np.argmax(np.clip(np.minimum(up, down), 0.0, None)))


def _filterbank(sample_rate: int) -> np.ndarray:
    """[n_bands, n_bins] triangular weights over the rFFT bin grid."""
    freqs = np.fft.rfftfreq(FRAME_LEN, d=1.0 / sample_rate)
    edges = band_edges()
    bank = np.zeros((EMBED_DIMS, len(freqs)))
    for i in range(EMBED_DIMS):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def embed(audio: AudioBuffer, source_label: str = "") -> EmbeddingSet:
    """Per-frame log filterbank embedding; framing matches the latent codec."""
    x = np.asarray(audio.samples, dtype=np.float64)
    n_frames = frame_count(len(x))  # raises for audio under one frame
    idx = np.arange(FRAME_LEN)[None, :] + FRAME_HOP * np.arange(n_frames)[:, None]
    frames = x[idx] * hann_periodic(FRAME_LEN)[None, :]
    mags = np.abs(np.fft.rfft(frames, axis=1))
    feats = np.log(mags @ _filterbank(audio.sample_rate).T + LOG_FLOOR)
    return EmbeddingSet(feats, source_label)


def fit_gaussian(e: EmbeddingSet) -> GaussianFit:
    if len(e) < 2:
        raise DataError("need at least 2 vectors for a Gaussian fit")
    mean = e.vectors.mean(axis=0)
    cov = np.cov(e.vectors, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov) + COV_JITTER * np.eye(e.vectors.shape[1])
    return GaussianFit(mean, cov)


def _psd_sqrt(mat: np.ndarray, what: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() < -1e-8:
        raise NumericError(f"{what}: eigenvalue {vals.min():.3e} below tolerance")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian(mean_a: np.ndarray, cov_a: np.ndarray,
                     mean_b: np.ndarray, cov_b: np.ndarray) -> float:
    """|mu_a - mu_b|^2 + Tr(Ca + Cb - 2 (Ca Cb)^(1/2)).

    The cross term uses the symmetric product sqrt(Ca) Cb sqrt(Ca), whose
    eigenvalues match those of Ca Cb but stay real.
    """
    diff = np.asarray(mean_a) - np.asarray(mean_b)
    root_a = _psd_sqrt(np.asarray(cov_a), "covariance sqrt")
    inner = root_a @ np.asarray(cov_b) @ root_a
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -1e-8:
        raise NumericError(f"cross-covariance sqrt failed: eigenvalue {vals.min():.3e}")
    tr_cross = np.sqrt(np.clip(vals, 0.0, None)).sum()
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_cross)


def fad(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Frechet distance between Gaussian fits of the two sets."""
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise DataError("embedding dims differ")
    ga, gb = fit_gaussian(a), fit_gaussian(b)
    return frechet_gaussian(ga.mean, ga.cov, gb.mean, gb.cov)


def median_bandwidth(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Median pairwise Euclidean distance over the pooled sets (self pairs excluded)."""
    pooled = np.vstack([a.vectors, b.vectors])
    sq = np.sum(pooled ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pooled @ pooled.T)
    iu = np.triu_indices(len(pooled), k=1)
    med = float(np.median(np.sqrt(np.clip(d2[iu], 0.0, None))))
    return med if med > 0.0 else 1.0


def kad(a: EmbeddingSet, b: EmbeddingSet, bandwidth: float | None = None) -> float:
    """Unbiased squared MMD with Gaussian RBF kernel exp(-d^2 / (2 sigma^2)).

    May be slightly negative near zero; that is the unbiased estimator, not a
    bug. sigma defaults to the median heuristic.
    """
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise DataError("embedding dims differ")
    if len(a) < 2 or len(b) < 2:
        raise DataError("need at least 2 vectors per set")
    sigma = median_bandwidth(a, b) if bandwidth is None else float(bandwidth)
    gamma = 1.0 / (2.0 * sigma * sigma)

    def gram(x, y):
        sx = np.sum(x ** 2, axis=1)
        sy = np.sum(y ** 2, axis=1)
        d2 = sx[:, None] + sy[None, :] - 2.0 * (x @ y.T)
        return np.exp(-gamma * np.clip(d2, 0.0, None))

    kaa = gram(a.vectors, a.vectors)
    kbb = gram(b.vectors, b.vectors)
    kab = gram(a.vectors, b.vectors)
    m, n = len(a), len(b)
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(term_a + term_b - 2.0 * kab.mean())


def recon_distance(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Mean over frames of the per-frame embedding difference norm.

    Requires frame alignment: both sets must come from content-paired audio.
    """
    if a.vectors.shape != b.vectors.shape:
        raise DataError(
            f"reconstruction distance needs aligned frames: "
            f"{a.vectors.shape} vs {b.vectors.shape}"
        )
    return float(np.mean(np.linalg.norm(a.vectors - b.vectors, axis=1)))
