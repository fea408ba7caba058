"""Framing and correlation features.

Implements the classical cross-correlation and the generalized
cross-correlation with beta-weighted phase transform:

    gcc[f] = X_l[f] X_m*[f] / (|X_l[f] X_m*[f]|^beta + gamma)

beta = 1, gamma = 0 is GCC-PHAT; beta = 0, gamma = 0 leaves the raw
cross-spectrum, whose inverse transform is the plain cross-correlation
CC(tau) = sum_n x_l[n] x_m[n - tau]. Correlation spectra are computed
on frames zero-padded to 2L so lags cover -(L-1)..(L-1) without
circular wrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import MicArray, MicPair

# relative floor used when GccConfig.gamma is None: gamma becomes
# GAMMA_RELATIVE_FLOOR * mean in-band cross-power magnitude
GAMMA_RELATIVE_FLOOR = 1e-12

_WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class FrameConfig:
    """Analysis framing: length L (a power of two), hop, window."""

    frame_len: int
    hop: int
    window: str = "rectangular"

    def __post_init__(self):
        L = self.frame_len
        if L < 2 or (L & (L - 1)) != 0:
            raise ValueError(f"frame_len must be a power of two >= 2, got {L}")
        if not (0 < self.hop <= L):
            raise ValueError(f"hop must lie in (0, frame_len], got {self.hop}")
        if self.window not in _WINDOWS:
            raise ValueError(f"window must be one of {_WINDOWS}, got {self.window!r}")

    def window_values(self) -> np.ndarray:
        if self.window == "hann":
            return np.hanning(self.frame_len)
        return np.ones(self.frame_len)


def n_frames(n_samples: int, cfg: FrameConfig) -> int:
    """Number of whole frames that fit in a signal of n_samples."""
    if n_samples < cfg.frame_len:
        return 0
    return 1 + (n_samples - cfg.frame_len) // cfg.hop


def frame_signal(x: np.ndarray, cfg: FrameConfig, frame_index: int) -> np.ndarray:
    """Extract (and window) frame ``frame_index`` from a 1D signal.

    Frame i covers samples [i * hop, i * hop + L); successive frames
    advance by ``hop``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1D signal, got shape {x.shape}")
    start = frame_index * cfg.hop
    stop = start + cfg.frame_len
    if frame_index < 0 or stop > len(x):
        raise ValueError(
            f"frame {frame_index} out of range for signal of {len(x)} samples"
        )
    return x[start:stop] * cfg.window_values()


def frame_stack(signals: np.ndarray, cfg: FrameConfig, frame_index: int) -> np.ndarray:
    """Extract the same frame from every channel of an (M, T) signal."""
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    return np.stack([frame_signal(ch, cfg, frame_index) for ch in signals])


@dataclass
class SpectralFrame:
    """DFT of one frame: complex bins plus their frequencies in Hz.

    Bin order follows numpy's fft (two-sided: 0, positive, negative).
    """

    bins: np.ndarray
    freqs: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=complex)
        self.freqs = np.asarray(self.freqs, dtype=float)
        if self.bins.shape != self.freqs.shape:
            raise ValueError("bins and freqs must have matching shapes")

    @property
    def n_fft(self) -> int:
        return len(self.bins)


def spectrum(frame: np.ndarray, sample_rate: float, n_fft: int | None = None) -> SpectralFrame:
    """Two-sided DFT of a frame, optionally zero-padded to n_fft."""
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 1:
        raise ValueError(f"expected a 1D frame, got shape {frame.shape}")
    n = n_fft if n_fft is not None else len(frame)
    if n < len(frame):
        raise ValueError("n_fft must be >= frame length")
    bins = np.fft.fft(frame, n)
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate)
    return SpectralFrame(bins, freqs, float(sample_rate))


@dataclass(frozen=True)
class GccConfig:
    """Weighting for the generalized cross-correlation.

    gamma = None selects a small relative floor (see
    GAMMA_RELATIVE_FLOOR); band = None means the full band
    [0, sample_rate / 2]. Band limits apply to |f|, keeping the
    two-sided spectrum conjugate-symmetric.
    """

    beta: float = 1.0
    gamma: float | None = None
    band: tuple[float, float] | None = None

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.band is not None:
            lo, hi = self.band
            if not (0 <= lo < hi):
                raise ValueError(f"band must satisfy 0 <= f_lo < f_hi, got {self.band}")


@dataclass
class LagVector:
    """A correlation sampled at integer lags -K..K (K = L - 1).

    ``values[i]`` corresponds to lag ``i - K``; lag spacing is one
    sample, 1 / sample_rate seconds.
    """

    values: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) % 2 != 1:
            raise ValueError("lag vector must be 1D with odd length (lags -K..K)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("lag values must be finite")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def max_lag(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def lags(self) -> np.ndarray:
        k = self.max_lag
        return np.arange(-k, k + 1)

    @property
    def lag_times(self) -> np.ndarray:
        return self.lags / self.sample_rate

    def at_lag(self, k: int) -> float:
        if abs(k) > self.max_lag:
            raise ValueError(f"lag {k} outside [-{self.max_lag}, {self.max_lag}]")
        return float(self.values[k + self.max_lag])

    def copy(self) -> "LagVector":
        return LagVector(self.values.copy(), self.sample_rate)


@dataclass
class SpectralGcc:
    """A weighted cross-spectrum over the two-sided DFT grid.

    ``in_band`` marks the bins that carry the feature; everything
    outside is exactly zero.
    """

    values: np.ndarray
    freqs: np.ndarray
    sample_rate: float
    in_band: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.in_band = np.asarray(self.in_band, dtype=bool)
        if not (self.values.shape == self.freqs.shape == self.in_band.shape):
            raise ValueError("values, freqs and in_band must have matching shapes")

    @property
    def n_fft(self) -> int:
        return len(self.values)

    def copy(self) -> "SpectralGcc":
        return SpectralGcc(
            self.values.copy(), self.freqs.copy(), self.sample_rate, self.in_band.copy()
        )


def cross_correlation(xl: np.ndarray, xm: np.ndarray, sample_rate: float = 1.0) -> LagVector:
    """Classical cross-correlation CC(tau) = sum_n xl[n] xm[n - tau].

    Computed by FFT on a 2L zero-padded grid; identical to the direct
    double sum up to rounding. Positive lags mean xl is the delayed
    copy (a source closer to mic m than to mic l gives a positive
    peak lag for the pair (l, m)).
    """
    xl = np.asarray(xl, dtype=float)
    xm = np.asarray(xm, dtype=float)
    if xl.shape != xm.shape or xl.ndim != 1:
        raise ValueError("inputs must be 1D and of equal length")
    L = len(xl)
    n = 2 * L
    spec = np.fft.rfft(xl, n) * np.conj(np.fft.rfft(xm, n))
    c = np.fft.irfft(spec, n)
    k = L - 1
    values = np.concatenate([c[n - k:], c[: k + 1]])
    return LagVector(values, sample_rate)


def _band_mask(freqs: np.ndarray, band: tuple[float, float] | None, sample_rate: float):
    if band is None:
        band = (0.0, sample_rate / 2.0)
    lo, hi = band
    absf = np.abs(freqs)
    return (absf >= lo) & (absf <= hi), (float(lo), float(hi))


def gcc_phat(
    xl_spec: SpectralFrame, xm_spec: SpectralFrame, cfg: GccConfig | None = None
) -> SpectralGcc:
    """Weighted cross-spectrum of two frames (GCC-PHAT family).

    Out-of-band bins are zeroed exactly. A bin whose denominator is 0
    (zero cross-power with beta > 0 and gamma = 0) is set to 0.
    """
    cfg = cfg or GccConfig()
    if xl_spec.n_fft != xm_spec.n_fft or xl_spec.sample_rate != xm_spec.sample_rate:
        raise ValueError("spectra must share the DFT grid and sample rate")
    cross = xl_spec.bins * np.conj(xm_spec.bins)
    mask, _ = _band_mask(xl_spec.freqs, cfg.band, xl_spec.sample_rate)
    mag = np.abs(cross)
    if cfg.gamma is not None:
        gamma = cfg.gamma
    else:
        inband_mag = mag[mask]
        gamma = GAMMA_RELATIVE_FLOOR * float(inband_mag.mean()) if inband_mag.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = mag**cfg.beta + gamma
        weighted = np.where(denom > 0, cross / np.where(denom > 0, denom, 1.0), 0.0)
    weighted = np.where(mask, weighted, 0.0)
    return SpectralGcc(weighted, xl_spec.freqs.copy(), xl_spec.sample_rate, mask)


def temporal_gcc(g: SpectralGcc) -> LagVector:
    """Inverse-transform a spectral GCC to lags -(n/2 - 1)..(n/2 - 1).

    Takes the real part (the spectrum of a real correlation is
    conjugate-symmetric; any residual imaginary part is rounding).
    The result is centered on lag 0; the single wrap slot at lag
    +/- n/2 is dropped. For a raw cross-spectrum of 2L-padded frames
    that slot is identically zero and nothing is lost; for reweighted
    spectra (PHAT, band-limited) it is generally small but nonzero,
    so temporal_gcc followed by spectral_from_lags projects the
    spectrum onto correlations supported on the kept lags.
    """
    n = g.n_fft
    if n % 2 != 0:
        raise ValueError("temporal_gcc expects an even DFT length")
    gt = np.fft.ifft(g.values).real
    k = n // 2 - 1
    values = np.concatenate([gt[n - k:], gt[: k + 1]])
    return LagVector(values, g.sample_rate)


def spectral_from_lags(lag: LagVector, in_band: np.ndarray | None = None) -> SpectralGcc:
    """Rebuild a SpectralGcc from a lag vector.

    Left inverse of temporal_gcc: rebuilding and transforming back
    returns the lag values unchanged. The wrap slot at lag n/2 is
    restored as zero. If ``in_band`` is given, out-of-band bins of
    the rebuilt spectrum are zeroed again.
    """
    k = lag.max_lag
    n = 2 * (k + 1)
    circ = np.zeros(n)
    circ[: k + 1] = lag.values[k:]
    circ[n - k:] = lag.values[:k]
    values = np.fft.fft(circ)
    freqs = np.fft.fftfreq(n, d=1.0 / lag.sample_rate)
    if in_band is None:
        in_band = np.ones(n, dtype=bool)
    values = np.where(in_band, values, 0.0)
    return SpectralGcc(values, freqs, lag.sample_rate, in_band)


def analysis_band(array: MicArray, cfg: FrameConfig | None = None) -> tuple[float, float]:
    """Default analysis band [0, f_hi] for an array.

    f_hi = min(f_s / 2, c / (2 d_min)) caps the band at the spatial
    aliasing limit of the closest microphone pair. Intended for
    compact arrays; override freely for distributed ones.
    """
    f_hi = min(array.sample_rate / 2.0, array.speed_of_sound / (2.0 * array.min_spacing()))
    return (0.0, f_hi)


def pair_spectra(frames: np.ndarray, sample_rate: float, pad_factor: int = 2):
    """FFT every channel of an (M, L) frame block, zero-padded."""
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    n = pad_factor * frames.shape[1]
    return [spectrum(ch, sample_rate, n_fft=n) for ch in frames]


def compute_spectral_gccs(
    frames: np.ndarray, array: MicArray, cfg: GccConfig | None = None
) -> dict[MicPair, SpectralGcc]:
    """Weighted cross-spectra for every microphone pair of a frame block."""
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    if frames.shape[0] != array.n_mics:
        raise ValueError(
            f"frame block has {frames.shape[0]} channels for {array.n_mics} microphones"
        )
    specs = pair_spectra(frames, array.sample_rate)
    return {p: gcc_phat(specs[p.l], specs[p.m], cfg) for p in array.pairs()}


def compute_lag_vectors(
    frames: np.ndarray, array: MicArray, cfg: GccConfig | None = None
) -> dict[MicPair, LagVector]:
    """Temporal GCCs for every pair (inverse transforms of the spectra)."""
    gccs = compute_spectral_gccs(frames, array, cfg)
    return {p: temporal_gcc(g) for p, g in gccs.items()}


def compute_cc_lag_vectors(frames: np.ndarray, array: MicArray) -> dict[MicPair, LagVector]:
    """Classical cross-correlations for every pair."""
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    if frames.shape[0] != array.n_mics:
        raise ValueError(
            f"frame block has {frames.shape[0]} channels for {array.n_mics} microphones"
        )
    return {
        p: cross_correlation(frames[p.l], frames[p.m], array.sample_rate)
        for p in array.pairs()
    }
