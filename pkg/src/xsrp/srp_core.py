"""Steered-response-power maps.

A map assigns each candidate location the power of a beamformer
steered at it, accumulated over microphone pairs:

  time domain       score(u) = sum_pairs lag[round(tau_lm(u) * fs)]
  frequency domain  score(u) = sum_pairs sum_f Re(gcc[f] e^{j 2 pi f tau_lm(u)})
  volumetric        score(V) = sum_pairs pool(lag[k], k in TDOA bounds of V)
  weighted          configurable per-frequency / per-pair combination

Cartesian grids use exact TDOAs, DOA grids the far-field form; the
two are never mixed within one map. A module-level counter tracks
candidate scorings and steering-kernel evaluations so complexity
claims can be checked; frequency-domain kernel counts are exactly
G * P * |F| with |F| the number of in-band bins.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .features import LagVector, SpectralGcc
from .geometry import (
    MicArray,
    MicPair,
    far_field_tdoa_matrix,
    max_tdoa,
    max_tdoa_vector,
    tdoa_matrix,
    tof_matrix,
)
from .grids import CandidateGrid, Volume, VolumeGrid



@dataclass
class EvalCounter:
    """Running totals: candidates scored and steering kernels evaluated."""

    points: int = 0
    kernel_ops: int = 0

    def reset(self) -> None:
        self.points = 0
        self.kernel_ops = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.points, self.kernel_ops)


#: global counter; reset() it around a measurement. Updated once per
#: map build, so it stays consistent under XSRP_THREADS > 1.
counter = EvalCounter()


def worker_count() -> int:
    """Worker cap from the XSRP_THREADS environment variable (default 1)."""
    raw = os.environ.get("XSRP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass
class SrpMap:
    """Scores over a candidate grid plus the metadata that produced them."""

    grid: CandidateGrid | VolumeGrid
    scores: np.ndarray
    domain: str
    band: tuple[float, float] | None = None
    frame_index: int | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if len(self.scores) != len(self.grid):
            raise ValueError(
                f"{len(self.scores)} scores for {len(self.grid)} candidates"
            )
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("map scores must be finite")
        if self.domain not in ("time", "frequency", "volumetric"):
            raise ValueError(f"unknown map domain {self.domain!r}")

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def __len__(self) -> int:
        return len(self.grid)


def _pairs_and_lags(lag_vectors: dict[MicPair, LagVector], array: MicArray):
    pairs = array.pairs()
    missing = [p for p in pairs if p not in lag_vectors]
    if missing:
        raise ValueError(f"lag vectors missing for pairs {missing}")
    return pairs, [lag_vectors[p] for p in pairs]


def _check_lag_coverage(array: MicArray, lags: list[LagVector]) -> None:
    # every in-room candidate TDOA satisfies |tau| <= max_tdoa, so it
    # is enough that the lag vectors cover the pair baselines
    fs = array.sample_rate
    for pair, lv in zip(array.pairs(), lags):
        need = int(round(max_tdoa(pair, array) * fs)) + 1
        if lv.max_lag < need:
            raise ValueError(
                f"lag vector for pair ({pair.l}, {pair.m}) covers +/-{lv.max_lag} "
                f"samples but the baseline needs {need}; use longer frames"
            )


def candidate_tdoas(points: np.ndarray, array: MicArray, far_field: bool = False) -> np.ndarray:
    """TDOA of every candidate for every pair, shape (G, P)."""
    if far_field:
        return far_field_tdoa_matrix(points, array)
    return tdoa_matrix(points, array)


def srp_time_scores(
    points: np.ndarray,
    lag_vectors: dict[MicPair, LagVector],
    array: MicArray,
    far_field: bool = False,
) -> np.ndarray:
    """Time-domain SRP at arbitrary points: nearest-lag projection."""
    pairs, lags = _pairs_and_lags(lag_vectors, array)
    _check_lag_coverage(array, lags)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    taus = candidate_tdoas(pts, array, far_field)
    fs = array.sample_rate
    scores = np.zeros(len(pts))
    for j, lv in enumerate(lags):
        idx = np.rint(taus[:, j] * fs).astype(int) + lv.max_lag
        scores += lv.values[idx]
    counter.points += len(pts)
    counter.kernel_ops += len(pts) * len(pairs)
    return scores


def srp_time_map(
    lag_vectors: dict[MicPair, LagVector],
    grid: CandidateGrid,
    array: MicArray,
    frame_index: int | None = None,
) -> SrpMap:
    """Time-domain SRP map over a grid (far-field for DOA grids)."""
    scores = srp_time_scores(grid.points, lag_vectors, array, far_field=grid.is_doa)
    return SrpMap(grid, scores, "time", frame_index=frame_index)


def _active_freqs(gccs: dict[MicPair, SpectralGcc], array: MicArray):
    pairs = array.pairs()
    missing = [p for p in pairs if p not in gccs]
    if missing:
        raise ValueError(f"spectral gccs missing for pairs {missing}")
    first = gccs[pairs[0]]
    for p in pairs[1:]:
        g = gccs[p]
        if g.n_fft != first.n_fft or not np.array_equal(g.in_band, first.in_band):
            raise ValueError("all pairs must share one DFT grid and band")
        if g.sample_rate != first.sample_rate:
            raise ValueError("all pairs must share one sample rate")
    mask = first.in_band
    return pairs, first.freqs[mask], mask


def _mic_delays(pts, array: MicArray, far_field: bool) -> np.ndarray:
    if far_field:
        # per-mic arrival offsets for a plane wave from bearing d;
        # differences give the far-field pair TDOAs
        return -(pts @ array.positions.T) / array.speed_of_sound  # (g, M)
    return tof_matrix(pts, array)


def _freq_scores_chunk(pts, array, far_field, pairs, freqs, gvals):
    delays = _mic_delays(pts, array, far_field)
    # steering e^{+j 2 pi f tau_lm(u)} factored per mic: tau_lm = tau_l - tau_m
    phases = np.exp((2j * math.pi) * delays[:, :, None] * freqs[None, None, :])  # (g, M, F)
    out = np.zeros(len(pts))
    for j, pair in enumerate(pairs):
        steer = phases[:, pair.l, :] * np.conj(phases[:, pair.m, :])
        out += (steer @ gvals[j]).real
    return out


def _half_spectrum(freqs: np.ndarray, mask: np.ndarray):
    """Reduce the two-sided in-band set to f >= 0 with symmetry weights.

    A negative-frequency bin of a conjugate-symmetric GCC contributes
    the same real part as its positive twin, so summing the positive
    half with weight 2 (weight 1 at f = 0 and at the unpaired Nyquist
    bin) is exact, at half the kernel cost.
    """
    n = len(freqs)
    pos = mask & (freqs > 0)
    zero = mask & (freqs == 0)
    nyq = np.zeros(n, dtype=bool)
    if n % 2 == 0:
        nyq[n // 2] = mask[n // 2]
    keep = pos | zero | nyq
    weights = np.where(pos & ~nyq, 2.0, 1.0)[keep]
    return keep, weights


def srp_freq_scores(
    points: np.ndarray,
    gccs: dict[MicPair, SpectralGcc],
    array: MicArray,
    far_field: bool = False,
) -> np.ndarray:
    """Frequency-domain SRP at arbitrary points.

    The sum runs over the two-sided in-band set; the implementation
    folds conjugate-symmetric bins, which is exact for the real
    correlations this consumes.
    """
    pairs, freqs_all, mask = _active_freqs(gccs, array)
    keep, half_w = _half_spectrum(next(iter(gccs.values())).freqs, mask)
    freqs = next(iter(gccs.values())).freqs[keep]
    gvals = [gccs[p].values[keep] * half_w for p in pairs]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    # bound the per-chunk steering tensor to a few tens of MB
    chunk = max(32, int(2e6 / max(1, array.n_mics * len(freqs))))
    chunks = [pts[i: i + chunk] for i in range(0, len(pts), chunk)]
    workers = worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda c: _freq_scores_chunk(c, array, far_field, pairs, freqs, gvals),
                    chunks,
                )
            )
    else:
        parts = [_freq_scores_chunk(c, array, far_field, pairs, freqs, gvals) for c in chunks]
    scores = np.concatenate(parts) if parts else np.zeros(0)
    counter.points += len(pts)
    counter.kernel_ops += len(pts) * len(pairs) * len(freqs_all)
    return scores


def srp_freq_map(
    gccs: dict[MicPair, SpectralGcc],
    grid: CandidateGrid,
    array: MicArray,
    frame_index: int | None = None,
) -> SrpMap:
    """Frequency-domain SRP map over a grid (far-field for DOA grids)."""
    pairs, freqs, _ = _active_freqs(gccs, array)
    scores = srp_freq_scores(grid.points, gccs, array, far_field=grid.is_doa)
    band = (float(np.min(np.abs(freqs))), float(np.max(np.abs(freqs)))) if len(freqs) else None
    return SrpMap(grid, scores, "frequency", band=band, frame_index=frame_index)


def make_time_scorer(lag_vectors, array: MicArray, far_field: bool = False):
    """points (N, 3) -> time-domain SRP scores (N,); feeds searches and tracking."""

    def scorer(points: np.ndarray) -> np.ndarray:
        return srp_time_scores(points, lag_vectors, array, far_field=far_field)

    return scorer


def make_freq_scorer(gccs, array: MicArray, far_field: bool = False):
    """points (N, 3) -> frequency-domain SRP scores (N,)."""

    def scorer(points: np.ndarray) -> np.ndarray:
        return srp_freq_scores(points, gccs, array, far_field=far_field)

    return scorer


@dataclass(frozen=True)
class TdoaBounds:
    """TDOA interval [tau_min, tau_max] of a pair over a volume."""

    tau_min: float
    tau_max: float

    def __post_init__(self):
        if self.tau_min > self.tau_max:
            raise ValueError("tau_min must be <= tau_max")


def tdoa_bounds(
    volume: Volume, pair: MicPair, array: MicArray, guard: float = 1.0
) -> TdoaBounds:
    """TDOA bounds over a box from its 8 vertices, widened by a guard.

    The guard is in samples (default 1) and absorbs the curvature the
    vertex evaluation misses for mics well outside the volume. Bounds
    are clamped to the pair's physical limit +/- max_tdoa.
    """
    if guard < 0:
        raise ValueError(f"guard must be >= 0, got {guard}")
    verts = volume.vertices()
    t = tof_matrix(verts, array)
    taus = t[:, pair.l] - t[:, pair.m]
    pad = guard / array.sample_rate
    lim = max_tdoa(pair, array)
    lo = max(float(taus.min()) - pad, -lim)
    hi = min(float(taus.max()) + pad, lim)
    return TdoaBounds(lo, hi)


_POOLS = ("sum", "mean", "max")


def vsrp_map(
    lag_vectors: dict[MicPair, LagVector],
    volume_grid: VolumeGrid,
    array: MicArray,
    pooling: str = "sum",
    guard: float = 1.0,
    frame_index: int | None = None,
) -> SrpMap:
    """Volumetric SRP: pool each pair's lags over the volume's TDOA bounds.

    A degenerate (zero-extent) volume with guard 0 reproduces the
    point SRP score at its center. Pooling is sum, mean or max per
    pair; pairs always combine by summation.
    """
    if pooling not in _POOLS:
        raise ValueError(f"pooling must be one of {_POOLS}, got {pooling!r}")
    pairs, lags = _pairs_and_lags(lag_vectors, array)
    _check_lag_coverage(array, lags)
    fs = array.sample_rate
    scores = np.zeros(len(volume_grid))
    for vi, vol in enumerate(volume_grid.volumes):
        total = 0.0
        for pair, lv in zip(pairs, lags):
            b = tdoa_bounds(vol, pair, array, guard)
            k0 = int(np.rint(b.tau_min * fs)) + lv.max_lag
            k1 = int(np.rint(b.tau_max * fs)) + lv.max_lag
            k0 = max(k0, 0)
            k1 = min(k1, len(lv.values) - 1)
            window = lv.values[k0: k1 + 1]
            if pooling == "sum":
                total += float(window.sum())
            elif pooling == "mean":
                total += float(window.mean())
            else:
                total += float(window.max())
        scores[vi] = total
    counter.points += len(volume_grid)
    counter.kernel_ops += len(volume_grid) * len(pairs)
    return SrpMap(volume_grid, scores, "volumetric", frame_index=frame_index)


@dataclass
class WsrpConfig:
    """Weighted-SRP combination rules.

    Frequencies combine first (sum or product over in-band bins),
    then pairs (sum, product, or the Hamacher t-norm). Weights
    divide their terms; a pair weight of inf excludes the pair
    outright. Product and Hamacher paths min-max normalize each
    pair map to [0, 1] first.
    """

    freq_combinator: str = "sum"
    pair_combinator: str = "sum"
    freq_weights: np.ndarray | None = None
    pair_weights: dict[MicPair, float] | None = None

    def __post_init__(self):
        if self.freq_combinator not in ("sum", "product"):
            raise ValueError(f"freq_combinator must be sum|product, got {self.freq_combinator!r}")
        if self.pair_combinator not in ("sum", "product", "hamacher"):
            raise ValueError(
                f"pair_combinator must be sum|product|hamacher, got {self.pair_combinator!r}"
            )
        if self.freq_weights is not None:
            w = np.asarray(self.freq_weights, dtype=float)
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("freq_weights must be positive and finite")
            self.freq_weights = w
        if self.pair_weights is not None:
            for p, w in self.pair_weights.items():
                if not (w > 0):
                    raise ValueError(f"pair weight for ({p.l}, {p.m}) must be > 0, got {w}")


@dataclass
class PairwiseFreqScores:
    """Per-pair, per-frequency steered responses over a grid.

    tensor[j, g, f] = Re(gcc_j[f] e^{j 2 pi f tau_j(u_g)}), the raw
    material the weighted-SRP combinators consume. Desk-scale only:
    memory is P x G x |F|.
    """

    tensor: np.ndarray
    pairs: list[MicPair]
    freqs: np.ndarray
    grid: CandidateGrid

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=float)
        if self.tensor.shape != (len(self.pairs), len(self.grid), len(self.freqs)):
            raise ValueError("tensor shape must be (P, G, F)")


def pairwise_freq_scores(
    gccs: dict[MicPair, SpectralGcc], grid: CandidateGrid, array: MicArray
) -> PairwiseFreqScores:
    """The (P, G, F) steered-response tensor for weighted combination."""
    pairs, freqs, mask = _active_freqs(gccs, array)
    pts = grid.points
    delays = _mic_delays(pts, array, grid.is_doa)
    phases = np.exp((2j * math.pi) * delays[:, :, None] * freqs[None, None, :])
    tensor = np.empty((len(pairs), len(pts), len(freqs)))
    for j, pair in enumerate(pairs):
        steer = phases[:, pair.l, :] * np.conj(phases[:, pair.m, :])
        tensor[j] = (steer * gccs[pair].values[mask][None, :]).real
    counter.points += len(pts)
    counter.kernel_ops += len(pts) * len(pairs) * len(freqs)
    return PairwiseFreqScores(tensor, pairs, freqs, grid)


def _minmax_rows(rows: np.ndarray) -> np.ndarray:
    lo = rows.min(axis=1, keepdims=True)
    hi = rows.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(rows)
    ok = span[:, 0] > 0
    out[ok] = (rows[ok] - lo[ok]) / span[ok]
    return out


def _hamacher(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    denom = a + b - a * b
    out = np.zeros_like(a)
    nz = denom > 0
    out[nz] = a[nz] * b[nz] / denom[nz]
    return out


def wsrp_map(
    pfs: PairwiseFreqScores, cfg: WsrpConfig | None = None, frame_index: int | None = None
) -> SrpMap:
    """Weighted SRP map from a steered-response tensor.

    With sum/sum combination and unit weights this reduces to the
    conventional frequency-domain map. Excluding a pair with weight
    inf is exactly equivalent to recomputing without it.
    """
    cfg = cfg or WsrpConfig()
    t = pfs.tensor
    if cfg.freq_weights is not None:
        if len(cfg.freq_weights) != t.shape[2]:
            raise ValueError(
                f"{len(cfg.freq_weights)} freq weights for {t.shape[2]} in-band bins"
            )
        t = t / cfg.freq_weights[None, None, :]
    per_pair = t.sum(axis=2) if cfg.freq_combinator == "sum" else t.prod(axis=2)
    weights = np.ones(len(pfs.pairs))
    if cfg.pair_weights:
        for j, p in enumerate(pfs.pairs):
            if p in cfg.pair_weights:
                weights[j] = cfg.pair_weights[p]
    keep = ~np.isinf(weights)
    if not keep.any():
        raise ValueError("all pairs excluded (weight inf); nothing to combine")
    rows = per_pair[keep] / weights[keep, None]
    if cfg.pair_combinator == "sum":
        scores = rows.sum(axis=0)
    else:
        norm = _minmax_rows(rows)
        if cfg.pair_combinator == "product":
            scores = np.prod(norm, axis=0)
        else:
            scores = norm[0]
            for r in norm[1:]:
                scores = _hamacher(scores, r)
    return SrpMap(pfs.grid, scores, "frequency", frame_index=frame_index)
