"""Composable localization pipeline.

A PipelineConfig picks one option per stage: grid builder, feature
extractor, map builder, searcher, optional feature updater
(de-emphasis) and grid updater. x_srp then runs the generic loop:

    estimates <- {}; grid <- build; features <- extract
    while grid: map <- build_map; estimates <- search;
                features <- update_features; grid <- update_grid

Single-source configs terminate after one pass (the grid updater
"none" empties the grid). The iterative searchers and the
de-emphasis loop run their full procedure inside one pass, calling
the same functions as their standalone counterparts, so pipeline
results match standalone compositions bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .features import (
    FrameConfig,
    GccConfig,
    analysis_band,
    compute_cc_lag_vectors,
    compute_spectral_gccs,
    temporal_gcc,
)
from .geometry import MicArray, MicPair
from .grids import (
    CandidateGrid,
    Volume,
    VolumeGrid,
    cartesian_grid,
    doa_grid,
    grid_in_volume,
    intersect_volumes,
    partition_room,
)
from .multisource import EstimateSet, MultiConfig, localize_multi
from .search import SearchConfig, argmax_search, refine_search, src_search
from .srp_core import (
    WsrpConfig,
    make_freq_scorer,
    make_time_scorer,
    pairwise_freq_scores,
    srp_freq_map,
    srp_time_map,
    vsrp_map,
    wsrp_map,
)


class ConfigError(ValueError):
    """A pipeline configuration that cannot be run."""


_GRID_KINDS = ("cartesian2d", "cartesian3d", "doa_azimuth", "doa_az_el", "volumes")
_FEATURE_KINDS = ("gcc_phat", "cc")
_MAP_DOMAINS = ("time", "frequency", "volumetric", "weighted")
_GRID_UPDATES = ("none", "contract", "subdivide")


@dataclass
class GridSpec:
    """Which candidate grid to build.

    Cartesian kinds need a resolution (meters); DOA kinds an azimuth
    (and optionally elevation) resolution in radians; "volumes" a
    per-axis count for the room partition.
    """

    kind: str = "cartesian3d"
    resolution: float | tuple | None = 0.1
    azimuth_res: float | None = None
    elevation_res: float | None = None
    counts: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.kind not in _GRID_KINDS:
            raise ConfigError(f"grid kind must be one of {_GRID_KINDS}, got {self.kind!r}")


@dataclass
class FeatureSpec:
    """Feature stage: classical CC or the beta-weighted GCC family.

    band = None selects the array's aliasing-capped analysis band.
    """

    kind: str = "gcc_phat"
    beta: float = 1.0
    gamma: float | None = None
    band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in _FEATURE_KINDS:
            raise ConfigError(f"feature kind must be one of {_FEATURE_KINDS}, got {self.kind!r}")


@dataclass
class MapSpec:
    """Map stage: domain plus volumetric pooling / weighted combination."""

    domain: str = "frequency"
    pooling: str = "sum"
    guard: float = 1.0
    wsrp: WsrpConfig | None = None

    def __post_init__(self):
        if self.domain not in _MAP_DOMAINS:
            raise ConfigError(f"map domain must be one of {_MAP_DOMAINS}, got {self.domain!r}")


@dataclass
class PipelineConfig:
    """One choice per pipeline stage; see validate_config for the rules."""

    grid: GridSpec = field(default_factory=GridSpec)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    map: MapSpec = field(default_factory=MapSpec)
    search: SearchConfig = field(default_factory=SearchConfig)
    multi: MultiConfig | None = None
    grid_update: str = "none"
    max_loop_iters: int = 50

    def __post_init__(self):
        if self.grid_update not in _GRID_UPDATES:
            raise ConfigError(
                f"grid_update must be one of {_GRID_UPDATES}, got {self.grid_update!r}"
            )
        if self.max_loop_iters < 1 or self.max_loop_iters > 50:
            raise ConfigError("max_loop_iters must lie in 1..50")


def validate_config(cfg: PipelineConfig, room=None) -> list[str]:
    """All reasons the config cannot run (empty list = valid)."""
    diags: list[str] = []
    g, f, m, s = cfg.grid, cfg.features, cfg.map, cfg.search
    doa = g.kind.startswith("doa")
    if f.kind == "cc" and m.domain in ("frequency", "weighted"):
        diags.append(
            "classical cc features carry no usable spectral phase weighting; "
            "frequency/weighted maps need gcc_phat"
        )
    if doa and m.domain == "volumetric":
        diags.append("volumetric maps need position volumes, not DOA grids")
    if m.domain == "volumetric" and g.kind != "volumes":
        diags.append("volumetric maps need grid kind 'volumes'")
    if g.kind == "volumes" and m.domain != "volumetric":
        diags.append("a volume partition only feeds volumetric maps")
    if g.kind in ("cartesian2d", "cartesian3d", "volumes") and room is None:
        diags.append(f"grid kind {g.kind!r} needs room dimensions")
    if g.kind.startswith("cartesian") and g.resolution is None:
        diags.append("cartesian grids need a resolution")
    if doa and g.azimuth_res is None:
        diags.append("DOA grids need azimuth_res")
    if g.kind == "doa_az_el" and g.elevation_res is None:
        diags.append("az-el grids need elevation_res")
    if s.mode in ("refine", "src"):
        if doa:
            diags.append(f"{s.mode} search contracts position regions; DOA grids unsupported")
        if m.domain in ("volumetric", "weighted"):
            diags.append(f"{s.mode} search needs a per-point score; use time or frequency maps")
        if room is None:
            diags.append(f"{s.mode} search needs room dimensions for its initial region")
    if cfg.multi is not None:
        if s.mode != "exhaustive":
            diags.append("de-emphasis localization uses exhaustive search only")
        if m.domain in ("volumetric", "weighted"):
            diags.append("de-emphasis is defined for time and frequency maps")
        if cfg.grid_update != "none":
            diags.append("de-emphasis manages its own loop; set grid_update to none")
    if cfg.grid_update != "none":
        if not g.kind.startswith("cartesian"):
            diags.append("grid updaters contract cartesian grids only")
        if s.mode != "exhaustive":
            diags.append("grid updaters pair with exhaustive search; refine/src update internally")
    return diags


def _room_volume(room, planar: bool) -> Volume:
    dims = np.asarray(room, dtype=float).reshape(-1)
    if planar:
        return Volume.from_bounds(np.zeros(3), [dims[0], dims[1], 0.0])
    return Volume.from_bounds(np.zeros(3), dims[:3])


def build_grid(spec: GridSpec, room=None):
    """Materialize a GridSpec (room required for position grids)."""
    if spec.kind == "cartesian2d":
        return cartesian_grid(room, spec.resolution, planar=True)
    if spec.kind == "cartesian3d":
        return cartesian_grid(room, spec.resolution)
    if spec.kind == "doa_azimuth":
        return doa_grid(spec.azimuth_res)
    if spec.kind == "doa_az_el":
        return doa_grid(spec.azimuth_res, spec.elevation_res)
    return partition_room(room, spec.counts or (2, 2, 2))


def _gcc_config(f: FeatureSpec, array: MicArray) -> GccConfig:
    band = f.band if f.band is not None else analysis_band(array)
    return GccConfig(beta=f.beta, gamma=f.gamma, band=band)


def _extract_features(frames, array: MicArray, cfg: PipelineConfig):
    """Returns (lag_vectors or None, spectral gccs or None) per the config."""
    need_lags = cfg.map.domain in ("time", "volumetric")
    if cfg.features.kind == "cc":
        return compute_cc_lag_vectors(frames, array), None
    gccs = compute_spectral_gccs(frames, array, _gcc_config(cfg.features, array))
    lags = {p: temporal_gcc(g) for p, g in gccs.items()} if need_lags else None
    return lags, gccs


def _build_map(cfg: PipelineConfig, grid, lags, gccs, array: MicArray):
    m = cfg.map
    if m.domain == "time":
        return srp_time_map(lags, grid, array)
    if m.domain == "frequency":
        return srp_freq_map(gccs, grid, array)
    if m.domain == "volumetric":
        return vsrp_map(lags, grid, array, pooling=m.pooling, guard=m.guard)
    tensor = pairwise_freq_scores(gccs, grid, array)
    return wsrp_map(tensor, m.wsrp)


def x_srp(frames: np.ndarray, array: MicArray, room=None, cfg: PipelineConfig | None = None) -> EstimateSet:
    """Run the configured pipeline on one (M, L) frame block.

    Returns the estimate set ordered by score. Iterative searchers
    (refine/src), the de-emphasis loop, and grid updaters all run
    within the generic loop's passes; a hard cap of max_loop_iters
    passes guarantees termination.
    """
    cfg = cfg or PipelineConfig()
    diags = validate_config(cfg, room)
    if diags:
        raise ConfigError("; ".join(diags))
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    lags, gccs = _extract_features(frames, array, cfg)
    planar = cfg.grid.kind == "cartesian2d"

    if cfg.multi is not None:
        grid = build_grid(cfg.grid, room)
        feats = lags if cfg.map.domain == "time" else gccs
        return localize_multi(feats, grid, array, cfg.multi, cfg.search)

    if cfg.search.mode in ("refine", "src"):
        region = _room_volume(room, planar)
        if cfg.map.domain == "time":
            scorer = make_time_scorer(lags, array)
        else:
            scorer = make_freq_scorer(gccs, array)
        runner = src_search if cfg.search.mode == "src" else refine_search
        res = runner(scorer, region, cfg.search)
        return EstimateSet(res.estimate[None, :], [res.score])

    estimates: list[tuple[np.ndarray, float]] = []
    grid = build_grid(cfg.grid, room)
    region = _room_volume(room, planar) if room is not None else None
    resolution = None
    if cfg.grid.kind.startswith("cartesian"):
        n_axes = 2 if planar else 3
        resolution = np.broadcast_to(
            np.asarray(cfg.grid.resolution, dtype=float), (n_axes,)
        ).astype(float)
    it = 0
    while grid is not None and it < cfg.max_loop_iters:
        srp = _build_map(cfg, grid, lags, gccs, array)
        res = argmax_search(srp)
        estimates.append((res.estimate, res.score))
        grid, region, resolution = _update_grid(
            cfg, res.estimate, region, resolution, planar
        )
        it += 1
    return EstimateSet.from_pairs(estimates)


def _update_grid(cfg: PipelineConfig, best, region, resolution, planar):
    """Next-pass grid under the configured updater (None ends the loop)."""
    if cfg.grid_update == "none":
        return None, region, resolution
    if cfg.grid_update == "contract":
        new_half = region.half_extents / 2.0
    else:  # subdivide: re-grid the best cell
        n = len(resolution)
        new_half = np.zeros(3)
        new_half[:n] = resolution
    target = Volume(best, new_half)
    # successive contractions intersect against the current region,
    # which started as the room box, so they can never escape it
    new_region = intersect_volumes(target, region)
    new_res = resolution / 2.0
    if new_region.edges.max() <= cfg.search.min_region_edge:
        return None, new_region, new_res
    grid = grid_in_volume(new_region, new_res, planar=planar)
    return grid, new_region, new_res


def config_to_dict(cfg: PipelineConfig) -> dict:
    """JSON-ready dict (inverse of config_from_dict)."""

    def wsrp(w: WsrpConfig | None):
        if w is None:
            return None
        return {
            "freq_combinator": w.freq_combinator,
            "pair_combinator": w.pair_combinator,
            "freq_weights": None if w.freq_weights is None else list(map(float, w.freq_weights)),
            "pair_weights": None
            if w.pair_weights is None
            else {f"{p.l}-{p.m}": float(v) for p, v in w.pair_weights.items()},
        }

    return {
        "grid": {
            "kind": cfg.grid.kind,
            "resolution": _tolist(cfg.grid.resolution),
            "azimuth_res": cfg.grid.azimuth_res,
            "elevation_res": cfg.grid.elevation_res,
            "counts": _tolist(cfg.grid.counts),
        },
        "features": {
            "kind": cfg.features.kind,
            "beta": cfg.features.beta,
            "gamma": cfg.features.gamma,
            "band": _tolist(cfg.features.band),
        },
        "map": {
            "domain": cfg.map.domain,
            "pooling": cfg.map.pooling,
            "guard": cfg.map.guard,
            "wsrp": wsrp(cfg.map.wsrp),
        },
        "search": asdict(cfg.search),
        "multi": None
        if cfg.multi is None
        else {
            "n_sources": cfg.multi.n_sources,
            "notch_sigma": cfg.multi.notch_sigma,
            "min_source_distance": cfg.multi.min_source_distance,
            "score_floor": cfg.multi.score_floor,
        },
        "grid_update": cfg.grid_update,
        "max_loop_iters": cfg.max_loop_iters,
    }


def _tolist(v):
    if v is None:
        return None
    if isinstance(v, (tuple, list, np.ndarray)):
        return [float(x) for x in v]
    return v


def _check_keys(d: dict, allowed, section: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


def _tuple_or_none(v, n=None):
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return float(v)
    t = tuple(float(x) for x in v)
    if n is not None and len(t) != n:
        raise ConfigError(f"expected {n} entries, got {len(t)}")
    return t


def _float_maybe_inf(v):
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"not a number: {v!r}")
    return float(v)


def config_from_dict(d: dict) -> PipelineConfig:
    """Parse a config dict, rejecting unknown keys fail-fast."""
    if not isinstance(d, dict):
        raise ConfigError("pipeline config must be a JSON object")
    _check_keys(
        d,
        ("grid", "features", "map", "search", "multi", "grid_update", "max_loop_iters"),
        "pipeline",
    )
    gd = d.get("grid", {}) or {}
    _check_keys(gd, ("kind", "resolution", "azimuth_res", "elevation_res", "counts"), "grid")
    grid = GridSpec(
        kind=gd.get("kind", "cartesian3d"),
        resolution=_tuple_or_none(gd.get("resolution", 0.1)),
        azimuth_res=gd.get("azimuth_res"),
        elevation_res=gd.get("elevation_res"),
        counts=None if gd.get("counts") is None else tuple(int(x) for x in gd["counts"]),
    )
    fd = d.get("features", {}) or {}
    _check_keys(fd, ("kind", "beta", "gamma", "band"), "features")
    features = FeatureSpec(
        kind=fd.get("kind", "gcc_phat"),
        beta=float(fd.get("beta", 1.0)),
        gamma=None if fd.get("gamma") is None else float(fd["gamma"]),
        band=_tuple_or_none(fd.get("band"), 2),
    )
    md = d.get("map", {}) or {}
    _check_keys(md, ("domain", "pooling", "guard", "wsrp"), "map")
    wd = md.get("wsrp")
    wsrp = None
    if wd is not None:
        _check_keys(
            wd, ("freq_combinator", "pair_combinator", "freq_weights", "pair_weights"), "wsrp"
        )
        pw = None
        if wd.get("pair_weights") is not None:
            pw = {}
            for key, val in wd["pair_weights"].items():
                try:
                    l, m = (int(x) for x in key.split("-"))
                except Exception as e:
                    raise ConfigError(f"bad pair key {key!r} (want 'l-m')") from e
                pw[MicPair(l, m)] = _float_maybe_inf(val)
        wsrp = WsrpConfig(
            freq_combinator=wd.get("freq_combinator", "sum"),
            pair_combinator=wd.get("pair_combinator", "sum"),
            freq_weights=None
            if wd.get("freq_weights") is None
            else np.asarray(wd["freq_weights"], dtype=float),
            pair_weights=pw,
        )
    mapspec = MapSpec(
        domain=md.get("domain", "frequency"),
        pooling=md.get("pooling", "sum"),
        guard=float(md.get("guard", 1.0)),
        wsrp=wsrp,
    )
    sd = d.get("search", {}) or {}
    _check_keys(
        sd,
        ("mode", "max_iters", "points_per_iter", "top_k", "min_region_edge", "seed"),
        "search",
    )
    search = SearchConfig(
        mode=sd.get("mode", "exhaustive"),
        max_iters=int(sd.get("max_iters", 10)),
        points_per_iter=int(sd.get("points_per_iter", 100)),
        top_k=int(sd.get("top_k", 10)),
        min_region_edge=float(sd.get("min_region_edge", 0.05)),
        seed=int(sd.get("seed", 0)),
    )
    mud = d.get("multi")
    multi = None
    if mud is not None:
        _check_keys(
            mud, ("n_sources", "notch_sigma", "min_source_distance", "score_floor"), "multi"
        )
        multi = MultiConfig(
            n_sources=None if mud.get("n_sources") is None else int(mud["n_sources"]),
            notch_sigma=None if mud.get("notch_sigma") is None else float(mud["notch_sigma"]),
            min_source_distance=float(mud.get("min_source_distance", 0.0)),
            score_floor=float(mud.get("score_floor", 0.4)),
        )
    return PipelineConfig(
        grid=grid,
        features=features,
        map=mapspec,
        search=search,
        multi=multi,
        grid_update=d.get("grid_update", "none"),
        max_loop_iters=int(d.get("max_loop_iters", 50)),
    )
