"""Run ensembles, finalize correlation maps, score them and write outputs.

Frames are dealt to shards by ``frame_index % shards``. Each shard owns one
accumulator per mode and walks its frames in increasing order; shards are
merged in index order with a fixed pairwise tree. Results therefore depend on
``(config, master_seed, shards)`` only, never on worker scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import shutil
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig, parse_config, override
from .correlation import (
    finalize_delta_g2,
    finalize_g2,
    merge_tree,
    new_accumulator,
    shard_standard_error,
    update,
)
from .detection import DetectorSpec, add_noise, bucket_value, camera_bin, measure_intensity, point_value
from .grid import GridSpec, IntensityFrame
from .metrics import (
    MetricReport,
    edge_width_fit,
    fidelity,
    region_masks,
    speckle_size,
    truth_edges,
    visibility,
    window_mean,
)
from .optics import FreeSpace, SamplingWarning, run_arm, transfer_function_limit
from .oracle import (
    CoherenceKernel,
    SceneSpec,
    fit_scale,
    predict_bucket_image,
    predict_ccd_image,
    predict_delta_g2,
)
from .source import derive_frame_seed, frame_rng, generate_frames

__all__ = [
    "RunManifest",
    "RunResult",
    "ENV_OUTPUT_DIR",
    "simulate",
    "run_experiment",
    "sweep",
    "magnified_truth",
    "probe_pairs",
    "map_digest",
    "derive_run_seed",
]

ENV_OUTPUT_DIR = "GHOSTSCATTER_OUTPUT_DIR"
DIGEST_RTOL = 1e-8
SPECKLE_FRAMES = 16


# ---------------------------------------------------------------- simulation


def _detector_grids(cfg: ExperimentConfig) -> tuple[GridSpec, GridSpec | None]:
    g = cfg.grid
    ref = IntensityFrame(g, np.zeros(g.shape))
    ref_grid = camera_bin(ref, cfg.reference_detector).grid
    td = cfg.test_detector
    test_grid = camera_bin(ref, td).grid if td.kind == "camera" else g
    return ref_grid, test_grid


def _observe(cfg: ExperimentConfig, idx: np.ndarray):
    """Reference frames and test intensities for the frames in ``idx``."""
    src = generate_frames(cfg.source, cfg.master_seed, idx)
    ir = measure_intensity(run_arm(src, cfg.reference_train))
    it = measure_intensity(run_arm(src, cfg.test_train))
    if cfg.noise.enabled:
        ir_v = np.empty_like(ir.values)
        it_v = np.empty_like(it.values)
        for k, i in enumerate(idx):
            rng = frame_rng(derive_frame_seed(cfg.master_seed, int(i)), stream=1)
            ir_v[k] = add_noise(IntensityFrame(ir.grid, ir.values[k]), cfg.noise, rng).values
            it_v[k] = add_noise(IntensityFrame(it.grid, it.values[k]), cfg.noise, rng).values
        ir, it = IntensityFrame(ir.grid, ir_v), IntensityFrame(it.grid, it_v)
    ir = camera_bin(ir, cfg.reference_detector)
    return ir, it


def _test_signal(cfg: ExperimentConfig, kind: str, it: IntensityFrame):
    td = cfg.test_detector
    if kind == "bucket":
        return bucket_value(it, DetectorSpec("bucket", extent=td.extent))
    if td.kind == "point":
        return point_value(it, td)
    return camera_bin(it, td)


def run_shard(cfg: ExperimentConfig, shard: int) -> list:
    """Accumulators (one per mode) over the frames owned by ``shard``."""
    ref_grid, test_grid = _detector_grids(cfg)
    accs = [new_accumulator(m, ref_grid, test_grid) for m in cfg.modes]
    idx = np.arange(shard, cfg.frames, cfg.shards)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        for start in range(0, idx.size, cfg.batch):
            chunk = idx[start:start + cfg.batch]
            ir, it = _observe(cfg, chunk)
            for acc in accs:
                update(acc, ir, _test_signal(cfg, acc.mode.kind, it))
    return accs


def simulate(cfg: ExperimentConfig, workers: int | None = None) -> list[list]:
    """Per-shard accumulators, ``result[shard][mode]``."""
    workers = cfg.workers if workers is None else workers
    shards = range(cfg.shards)
    if workers > 1 and cfg.shards > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.shards)) as pool:
            return list(pool.map(run_shard, [cfg] * cfg.shards, shards))
    return [run_shard(cfg, s) for s in shards]


def _sampling_diagnostics(cfg: ExperimentConfig) -> list[dict]:
    """Structured record of propagation steps beyond the transfer-function limit."""
    limit = transfer_function_limit(cfg.grid, cfg.wavelength)
    out = []
    for arm, train in (("reference", cfg.reference_train), ("test", cfg.test_train)):
        for i, e in enumerate(train.elements):
            if isinstance(e, FreeSpace) and e.z > limit:
                out.append({"kind": "sampling", "arm": arm, "element": i, "z_m": e.z,
                            "limit_m": limit, "method": "impulse-response"})
    return out


# ---------------------------------------------------------------- analysis


def magnified_truth(cfg: ExperimentConfig, grid: GridSpec) -> np.ndarray | None:
    """``|t(m x)|^2`` sampled on a detector grid (``None`` without an object)."""
    if cfg.object is None:
        return None
    m = cfg.geometry.magnification
    t2 = cfg.object.intensity
    x = cfg.grid.coordinates()
    u = m * grid.coordinates()
    if grid.dim == 1:
        return np.interp(u, x, t2, left=0.0, right=0.0)
    from scipy.ndimage import map_coordinates

    pos = u / cfg.grid.pitch + cfg.grid.n // 2
    yy, xx = np.meshgrid(pos, pos, indexing="ij")
    return map_coordinates(t2, [yy, xx], order=1, cval=0.0)


def probe_pairs(grid: GridSpec, count: int, span: float, max_offset: int = 6,
                seed: int = 0) -> np.ndarray:
    """Deterministic ``(i_r, i_t)`` index pairs near the anti-diagonal.

    ``i_r`` is drawn within ``span`` meters of the centre and ``i_t`` lies
    within ``max_offset`` samples of the mirror index of ``i_r``.
    """
    rng = np.random.default_rng(seed)
    c = grid.n // 2
    h = max(1, int(span / grid.pitch))
    pairs = set()
    out = []
    while len(out) < count:
        i = int(rng.integers(c - h, c + h))
        j = (2 * c - i) + int(rng.integers(-max_offset, max_offset + 1))
        if 0 <= j < grid.n and (i, j) not in pairs:
            pairs.add((i, j))
            out.append((i, j))
    return np.array(out)


def _scene(cfg: ExperimentConfig, ref_grid: GridSpec, test_grid: GridSpec) -> SceneSpec | None:
    if cfg.object is None or cfg.grid.dim != 1:
        return None
    return SceneSpec(cfg.object, cfg.layer1, cfg.layer2, cfg.geometry.magnification,
                     ref_grid, test_grid, CoherenceKernel.from_source(cfg.source, cfg.geometry.f1))


def _central_half(frame: IntensityFrame) -> tuple[np.ndarray, GridSpec]:
    g = frame.grid
    if g.n < 32:
        return np.asarray(frame.values), g
    q = g.n // 4
    sl = (slice(q, g.n - q),) * g.dim
    v = np.asarray(frame.values)[(Ellipsis,) + sl]
    return v, GridSpec(g.n - 2 * q, g.pitch, g.dim)


def _g2_peak(kind: str, g2, grid: GridSpec, cfg: ExperimentConfig, test_point: float):
    if grid.dim != 1 or kind == "outer-product":
        return None
    if kind == "fixed-test-point":
        return float(np.ma.asarray(g2)[grid.index_of(-test_point)])
    return window_mean(g2, grid, cfg.g2_window / 2)


def _image_metrics(img, truth, grid: GridSpec, edge_win: float) -> MetricReport:
    rep = MetricReport()
    if truth is None or np.ptp(truth) == 0:
        rep.notes.append("no object structure: image metrics skipped")
        return rep
    rep.fidelity = fidelity(img, truth)
    fg, bg = region_masks(truth)
    if fg.any() and bg.any():
        try:
            rep.visibility = visibility(img, fg, bg)
        except ValueError as exc:
            rep.notes.append(f"visibility: {exc}")
    if grid.dim == 1:
        try:
            rep.edge_width = edge_width_fit(img, truth_edges(truth, grid), grid, edge_win)
        except (ValueError, RuntimeError) as exc:
            rep.notes.append(f"edge width: {exc}")
    return rep


# ---------------------------------------------------------------- outputs


def map_digest(a, rtol: float = DIGEST_RTOL) -> str:
    """SHA-256 of a map quantized to ``rtol`` of its magnitude.

    The quantum is tied to the power of two at or above the largest entry, so
    maps that agree to well within ``rtol`` share a digest while a rescaled map
    does not.
    """
    v = np.ma.filled(np.ma.asarray(a, dtype=float), 0.0)
    peak = np.max(np.abs(v)) if v.size else 0.0
    scale = 2.0 ** np.ceil(np.log2(peak)) if peak > 0 else 0.0
    q = np.zeros(v.shape, dtype=np.int64) if scale == 0 else np.rint(v / (scale * rtol)).astype(np.int64)
    h = hashlib.sha256()
    h.update(str(v.shape).encode())
    h.update(q.tobytes())
    return h.hexdigest()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_profile(path: Path, grid: GridSpec, values) -> None:
    v = np.ma.asarray(values, dtype=float)
    mask = np.ma.getmaskarray(v)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_m", "value", "valid"])
        for x, val, bad in zip(grid.coordinates(), np.ma.filled(v, 0.0), mask):
            w.writerow([repr(float(x)), repr(float(val)), 0 if bad else 1])


def _write_image(path: Path, values) -> dict:
    from PIL import Image

    v = np.ma.filled(np.ma.asarray(values, dtype=float), np.nan)
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    span = hi - lo if hi > lo else 1.0
    q = np.nan_to_num((v - lo) / span * 65535, nan=0.0)
    Image.fromarray(np.rint(q).astype(np.uint16)).save(path)
    return {"min": lo, "max": hi}


# ---------------------------------------------------------------- manifest


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit a run."""

    config: str
    preset: str | None
    versions: dict
    seeds: dict
    outputs: dict = field(default_factory=dict)
    map_digests: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def as_dict(self, include_timings: bool = True) -> dict:
        d = {k: getattr(self, k) for k in ("config", "preset", "versions", "seeds", "outputs",
                                              "map_digests", "metrics", "summary", "oracle",
                                              "conditions", "diagnostics")}
        if include_timings:
            d["timings"] = self.timings
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), indent=2, sort_keys=True)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


@dataclass
class RunResult:
    """In-memory results of a run next to its manifest."""

    manifest: RunManifest
    maps: dict
    images: dict
    truth: np.ndarray | None
    shards: list
    ref_grid: GridSpec
    out_dir: Path | None = None


def _versions() -> dict:
    import scipy

    return {"ghostscatter": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": kernels.BACKEND}


def _output_dir(cfg: ExperimentConfig, out: str | Path | None) -> Path:
    if out is not None:
        return Path(out)
    if cfg.outputs:
        return Path(cfg.outputs)
    base = Path(os.environ.get(ENV_OUTPUT_DIR, "ghostscatter-runs"))
    return base / f"{cfg.preset or 'run'}-seed{cfg.master_seed}"


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   write: bool = True, workers: int | None = None) -> RunResult:
    """Simulate, finalize, score and (optionally) write one experiment.

    Outputs are staged in a temporary directory and moved into ``out_dir``
    only when everything succeeded; a failed run leaves nothing behind.
    """
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        shard_accs = simulate(cfg, workers)
    t_sim = time.perf_counter()

    ref_grid, test_grid = _detector_grids(cfg)
    truth = magnified_truth(cfg, ref_grid)
    manifest = RunManifest(
        config=cfg.echo(), preset=cfg.preset, versions=_versions(),
        seeds={"master_seed": cfg.master_seed, "frames": cfg.frames, "shards": cfg.shards,
               "frame_seeding": "philox(key=master_seed, counter=[0, 0, frame, stream])"},
        conditions=cfg.conditions.as_dict(),
        diagnostics=_sampling_diagnostics(cfg) + [{"kind": "config", "message": w}
                                                  for w in cfg.warnings])

    # speckle size from the first frames' reference patterns, central half only:
    # far off-axis samples lose propagation bandwidth and show coarser speckle
    speckle = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SamplingWarning)
            ir, _ = _observe(cfg, np.arange(min(SPECKLE_FRAMES, cfg.frames)))
        speckle = speckle_size(*_central_half(ir))
    except ValueError as exc:
        manifest.diagnostics.append({"kind": "speckle", "message": str(exc)})
    edge_win = cfg.edge_window or (1.5 * speckle if speckle else 8 * ref_grid.pitch)

    maps, images = {}, {}
    summary = {"g2_peak": None, "visibility": None, "fidelity": None, "speckle_fwhm_m": speckle}
    scene = _scene(cfg, ref_grid, test_grid) if cfg.oracle else None
    for k, mode in enumerate(cfg.modes):
        kind = mode.kind
        accs = [s[k] for s in shard_accs]
        acc = merge_tree(accs)
        dg = finalize_delta_g2(acc)
        g2 = finalize_g2(acc)
        maps[f"{kind}_delta_g2"] = dg
        maps[f"{kind}_g2"] = g2
        rep = MetricReport(speckle_fwhm=speckle)
        if kind in ("bucket", "anti-diagonal"):
            images[kind] = dg
            rep = _image_metrics(dg, truth, ref_grid, edge_win)
            rep.speckle_fwhm = speckle
        peak = _g2_peak(kind, g2, ref_grid, cfg, mode.test_point)
        entry = rep.as_dict()
        entry["g2_peak"] = peak
        manifest.metrics[str(mode)] = entry
        if scene is not None:
            manifest.oracle[str(mode)] = _oracle_entry(cfg, scene, kind, mode, dg, accs, ref_grid,
                                                       maps)
    _fill_summary(summary, manifest.metrics, cfg)
    manifest.summary = summary
    t_fin = time.perf_counter()

    manifest.timings = {"simulate_s": t_sim - t0, "analyse_s": t_fin - t_sim,
                        "total_s": time.perf_counter() - t0}
    out = _write_outputs(cfg, manifest, maps, truth, ref_grid, out_dir) if write else None
    return RunResult(manifest, maps, images, truth, shard_accs, ref_grid, out)


def _fill_summary(summary: dict, metrics: dict, cfg: ExperimentConfig):
    kinds = {m.kind: str(m) for m in cfg.modes}
    for pref in ("anti-diagonal", "fixed-test-point", "bucket"):
        if pref in kinds and metrics[kinds[pref]].get("g2_peak") is not None:
            summary["g2_peak"] = metrics[kinds[pref]]["g2_peak"]
            break
    for pref in ("anti-diagonal", "bucket"):
        if pref in kinds:
            summary["visibility"] = metrics[kinds[pref]]["visibility"]
            summary["fidelity"] = metrics[kinds[pref]]["fidelity"]
            summary["edge_width_m"] = metrics[kinds[pref]]["edge_width"]
            break


def _oracle_entry(cfg, scene, kind, mode, dg, accs, ref_grid, maps) -> dict:
    x = ref_grid.coordinates()
    try:
        if kind == "outer-product":
            if len(accs) < 2:
                return {"status": "skipped", "reason": "probe comparison needs >= 2 shards"}
            se = shard_standard_error(accs)
            span = 0.25 * ref_grid.extent / 2
            pairs = probe_pairs(ref_grid, cfg.probes, span)
            pred = predict_delta_g2(scene, x[pairs[:, 0]], x[pairs[:, 1]])
            meas = dg[pairs[:, 0], pairs[:, 1]]
            sig = se[pairs[:, 0], pairs[:, 1]]
            scale, resid = fit_scale(meas, pred, sig)
            return {"status": "ok", "scale": scale, "probes": pairs.tolist(),
                    "normalized_residuals": resid.tolist(),
                    "max_abs_residual": float(np.max(np.abs(resid)))}
        if kind == "anti-diagonal":
            pred = predict_delta_g2(scene, x, -x)
            approx = predict_ccd_image(scene, x)
            maps["anti-diagonal_prediction"] = pred
            maps["anti-diagonal_ccd_prediction"] = approx
        elif kind == "bucket":
            pred = predict_bucket_image(scene, x)
            maps["bucket_prediction"] = pred
        else:
            pred = predict_delta_g2(scene, x, np.full_like(x, mode.test_point))
            maps[f"{kind}_prediction"] = pred
        scale, _ = fit_scale(dg, pred)
        return {"status": "ok", "scale": scale, "fidelity": fidelity(dg, pred)}
    except (ValueError, MemoryError) as exc:
        return {"status": "failed", "reason": str(exc)}


def _write_outputs(cfg, manifest, maps, truth, grid, out_dir) -> Path:
    final = _output_dir(cfg, out_dir)
    final.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=final.parent))
    try:
        files = {}
        if truth is not None:
            maps = {"truth": truth, **maps}
        for name, arr in maps.items():
            arr = np.ma.asarray(arr)
            manifest.map_digests[name] = map_digest(arr)
            if arr.ndim == 1:
                fn = f"{name}.csv"
                _write_profile(stage / fn, grid, arr)
                files[name] = {"path": fn}
            else:
                fn = f"{name}.png"
                rng = _write_image(stage / fn, arr)
                files[name] = {"path": fn, "scale": rng}
        for name, info in files.items():
            info["sha256"] = _sha256(stage / info["path"])
        manifest.outputs = files
        (stage / "manifest.json").write_text(manifest.to_json())
        final.mkdir(parents=True, exist_ok=True)
        for fn in [info["path"] for info in files.values()] + ["manifest.json"]:
            os.replace(stage / fn, final / fn)
        return final
    finally:
        shutil.rmtree(stage, ignore_errors=True)


# ---------------------------------------------------------------- sweeps


def derive_run_seed(master: int, index: int) -> int:
    """Seed of the ``index``-th run of a sweep (64-bit, independent streams)."""
    ss = np.random.SeedSequence([int(master) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def sweep(text: str, param: str, values, out_dir: str | Path | None = None,
          write: bool = True, overrides: dict | None = None) -> tuple[list, list]:
    """One run per value of ``param`` (``section.key``) with derived seeds.

    Returns the list of run results (``None`` for failed runs) and the summary
    rows ``(value, g2_peak, visibility, fidelity, status)``. Failures are
    recorded and the sweep continues.
    """
    if "." not in param:
        raise ValueError("parameter must be written as section.key")
    section, key = param.split(".", 1)
    base = text
    for (sec, k), v in (overrides or {}).items():
        base = override(base, sec, k, v)
    master = parse_config(base).master_seed if values else 0
    results, rows = [], []
    root = Path(out_dir) if out_dir is not None else None
    for i, v in enumerate(values):
        run_text = override(override(base, section, key, v), "experiment", "seed",
                            derive_run_seed(master, i))
        try:
            cfg = parse_config(run_text)
            sub = None if root is None else root / f"{key}={v}"
            res = run_experiment(cfg, sub, write=write)
            s = res.manifest.summary
            rows.append({"value": v, "g2_peak": s.get("g2_peak"), "visibility": s.get("visibility"),
                         "fidelity": s.get("fidelity"), "status": "ok"})
            results.append(res)
        except Exception as exc:  # continue with the remaining values
            rows.append({"value": v, "g2_peak": None, "visibility": None, "fidelity": None,
                         "status": f"failed: {exc}"})
            results.append(None)
    if write and root is not None:
        root.mkdir(parents=True, exist_ok=True)
        with open(root / "summary.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["value", "g2_peak", "visibility", "fidelity", "status"])
            w.writeheader()
            w.writerows(rows)
    return results, rows
