"""End-to-end acceptance checks, one test per criterion.

Each check records a ``PASS``/``FAIL`` line with the measured values; the lines
are printed in the terminal summary. Tolerances are the stated ones.
"""

import time

import numpy as np
import pytest

from ghostscatter.config import parse_config
from ghostscatter.correlation import AccumulatorMode, finalize_delta_g2, new_accumulator, update
from ghostscatter.experiment import _observe, run_experiment, sweep
from ghostscatter.grid import ComplexField, flip_array, make_grid, total_power
from ghostscatter.metrics import fidelity
from ghostscatter.optics import (apply_thin_lens, apply_transmission, fresnel_propagate,
                                 transfer_function_limit, uniform_mask)
from ghostscatter.scattering import ScatteringLayer, apply_layer, ballistic_fraction, gaussian_psf
from ghostscatter.source import SourceSpec, generate_frames

RESULTS: list[str] = []


def record(criterion: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  C{criterion}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, detail


def preset(name: str, extra: str = ""):
    return parse_config(f"[experiment]\npreset = {name}\n{extra}")


def timed_run(cfg):
    t0 = time.perf_counter()
    res = run_experiment(cfg, write=False)
    return res, time.perf_counter() - t0


def test_c01_thermal_point_correlation():
    res, dt = timed_run(preset("thermal-point"))
    g2 = res.manifest.summary["g2_peak"]
    ok = abs(g2 - 2.0) <= 0.05 and dt < 30 and res.manifest.seeds["frames"] == 100_000
    record(1, ok, f"g2(0,0) = {g2:.4f} (2.00 +- 0.05), {dt:.1f} s (< 30 s) at n=512, 1e5 frames")


def test_c02_psf_normalization():
    worst = 0.0
    for dx in (0.01e-3, 0.74e-3, 1.36e-3):
        for pitch in (5e-6, 10e-6, 20e-6):
            n = int(2 ** np.ceil(np.log2(10 * dx / pitch + 16)))
            g = make_grid(n, pitch)
            p = gaussian_psf(dx, g)
            worst = max(worst, abs(np.sum(np.abs(p) ** 2) * pitch - 1))
    record(2, worst <= 1e-12, f"max |sum |P|^2 pitch - 1| = {worst:.2e} (<= 1e-12)")


def test_c03_beer_lambert_anchor():
    a, b = ballistic_fraction(164.0, 0.04)
    ratio = abs(b / a) ** 2
    record(3, abs(ratio / 694 - 1) <= 0.03, f"|beta/alpha|^2 = {ratio:.1f} (694 +- 3%)")


def test_c04_speckle_matching():
    cfg = preset("paper-fig2-c", "frames = 32\n[grid]\nn = 2048\n[layers]\nL1 = 0 mm\n"
                                 "[object]\nkind = none\n")
    assert cfg.conditions.satisfied
    ir, it = _observe(cfg, np.arange(32))
    x = ir.grid.coordinates()
    sel = np.abs(x) <= 2e-3
    corr = [np.corrcoef(a[sel], flip_array(b, 1)[sel])[0, 1] for a, b in zip(ir.values, it.values)]
    worst = float(np.min(corr))
    record(4, worst >= 0.99,
           f"min per-frame correlation of I_r(x) and I_t(-x) over 32 frames = {worst:.4f} (>= 0.99)")


def test_c05_ghost_image_baseline():
    cfg = preset("no-scatter-doubleslit")
    res, dt = timed_run(cfg)
    fid = fidelity(res.images["bucket"], res.truth)
    ok = fid >= 0.9 and dt < 60 and cfg.frames == 15000 and cfg.grid.n == 1024
    record(5, ok, f"bucket fidelity = {fid:.4f} (>= 0.9), {dt:.1f} s (< 60 s)")


@pytest.fixture(scope="module")
def arrangements():
    out = {}
    for case in "abc":
        res, _ = timed_run(preset(f"paper-fig2-{case}"))
        m = res.manifest.metrics
        out[case] = {
            "camera": fidelity(res.images["anti-diagonal"], res.truth),
            "bucket": fidelity(res.images["bucket"], res.truth),
            "edge": m["anti-diagonal"]["edge_width"],
        }
    return out


def test_c06_arrangement_orderings(arrangements):
    f = {c: arrangements[c]["camera"] for c in "abc"}
    b = {c: arrangements[c]["bucket"] for c in "abc"}
    ok = f["a"] >= f["b"] and f["c"] >= f["b"] and b["a"] >= b["b"] >= b["c"]
    record("6a", ok, "camera fidelity a/b/c = {:.3f}/{:.3f}/{:.3f}, bucket a/b/c = "
           "{:.3f}/{:.3f}/{:.3f}".format(f["a"], f["b"], f["c"], b["a"], b["b"], b["c"]))


def test_c06_arrangement_resolution(arrangements):
    wa, wb = arrangements["a"]["edge"], arrangements["b"]["edge"]
    ok = wa is not None and wb is not None and abs(wb - wa) <= 0.1 * wa
    record("6b", ok, f"edge width b = {wb * 1e6:.1f} um vs a = {wa * 1e6:.1f} um (within 10%)")


def test_c07_thickness_trend():
    text = "[experiment]\npreset = paper-fig3-b\n"
    _, rows = sweep(text, "layers.L1", ["10 mm", "20 mm", "40 mm"], write=False)
    peaks = [r["g2_peak"] for r in rows]
    ok = all(r["status"] == "ok" for r in rows) and peaks[0] > peaks[1] > peaks[2] \
        and peaks[2] < 1.05
    record(7, ok, "g2 peak at L1 = 10/20/40 mm: {} (strictly decreasing, last < 1.05)".format(
        "/".join(f"{p:.4f}" for p in peaks)))


def test_c08_oracle_equivalence():
    cfg = preset("oracle-check")
    res, dt = timed_run(cfg)
    o = res.manifest.oracle["outer-product"]
    both = cfg.layer1.scatters and cfg.layer2.scatters
    ok = (o["status"] == "ok" and o["max_abs_residual"] <= 3 and dt < 120 and both
          and cfg.grid.n == 256 and cfg.frames == 10_000 and len(o["probes"]) == 20)
    record(8, ok, f"max |residual| / sigma = {o['max_abs_residual']:.2f} (<= 3) at 20 probes, "
           f"scale {o['scale']:.4g}, {dt:.1f} s (< 120 s)")


def test_c09_shard_invariance():
    cfg_text = "[experiment]\npreset = no-scatter-doubleslit\nframes = 2000\n"
    one = run_experiment(parse_config(cfg_text + "shards = 1\n"), write=False).maps
    eight = run_experiment(parse_config(cfg_text + "shards = 8\n"), write=False).maps
    a, b = one["bucket_delta_g2"], eight["bucket_delta_g2"]
    rel = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    record("9a", rel <= 1e-10, f"1 vs 8 shards: max relative difference {rel:.1e} (<= 1e-10)")


def test_c09_independent_arm_scaling():
    g = make_grid(256, 6.45e-6)
    src = SourceSpec(g, g.extent)
    rms = {}
    for n in (1_000, 10_000, 100_000):
        acc = new_accumulator(AccumulatorMode("anti-diagonal"), g, g)
        for s in range(0, n, 5000):
            idx = np.arange(s, min(n, s + 5000))
            ir = np.abs(generate_frames(src, 11, idx).amplitude) ** 2
            it = np.abs(generate_frames(src, 12, idx).amplitude) ** 2
            update(acc, ir, it)
        rms[n] = float(np.sqrt(np.mean(finalize_delta_g2(acc) ** 2)))
    # the product rms * sqrt(N) must stay constant within 20%
    c = {n: r * np.sqrt(n) for n, r in rms.items()}
    ref = c[1_000]
    ok = all(abs(v / ref - 1) <= 0.2 for v in c.values())
    record("9b", ok, "rms * sqrt(N) at N = 1e3/1e4/1e5: " + "/".join(f"{v:.4f}" for v in c.values())
           + " (constant within 20%)")


def test_c10_propagation():
    lam = 650e-9
    g = make_grid(2048, 5e-6)
    x = g.coordinates()
    w0 = 0.2e-3
    zr = np.pi * w0**2 / lam
    worst = 0.0
    for z in (0.5 * zr, zr, 2 * zr):
        out = fresnel_propagate(ComplexField(g, np.exp(-(x / w0) ** 2), lam), z)
        i = np.abs(out.amplitude) ** 2
        w = 2 * np.sqrt(np.sum(x**2 * i) / np.sum(i))
        worst = max(worst, abs(w / (w0 * np.sqrt(1 + (z / zr) ** 2)) - 1))

    # power through each lossless element: periodic free space, lens, clear screen
    rng = np.random.default_rng(0)
    f = ComplexField(g, rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n), lam)
    p0 = total_power(f)
    steps = [fresnel_propagate(f, 0.5 * transfer_function_limit(g, lam), pad=1),
             apply_thin_lens(f, 0.25),
             apply_transmission(f, uniform_mask(g)),
             apply_layer(f, ScatteringLayer.transparent())]
    err = max(abs(total_power(s) / p0 - 1) for s in steps)
    ok = worst <= 0.01 and err <= 1e-10
    record(10, ok, f"Gaussian width error {worst:.2e} (<= 1%), power change per element "
           f"{err:.1e} (<= 1e-10)")

