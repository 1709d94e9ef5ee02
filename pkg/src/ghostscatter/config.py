"""Experiment configuration: sectioned key-value text with unit suffixes.

Lengths accept ``m``, ``cm``, ``mm``, ``um`` (or ``µm``) and ``nm`` suffixes;
bare numbers are millimeters. Scattering coefficients accept ``/m``, ``/cm``
and ``/mm`` (bare numbers are per centimeter). A ``preset`` key in
``[experiment]`` loads an embedded preset first; every other key in the text
overrides it.

Sections and keys
-----------------
``[experiment]``
    preset, frames, seed, shards, workers, batch, mode (comma list),
    test_point, g2_window, edge_window, output, oracle, probes
``[grid]``
    n, pitch, dim, pad
``[source]``
    wavelength, aperture or speckle_size, mean_intensity, statistics
``[geometry]``
    variant, f, f1, f2, object_distance, image_distance, z, z3
    (``z`` and ``z3`` may be ``auto``: solved from the matching and imaging
    conditions)
``[layers]``
    L1, L2, dx1, dx2 (a length or ``model``), mu_s, split
``[medium]``
    particle_diameter, concentration, refractive_index, exponents
    (a_x ... e_x, a_beta ... e_beta), k_beta, broadening_reference,
    broadening_at_reference
``[object]``
    kind (none, uniform, single-slit, double-slit, ring, image), width,
    separation, diameter, stroke, center, path
``[detectors]``
    reference, reference_pixel, test, test_pixel, test_extent, test_x,
    noise, noise_sigma, photons_per_unit
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .correlation import AccumulatorMode
from .detection import DetectorSpec, NoiseSpec
from .grid import GridSpec
from .optics import (
    ConditionReport,
    DetectorPlane,
    FreeSpace,
    Mask,
    ObjectMask,
    OpticalTrain,
    Scatter,
    ThinLens,
    check_imaging_conditions,
    double_slit,
    mask_from_image,
    ring,
    single_slit,
    uniform_mask,
)
from .scattering import MediumParams, ScatteringLayer, broadening_model, layer_from_medium
from .source import SourceSpec, aperture_for_speckle_size

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Geometry",
    "parse_config",
    "load_config",
    "preset_names",
    "preset_text",
    "override",
]


class ConfigError(ValueError):
    """Invalid configuration, with the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


SCHEMA: dict[str, set[str]] = {
    "experiment": {"preset", "frames", "seed", "shards", "workers", "batch", "mode",
                   "test_point", "g2_window", "edge_window", "output", "oracle", "probes",
                   "description"},
    "grid": {"n", "pitch", "dim", "pad"},
    "source": {"wavelength", "aperture", "speckle_size", "mean_intensity", "statistics"},
    "geometry": {"variant", "f", "f1", "f2", "object_distance", "image_distance", "z", "z3"},
    "layers": {"l1", "l2", "dx1", "dx2", "mu_s", "split"},
    "medium": {"particle_diameter", "concentration", "refractive_index", "k_beta",
               "broadening_reference", "broadening_at_reference",
               "a_x", "b_x", "c_x", "d_x", "e_x",
               "a_beta", "b_beta", "c_beta", "d_beta", "e_beta"},
    "object": {"kind", "width", "separation", "diameter", "stroke", "center", "path"},
    "detectors": {"reference", "reference_pixel", "test", "test_pixel", "test_extent",
                  "test_x", "noise", "noise_sigma", "photons_per_unit"},
}
REQUIRED = ("experiment", "grid", "source", "geometry")

_LENGTH_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}
_INV_UNITS = {"/m": 1.0, "/cm": 1e2, "/mm": 1e3}
_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"


# ---------------------------------------------------------------- presets


def preset_names() -> list[str]:
    root = resources.files("ghostscatter") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    res = resources.files("ghostscatter") / "presets" / f"{name}.ini"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text()


# ---------------------------------------------------------------- parsing


class _Source:
    """Merged key/value store remembering the line each value came from."""

    def __init__(self):
        self.values: dict[str, dict[str, str]] = {}
        self.lines: dict[tuple[str, str], int | None] = {}
        self.section_lines: dict[str, int | None] = {}

    def feed(self, text: str, anchored: bool, origin: str):
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       strict=True)
        try:
            cp.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}".replace("\n", " "), getattr(exc, "lineno", None))
        where = _line_index(text) if anchored else {}
        for sec in cp.sections():
            s = sec.strip().lower()
            line = where.get((s, None))
            if s not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]", line)
            self.values.setdefault(s, {})
            self.section_lines.setdefault(s, line)
            for key, val in cp.items(sec):
                k = key.strip().lower()
                kline = where.get((s, k))
                if k not in SCHEMA[s]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]", kline)
                self.values[s][k] = val.strip()
                self.lines[(s, k)] = kline

    def get(self, sec: str, key: str, default=None):
        return self.values.get(sec, {}).get(key, default)

    def has(self, sec: str, key: str) -> bool:
        return key in self.values.get(sec, {})

    def line(self, sec: str, key: str | None = None):
        if key is None:
            return self.section_lines.get(sec)
        return self.lines.get((sec, key))


def _line_index(text: str) -> dict:
    out = {}
    sec = None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip().lower()
            out.setdefault((sec, None), no)
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m and sec is not None:
            out[(sec, m.group(1).strip().lower())] = no
    return out


class _Reader:
    def __init__(self, src: _Source):
        self.src = src

    def _err(self, sec, key, msg):
        return ConfigError(f"[{sec}] {key}: {msg}", self.src.line(sec, key))

    def raw(self, sec, key, default=None, required=False):
        v = self.src.get(sec, key)
        if v is None or v == "":
            if required:
                raise ConfigError(f"missing key {key!r} in [{sec}]", self.src.line(sec))
            return default
        return v

    def length(self, sec, key, default=None, required=False):
        v = self.raw(sec, key, None, required)
        if v is None:
            return default
        m = re.fullmatch(_NUM + r"\s*([a-zA-Zµμ]*)", v)
        if not m:
            raise self._err(sec, key, f"cannot read length {v!r}")
        unit = m.group(2) or "mm"
        if unit not in _LENGTH_UNITS:
            raise self._err(sec, key, f"unknown length unit {unit!r}")
        return float(m.group(1)) * _LENGTH_UNITS[unit]

    def inverse_length(self, sec, key, default=None):
        v = self.raw(sec, key)
        if v is None:
            return default
        m = re.fullmatch(_NUM + r"\s*(/\s*[a-z]+)?", v)
        if not m:
            raise self._err(sec, key, f"cannot read coefficient {v!r}")
        unit = (m.group(2) or "/cm").replace(" ", "")
        if unit not in _INV_UNITS:
            raise self._err(sec, key, f"unknown unit {unit!r}")
        return float(m.group(1)) * _INV_UNITS[unit]

    def number(self, sec, key, default=None, kind=float, required=False):
        v = self.raw(sec, key, None, required)
        if v is None:
            return default
        try:
            x = kind(v) if kind is float else int(v.replace("_", ""))
        except ValueError:
            raise self._err(sec, key, f"expected a number, got {v!r}") from None
        return x

    def boolean(self, sec, key, default=False):
        v = self.raw(sec, key)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise self._err(sec, key, f"expected a boolean, got {v!r}")

    def choice(self, sec, key, options, default):
        v = self.raw(sec, key, default).lower()
        if v not in options:
            raise self._err(sec, key, f"must be one of {', '.join(options)}")
        return v

    def length_or_word(self, sec, key, words, default=None):
        v = self.raw(sec, key)
        if v is None:
            return default
        if v.lower() in words:
            return v.lower()
        return self.length(sec, key)

    def check(self, cond, sec, key, msg):
        if not cond:
            raise self._err(sec, key, msg)


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class Geometry:
    """Distances of both arms in meters.

    ``object_distance`` is ``z1 + L1`` (illumination lens to object) and
    ``image_distance`` is ``z2 + L2`` (object to imaging lens).
    """

    f: float
    f1: float
    f2: float
    z: float
    z3: float
    object_distance: float
    image_distance: float
    variant: str = "consistent"

    @property
    def magnification(self) -> float:
        return self.f1 / self.f

    def conditions(self, L1: float, L2: float) -> ConditionReport:
        return check_imaging_conditions(self.z, self.object_distance - L1,
                                        self.image_distance - L2, self.z3, self.f, self.f1,
                                        self.f2, L1, L2)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see module docstring for the text schema)."""

    source: SourceSpec
    reference_train: OpticalTrain
    test_train: OpticalTrain
    detectors: tuple
    modes: tuple
    frames: int
    master_seed: int
    shards: int
    outputs: str | None
    preset: str | None
    geometry: Geometry
    layer1: ScatteringLayer
    layer2: ScatteringLayer
    object: ObjectMask | None
    conditions: ConditionReport
    warnings: tuple = ()
    workers: int = 1
    batch: int = 128
    g2_window: float = 0.5e-3
    edge_window: float | None = None
    oracle: bool = True
    probes: int = 20
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    settings: dict = field(default_factory=dict, compare=False)

    @property
    def mode(self) -> AccumulatorMode:
        return self.modes[0]

    @property
    def grid(self) -> GridSpec:
        return self.source.grid

    @property
    def wavelength(self) -> float:
        return self.source.wavelength

    @property
    def reference_detector(self) -> DetectorSpec:
        return self.detectors[0]

    @property
    def test_detector(self) -> DetectorSpec:
        return self.detectors[1]

    def echo(self) -> str:
        """Canonical text form of the merged settings."""
        cp = configparser.ConfigParser(interpolation=None)
        for sec in sorted(self.settings):
            cp[sec] = dict(sorted(self.settings[sec].items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _medium(r: _Reader, wavelength: float) -> MediumParams:
    kw = {}
    for k in ("a_x", "b_x", "c_x", "d_x", "e_x", "a_beta", "b_beta", "c_beta", "d_beta",
              "e_beta", "k_beta"):
        v = r.number("medium", k)
        if v is not None:
            kw[k] = v
    D = r.length("medium", "particle_diameter", 3.26e-6)
    w = r.number("medium", "concentration", 0.0)
    nref = r.number("medium", "refractive_index", 1.0)
    mu_s = r.inverse_length("layers", "mu_s", 164.0)
    L_ref = r.length("medium", "broadening_reference", 40e-3)
    dx_ref = r.length("medium", "broadening_at_reference", 1.36e-3)
    r.check(L_ref > 0 and dx_ref > 0, "medium", "broadening_reference",
            "reference thickness and width must be positive")
    p = MediumParams(particle_diameter=D, concentration=w, refractive_index=nref,
                     wavelength=wavelength, mu_s=mu_s, **kw)
    # choose k_x so the power law passes through the reference point
    _, unit = broadening_model(replace(p, k_x=1.0), L_ref)
    r.check(unit > 0 and math.isfinite(unit), "medium", "broadening_reference",
            "power law is degenerate at the reference point")
    return replace(p, k_x=dx_ref / unit)


def _layer(r: _Reader, which: int, medium: MediumParams, split: str) -> ScatteringLayer:
    L = r.length("layers", f"l{which}", 0.0)
    r.check(L >= 0, "layers", f"l{which}", "thickness must be non-negative")
    label = f"layer{which}"
    if L == 0:
        return ScatteringLayer.transparent(label)
    dx = r.length_or_word("layers", f"dx{which}", ("model",), "model")
    if dx == "model":
        layer = layer_from_medium(medium, L, label, split)
    else:
        r.check(dx > 0, "layers", f"dx{which}", "broadening width must be positive")
        fixed = replace(medium, k_x=dx, a_x=0, b_x=0, c_x=0, d_x=0, e_x=0)
        layer = layer_from_medium(fixed, L, label, split)
    return layer


def _object(r: _Reader, grid: GridSpec, base: Path | None) -> ObjectMask | None:
    kind = r.choice("object", "kind",
                    ("none", "uniform", "single-slit", "double-slit", "ring", "image"), "none")
    try:
        if kind == "none":
            return None
        if kind == "uniform":
            return uniform_mask(grid)
        if kind == "single-slit":
            return single_slit(grid, r.length("object", "width", required=True),
                               r.length("object", "center", 0.0))
        if kind == "double-slit":
            return double_slit(grid, r.length("object", "width", required=True),
                               r.length("object", "separation", required=True))
        if kind == "ring":
            return ring(grid, r.length("object", "diameter", required=True),
                        r.length("object", "stroke", required=True))
        path = Path(r.raw("object", "path", required=True))
        if base is not None and not path.is_absolute():
            path = base / path
        return mask_from_image(grid, path)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[object]: {exc}", r.src.line("object", "kind")) from None


def _modes(r: _Reader) -> tuple:
    text = r.raw("experiment", "mode", "anti-diagonal")
    tp = r.length("experiment", "test_point", 0.0)
    out = []
    for item in (s.strip().lower() for s in text.split(",")):
        if not item:
            continue
        try:
            out.append(AccumulatorMode(item, tp if item == "fixed-test-point" else 0.0))
        except ValueError as exc:
            raise ConfigError(f"[experiment] mode: {exc}", r.src.line("experiment", "mode"))
    if not out:
        raise ConfigError("[experiment] mode: empty mode list", r.src.line("experiment", "mode"))
    if len(set(m.kind for m in out)) != len(out):
        raise ConfigError("[experiment] mode: repeated mode", r.src.line("experiment", "mode"))
    return tuple(out)


def _build(src: _Source, preset: str | None, base: Path | None) -> ExperimentConfig:
    for sec in REQUIRED:
        if sec not in src.values:
            raise ConfigError(f"missing section [{sec}]")
    r = _Reader(src)
    warn: list[str] = []

    frames = r.number("experiment", "frames", 15000, int)
    r.check(frames >= 2, "experiment", "frames", "need at least 2 frames")
    seed = r.number("experiment", "seed", 1, int)
    r.check(0 <= seed < 2**64, "experiment", "seed", "seed must be a 64-bit unsigned integer")
    shards = r.number("experiment", "shards", 1, int)
    r.check(shards >= 1, "experiment", "shards", "need at least one shard")
    workers = r.number("experiment", "workers", 1, int)
    r.check(workers >= 1, "experiment", "workers", "need at least one worker")
    batch = r.number("experiment", "batch", 128, int)
    r.check(batch >= 1, "experiment", "batch", "batch must be positive")
    g2_window = r.length("experiment", "g2_window", 0.5e-3)
    r.check(g2_window > 0, "experiment", "g2_window", "window must be positive")
    ew = r.length_or_word("experiment", "edge_window", ("auto",), "auto")
    edge_window = None if ew == "auto" else ew
    probes = r.number("experiment", "probes", 20, int)
    r.check(probes >= 1, "experiment", "probes", "need at least one probe")
    modes = _modes(r)

    try:
        grid = GridSpec(r.number("grid", "n", required=True, kind=int),
                        r.length("grid", "pitch", required=True),
                        r.number("grid", "dim", 1, int))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}", src.line("grid")) from None
    pad = r.number("grid", "pad", 2, int)
    r.check(pad >= 1, "grid", "pad", "pad factor must be >= 1")

    lam = r.length("source", "wavelength", 650e-9)
    r.check(lam > 0, "source", "wavelength", "wavelength must be positive")

    # geometry
    variant = r.choice("geometry", "variant", ("consistent", "literal"), "consistent")
    f = r.length("geometry", "f", required=True)
    f1 = r.length("geometry", "f1", required=True)
    f2 = r.length("geometry", "f2", required=True)
    d1 = r.length("geometry", "object_distance", required=True)
    d2 = r.length("geometry", "image_distance", required=True)
    for k, v in (("f", f), ("f1", f1), ("f2", f2), ("object_distance", d1),
                 ("image_distance", d2)):
        r.check(v > 0, "geometry", k, "must be positive")
    z3 = r.length_or_word("geometry", "z3", ("auto",), "auto")
    if z3 == "auto":
        r.check(d2 > f2, "geometry", "image_distance", "must exceed f2 to form a real image")
        z3 = 1 / (1 / f2 - 1 / d2)
    z = r.length_or_word("geometry", "z", ("auto",), "auto")
    if z == "auto":
        z = f * (1 - f * (1 - d1 / f1) / f1)
        r.check(z > 0, "geometry", "z", "matching condition gives a non-positive distance")
    r.check(z3 > 0, "geometry", "z3", "must be positive")
    r.check(z > 0, "geometry", "z", "must be positive")
    geom = Geometry(f, f1, f2, z, z3, d1, d2, variant)

    # source aperture from an explicit width or a speckle-size target
    if r.raw("source", "aperture") is not None:
        aperture = r.length("source", "aperture")
        if r.raw("source", "speckle_size") is not None:
            raise ConfigError("[source]: give aperture or speckle_size, not both",
                              src.line("source", "speckle_size"))
    else:
        target = r.length("source", "speckle_size", 40.6e-6)
        r.check(target > 0, "source", "speckle_size", "must be positive")
        aperture = aperture_for_speckle_size(target, lam, f)
    try:
        source = SourceSpec(grid, aperture, r.number("source", "mean_intensity", 1.0),
                            r.choice("source", "statistics", ("circular-gaussian", "phase-only"),
                                     "circular-gaussian"), lam)
    except ValueError as exc:
        raise ConfigError(f"[source]: {exc}", src.line("source")) from None

    # layers
    split = r.choice("layers", "split", ("beer-lambert", "model"), "beer-lambert")
    medium = _medium(r, lam)
    try:
        layer1 = _layer(r, 1, medium, split)
        layer2 = _layer(r, 2, medium, split)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[layers]: {exc}", src.line("layers")) from None
    L1, L2 = layer1.thickness, layer2.thickness
    r.check(L1 <= d1, "layers", "l1", "first medium is thicker than the object distance")
    r.check(L2 <= d2, "layers", "l2", "second medium is thicker than the image distance")
    for lay, key in ((layer1, "dx1"), (layer2, "dx2")):
        if lay.scatters and lay.delta_x < grid.pitch / 4:
            raise ConfigError(f"[layers] {key}: width below a quarter pitch",
                              src.line("layers", key))

    obj = _object(r, grid, base)

    # detectors
    ref_kind = r.choice("detectors", "reference", ("camera",), "camera")
    ref_pix = r.length("detectors", "reference_pixel", grid.pitch)
    test_kind = r.choice("detectors", "test", ("camera", "bucket", "point"), "camera")
    test_pix = r.length("detectors", "test_pixel", grid.pitch)
    extent = r.length("detectors", "test_extent")
    try:
        ref_det = DetectorSpec(ref_kind, pixel_pitch=ref_pix)
        test_det = DetectorSpec(test_kind, pixel_pitch=test_pix if test_kind == "camera" else None,
                                extent=extent, x=r.length("detectors", "test_x", 0.0))
        ref_det.validate(grid)
        test_det.validate(grid)
        noise = NoiseSpec(r.choice("detectors", "noise", ("none", "gaussian", "shot"), "none"),
                          r.number("detectors", "noise_sigma", 0.0),
                          r.number("detectors", "photons_per_unit", 1000.0))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[detectors]: {exc}", src.line("detectors")) from None
    mode_line = src.line("experiment", "mode")
    for m in modes:
        if m.kind in ("anti-diagonal", "outer-product") and test_kind != "camera":
            raise ConfigError(f"{m.kind} mode needs a camera test detector", mode_line)
        if m.kind == "anti-diagonal" and ref_pix != test_pix:
            raise ConfigError("anti-diagonal mode needs equal reference and test pixels", mode_line)
        if m.kind == "fixed-test-point" and test_kind == "bucket":
            raise ConfigError("fixed-test-point mode needs a camera or point test detector",
                              mode_line)
        if m.kind == "fixed-test-point" and abs(m.test_point) > grid.extent / 2:
            raise ConfigError("test point lies outside the grid",
                              src.line("experiment", "test_point"))

    # trains
    ref_train = OpticalTrain((FreeSpace(f), ThinLens(f), FreeSpace(z),
                              DetectorPlane("reference")), lam, pad)
    test_elems = [FreeSpace(f1), ThinLens(f1), FreeSpace(d1)]
    if layer1.scatters:
        test_elems.append(Scatter(layer1))
    if obj is not None:
        test_elems.append(Mask(obj))
    if layer2.scatters:
        test_elems.append(Scatter(layer2))
    test_elems += [FreeSpace(d2), ThinLens(f2), FreeSpace(z3), DetectorPlane("test")]
    test_train = OpticalTrain(tuple(test_elems), lam, pad)

    cond = geom.conditions(L1, L2)
    warn.extend(cond.warnings())

    out = r.raw("experiment", "output")
    return ExperimentConfig(
        source=source, reference_train=ref_train, test_train=test_train,
        detectors=(ref_det, test_det), modes=modes, frames=frames, master_seed=seed,
        shards=shards, outputs=out, preset=preset, geometry=geom, layer1=layer1,
        layer2=layer2, object=obj, conditions=cond, warnings=tuple(warn), workers=workers,
        batch=batch, g2_window=g2_window, edge_window=edge_window,
        oracle=r.boolean("experiment", "oracle", True), probes=probes, noise=noise,
        settings={s: dict(v) for s, v in src.values.items()})


def _merged(text: str, origin: str = "<config>") -> tuple[_Source, str | None]:
    user = _Source()
    user.feed(text, anchored=True, origin=origin)
    preset = user.get("experiment", "preset")
    if not preset:
        return user, None
    merged = _Source()
    try:
        merged.feed(preset_text(preset), anchored=False, origin=f"preset {preset}")
    except ConfigError as exc:
        raise ConfigError(str(exc), user.line("experiment", "preset")) from None
    for sec, kv in user.values.items():
        merged.values.setdefault(sec, {})
        merged.section_lines[sec] = user.section_lines.get(sec)
        for k, v in kv.items():
            merged.values[sec][k] = v
            merged.lines[(sec, k)] = user.lines.get((sec, k))
    return merged, preset


def parse_config(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        Unknown sections or keys, missing sections, bad values or invariant
        violations, with the line number when the value came from ``text``.
    """
    src, preset = _merged(text)
    return _build(src, preset, Path(base_dir) if base_dir else None)


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    return parse_config(text, p.parent)


def override(text: str, section: str, key: str, value) -> str:
    """Configuration text with ``[section] key`` set to ``value``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    if not cp.has_section(section):
        cp.add_section(section)
    cp.set(section, key, str(value))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
