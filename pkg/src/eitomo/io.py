"""Array files, run configuration and dataset directories.

An array is stored as a JSON manifest next to a raw blob with the same stem::

    phantom.json   {"dtype": "f64", "shape": [128, 128], "order": "row-major",
                    "byte_order": "little-endian", "semantic": "phantom", "units": "1/um"}
    phantom.bin    128*128 little-endian float64 values

Manifests are parsed strictly: missing or unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DomainError
from .forward_model import ScanData
from .illumination import ic_from_scans
from .projector import Geometry
from .simulate import PRESETS, Disk

__all__ = [
    "ManifestError",
    "ArrayFile",
    "write_array",
    "read_array",
    "RunConfig",
    "save_dataset",
    "load_dataset",
    "DATASET_FORMAT",
]

DATASET_FORMAT = "eitomo-dataset/1"

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_KEYS = ("dtype", "shape", "order", "byte_order", "semantic", "units")


class ManifestError(DomainError):
    """Malformed manifest, or a blob that does not match it."""


@dataclass(frozen=True)
class ArrayFile:
    """Parsed array manifest."""

    dtype: str
    shape: tuple[int, ...]
    semantic: str = ""
    units: str = ""
    order: str = "row-major"
    byte_order: str = "little-endian"

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise ManifestError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        if self.order != "row-major":
            raise ManifestError(f"unsupported order {self.order!r}")
        if self.byte_order != "little-endian":
            raise ManifestError(f"unsupported byte_order {self.byte_order!r}")
        if not all(isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in self.shape):
            raise ManifestError(f"shape must be a list of non-negative integers, got {list(self.shape)}")
        if not isinstance(self.semantic, str) or not isinstance(self.units, str):
            raise ManifestError("semantic and units must be strings")

    @property
    def nbytes(self) -> int:
        return math.prod(self.shape) * _DTYPES[self.dtype].itemsize

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in _KEYS}
        d["shape"] = list(self.shape)
        return json.dumps(d, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ArrayFile":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        unknown = set(d) - set(_KEYS)
        missing = set(_KEYS) - set(d)
        if unknown:
            raise ManifestError(f"unknown manifest keys {sorted(unknown)}")
        if missing:
            raise ManifestError(f"missing manifest keys {sorted(missing)}")
        if not isinstance(d["shape"], list):
            raise ManifestError("shape must be a list")
        return cls(d["dtype"], tuple(d["shape"]), d["semantic"], d["units"], d["order"], d["byte_order"])


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".bin")


def write_array(array, path, *, semantic: str = "", units: str = "") -> Path:
    """Write ``array`` as ``<path>.json`` + ``<path>.bin``; returns the manifest path.

    float32 arrays are stored as ``f32``; everything else is converted to
    float64.
    """
    a = np.asarray(array)
    code = "f32" if a.dtype == np.float32 else "f64"
    a = np.ascontiguousarray(a, dtype=_DTYPES[code])
    meta = ArrayFile(code, tuple(int(s) for s in a.shape), semantic, units)
    mpath, bpath = _paths(path)
    mpath.parent.mkdir(parents=True, exist_ok=True)
    bpath.write_bytes(a.tobytes(order="C"))
    mpath.write_text(meta.to_json())
    return mpath


def read_array(path, dtype=None) -> np.ndarray:
    """Read an array written by :func:`write_array`.

    ``dtype`` converts the result (``np.float64`` widens ``f32`` data
    exactly); by default the stored precision is kept.
    """
    mpath, bpath = _paths(path)
    meta = ArrayFile.from_json(mpath.read_text())
    raw = bpath.read_bytes()
    if len(raw) != meta.nbytes:
        raise ManifestError(f"{bpath.name}: expected {meta.nbytes} bytes for shape {list(meta.shape)}, found {len(raw)}")
    a = np.frombuffer(raw, dtype=_DTYPES[meta.dtype]).reshape(meta.shape)
    a = a.astype(a.dtype.newbyteorder("="))
    return a.astype(dtype) if dtype is not None else a


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    """All settings of a run, validated before any computation."""

    preset: str = "well-sampled-flat"
    seed: int = 0
    n_pixels: int = 128
    n_angles: int = 360
    span: float = 2 * math.pi
    pixel_size: float = 50.0
    z: float = 600.0
    gamma: float = 5.0
    lam: float = 1e-2
    slope: float = 9.0
    n_steps: int = 33
    flat_counts: float = 200.0
    noise: bool = True
    ring_enabled: bool = False
    drift_enabled: bool = True
    max_iters: int = 200
    rel_tol: float = 1e-9
    history_size: int = 10
    threads: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        errors = []
        if self.preset not in PRESETS:
            errors.append(f"preset must be one of {sorted(PRESETS)}")
        try:
            checks = self._checks()
        except TypeError as exc:
            raise DomainError(f"invalid configuration: wrong value type ({exc})") from None
        errors += [f"{name}={getattr(self, name)!r} is out of range" for name, ok in checks if not ok]
        if errors:
            raise DomainError("invalid configuration: " + "; ".join(errors))

    def _checks(self) -> list[tuple[str, bool]]:
        return [
            ("n_pixels", self.n_pixels >= 8),
            ("n_angles", self.n_angles >= 2),
            ("span", 0 < self.span <= 2 * math.pi),
            ("pixel_size", 0 < self.pixel_size < math.inf),
            ("z", 0 < self.z < math.inf),
            ("gamma", 0 < self.gamma < math.inf),
            ("lam", 0 <= self.lam < math.inf),
            ("slope", math.isfinite(self.slope)),
            ("n_steps", self.n_steps >= 4),
            ("flat_counts", 0 < self.flat_counts < math.inf),
            ("max_iters", self.max_iters >= 1),
            ("rel_tol", 0 <= self.rel_tol < 1),
            ("history_size", self.history_size >= 3),
            ("threads", self.threads is None or self.threads >= 1),
            ("seed", self.seed >= 0),
        ]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown configuration keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise DomainError(f"{path}: configuration must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def simulation_overrides(self) -> dict:
        keys = ("n_pixels", "n_angles", "span", "pixel_size", "z", "gamma", "n_steps", "slope", "flat_counts")
        return {k: getattr(self, k) for k in keys}


# --------------------------------------------------------------------------
# dataset directories
# --------------------------------------------------------------------------


def save_dataset(ds, workdir, run: RunConfig) -> Path:
    """Write a simulated dataset into ``workdir``; returns the index path.

    Files: ``phantom``, ``flatfield``, ``scan`` and ``drift_true`` arrays plus
    ``dataset.json``, which records geometry, offsets, regions, the seed and
    the configuration that produced them.
    """
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    scan = ds.scan
    g = scan.geometry
    write_array(ds.phantom, wd / "phantom", semantic="phantom h(y, x)", units="1/um")
    write_array(ds.flat_scans, wd / "flatfield", semantic="flat-field scans (t, step, repeat)", units="counts")
    write_array(scan.s_exp, wd / "scan", semantic="sample intensities (t, theta, m)", units="counts")
    write_array(ds.true_params.m_o, wd / "drift_true", semantic="true mask drift m_o(theta)", units="um")
    index = {
        "format": DATASET_FORMAT,
        "preset": ds.config["preset"],
        "seed": ds.config["seed"],
        "config": run.to_dict(),
        "provenance": {"generator": "eitomo.simulate.make_dataset", "flat_seed": 2 * run.seed, "scan_seed": 2 * run.seed + 1},
        "geometry": {"n_pixels": g.n_pixels, "angles": g.angles.tolist(), "pixel_size": g.pixel_size, "step": g.step},
        "offsets": scan.offsets.tolist(),
        "z": scan.z,
        "gamma": scan.gamma,
        "flat": {
            "offsets": scan.ic.offsets.tolist(),
            "period": scan.ic.period,
            "scale": ds.config.get("flat_scale", 1.0),
            "noise": ds.config["noise"],
        },
        "regions": {k: {"x": d.x, "y": d.y, "radius": d.radius, "value": d.value} for k, d in ds.regions.items()},
        "files": ["phantom", "flatfield", "scan", "drift_true"],
    }
    path = wd / "dataset.json"
    path.write_text(json.dumps(index, indent=2) + "\n")
    return path


def load_dataset(workdir) -> tuple[ScanData, dict]:
    """Rebuild the :class:`ScanData` saved by :func:`save_dataset`.

    Returns the scan (with the measured flat field) and the parsed index.
    """
    wd = Path(workdir)
    try:
        index = json.loads((wd / "dataset.json").read_text())
    except FileNotFoundError:
        raise DomainError(f"no dataset.json in {wd}; run 'simulate' first") from None
    if index.get("format") != DATASET_FORMAT:
        raise ManifestError(f"unsupported dataset format {index.get('format')!r}")
    gi = index["geometry"]
    geom = Geometry(gi["n_pixels"], np.asarray(gi["angles"]), gi["pixel_size"], gi["step"])
    flats = read_array(wd / "flatfield", np.float64)
    fl = index["flat"]
    ic = ic_from_scans(flats / fl["scale"], np.asarray(fl["offsets"]), fl["period"])
    s_exp = read_array(wd / "scan", np.float64)
    scan = ScanData(s_exp, np.asarray(index["offsets"]), ic, index["z"], index["gamma"], geom, meta={"workdir": str(wd)})
    index["regions"] = {k: Disk(**v) for k, v in index["regions"].items()}
    return scan, index
