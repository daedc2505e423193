"""Run configuration, checkpoints, manifests, CSV and SVG output.

Every file is written atomically: content goes to a temporary file in the
target directory, which is then renamed over the destination.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .diagnostics import DiagnosticsConfig
from .grid import Grid, fft2, ifft2
from .integrate import IntegratorConfig
from .model import ModelParams, PerturbationState

SCHEMA_VERSION = 1
CHECKPOINT_MAGIC = b"EMHD2DCK"
CHECKPOINT_VERSION = 1
FIELD_ORDER = ("psi", "b")
_HEADER = struct.Struct("<8sIIIddddddI")


class CheckpointError(ValueError):
    pass


# -- atomic writes ---------------------------------------------------------


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- checkpoints -----------------------------------------------------------


def checkpoint_bytes(state: PerturbationState) -> bytes:
    g, p = state.grid, state.params
    payload = b"".join(
        np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes() for f in (state.psi, state.b)
    )
    names = b"".join(n.encode("ascii").ljust(8, b"\0") for n in FIELD_ORDER)
    header = _HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION, g.nx, g.ny, g.Lx, g.Ly, p.mu1, p.mu2, state.time, 0.0, len(FIELD_ORDER)
    )
    crc = struct.pack("<I", zlib.crc32(names + payload))
    return header + names + payload + crc


def checkpoint_write(state: PerturbationState, path) -> Path:
    return atomic_write_bytes(path, checkpoint_bytes(state))


def checkpoint_read(path, expected_grid: Grid | None = None) -> PerturbationState:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, nx, ny, Lx, Ly, mu1, mu2, time, _reserved, nfields = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if nfields != len(FIELD_ORDER):
        raise CheckpointError(f"{path}: expected {len(FIELD_ORDER)} fields, header says {nfields}")
    off = _HEADER.size
    names_len = 8 * nfields
    payload_len = 16 * nx * ny * nfields
    if len(data) != off + names_len + payload_len + 4:
        raise CheckpointError(f"{path}: payload size {len(data) - off} does not match header")
    names = data[off : off + names_len]
    order = tuple(names[8 * i : 8 * i + 8].rstrip(b"\0").decode("ascii") for i in range(nfields))
    if order != FIELD_ORDER:
        raise CheckpointError(f"{path}: field order {order} != {FIELD_ORDER}")
    body = data[off + names_len : off + names_len + payload_len]
    (crc,) = struct.unpack_from("<I", data, off + names_len + payload_len)
    if zlib.crc32(names + body) != crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    try:
        grid = Grid(nx, ny, Lx, Ly)
        params = ModelParams(mu1, mu2)
    except ValueError as exc:
        raise CheckpointError(f"{path}: invalid header values ({exc})") from exc
    if expected_grid is not None and grid != expected_grid:
        raise CheckpointError(f"{path}: grid {grid} does not match configured {expected_grid}")
    arr = np.frombuffer(body, dtype="<c16").reshape(nfields, nx, ny).astype(np.complex128)
    return PerturbationState.from_arrays(grid, arr[0], arr[1], params, time)


# -- run configuration -----------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    nx: int = 64
    ny: int = 64
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi

    @model_validator(mode="after")
    def _check(self):
        Grid(self.nx, self.ny, self.Lx, self.Ly)
        return self

    def build(self) -> Grid:
        return Grid(self.nx, self.ny, self.Lx, self.Ly)


class ModelSpec(_Strict):
    mu1: float = 0.0
    mu2: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        ModelParams(self.mu1, self.mu2)
        return self

    def build(self) -> ModelParams:
        return ModelParams(self.mu1, self.mu2)


class InitialSpec(_Strict):
    profile: Literal["zero", "random-band", "single-mode", "checkpoint"] = "random-band"
    amplitude: float = 1e-2
    kmax: int = 4
    mode: tuple[int, int] = (1, 1)
    path: Optional[str] = None

    @field_validator("amplitude")
    @classmethod
    def _amp(cls, v):
        if not math.isfinite(v) or v < 0:
            raise ValueError("amplitude must be finite and >= 0")
        return v

    @field_validator("kmax")
    @classmethod
    def _kmax(cls, v):
        if v < 1:
            raise ValueError("kmax must be >= 1")
        return v

    @model_validator(mode="after")
    def _path(self):
        if (self.profile == "checkpoint") != (self.path is not None):
            raise ValueError("path is required for, and only allowed with, profile 'checkpoint'")
        return self


class IntegratorSpec(_Strict):
    scheme: Literal["imex-cn-ab2", "etd-rk4"] = "etd-rk4"
    dt: float = 1e-3
    t_end: float = 0.1
    output_stride: int = 10
    dealias: bool = True
    nonlinear: bool = True

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> IntegratorConfig:
        return IntegratorConfig(self.scheme, self.dt, self.t_end, self.output_stride, self.dealias, self.nonlinear)


class DiagnosticsSpec(_Strict):
    eps1: float = 0.1
    s: float = 0.45
    s1_list: tuple[float, ...] = (0.0, 1.0)
    fit_window: tuple[float, float] = (10.0, 1e3)

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> DiagnosticsConfig:
        return DiagnosticsConfig(self.eps1, self.s, self.s1_list, self.fit_window)


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    grid: GridSpec = Field(default_factory=GridSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    integrator: IntegratorSpec = Field(default_factory=IntegratorSpec)
    diagnostics: DiagnosticsSpec = Field(default_factory=DiagnosticsSpec)
    output_dir: str = "runs/default"
    seed: int = 0
    plots: bool = True

    @model_validator(mode="after")
    def _dealias_room(self):
        if self.initial.profile in ("random-band", "single-mode"):
            k = self.initial.kmax if self.initial.profile == "random-band" else max(map(abs, self.initial.mode))
            if k > min(self.grid.nx, self.grid.ny) // 3:
                raise ValueError("initial.kmax/mode exceeds the 2/3-dealiased band of the grid")
        return self


def load_config(path) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_text())


def config_echo(cfg: RunConfig) -> dict:
    return json.loads(cfg.model_dump_json())


def initial_state(cfg: RunConfig) -> PerturbationState:
    g = cfg.grid.build()
    params = cfg.model.build()
    ini = cfg.initial
    if ini.profile == "checkpoint":
        st = checkpoint_read(ini.path, expected_grid=g)
        return PerturbationState.from_arrays(g, st.psi.coeffs, st.b.coeffs, params, st.time)
    if ini.profile == "zero":
        z = np.zeros(g.shape, dtype=complex)
        return PerturbationState.from_arrays(g, z, z, params)
    X, Y = g.coords
    if ini.profile == "single-mode":
        mx, my = ini.mode
        phase = 2 * np.pi * (mx * X / g.Lx + my * Y / g.Ly)
        psi, b = ini.amplitude * np.sin(phase), ini.amplitude * np.cos(phase)
        return PerturbationState.from_arrays(g, fft2(psi), fft2(b), params)
    return random_band_state(g, ini.amplitude, ini.kmax, cfg.seed, params)


def random_band_state(grid: Grid, amplitude: float, kmax: int, seed: int, params: ModelParams | None = None) -> PerturbationState:
    """Real random fields with mode indices ``|m| <= kmax``, scaled to max-norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    idx2 = grid.mx[:, None] ** 2 + grid.my[None, :] ** 2
    keep = (idx2 <= kmax * kmax) & ~grid.nyquist_mask & (idx2 > 0)
    out = []
    for _ in range(2):
        c = np.where(keep, fft2(rng.standard_normal(grid.shape)), 0)
        phys = ifft2(c)
        peak = np.max(np.abs(phys))
        c = c * (amplitude / peak) if peak > 0 else c
        out.append(c)
    return PerturbationState.from_arrays(grid, out[0], out[1], params or ModelParams())


# -- CSV, JSON, manifests --------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, columns, rows) -> Path:
    return atomic_write_text(path, csv_text(columns, rows))


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def code_version() -> str:
    from . import __version__

    return __version__


def build_manifest(config: dict, files: Sequence[Path], root: Path, certification=None, extra: dict | None = None) -> dict:
    """Manifest contents; deterministic for identical inputs (timestamps live in ``timing.json``)."""
    entries = [
        {"path": str(Path(f).relative_to(root)), "sha256": sha256_file(f)} for f in sorted(files, key=lambda p: str(p))
    ]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "code_version": code_version(),
        "config": config,
        "files": entries,
    }
    if certification is not None:
        doc["certification"] = {
            "eps1": certification.eps1,
            "c_E": certification.c_E,
            "c_D": certification.c_D,
            "c": certification.c,
        }
    if extra:
        doc.update(extra)
    return doc


# -- SVG -------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_line_plot(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    overlays: dict[str, tuple[Sequence[float], Sequence[float]]] | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """Deterministic SVG line plot; overlays are drawn dashed (e.g. fitted slopes)."""
    overlays = overlays or {}
    pts = [(x, y) for xs, ys in list(series.values()) + list(overlays.values()) for x, y in zip(xs, ys)]
    pts = [(float(x), float(y)) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{_esc(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{_esc(ylabel)}</text>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(fx):.1f}" y="{mt + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{fx:.3g}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(fy) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{fy:.3g}</text>')
    legend_y = mt + 14
    for n, (name, (xs_, ys_)) in enumerate(list(series.items()) + list(overlays.items())):
        color = _PALETTE[n % len(_PALETTE)]
        dash = ' stroke-dasharray="6 4"' if name in overlays else ""
        coords = " ".join(
            f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs_, ys_) if math.isfinite(x) and math.isfinite(y)
        )
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>')
        out.append(f'<text x="{ml + pw - 8}" y="{legend_y}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{_esc(name)}</text>')
        legend_y += 14
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
