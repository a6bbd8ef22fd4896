"""Flat key=value configs, 16-bit PGM images, CSV tables and sidecar files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cps import CutProjectScheme, build_cps
from .errors import ConfigError
from .windows import Interval, Polygon, Window

TONE_EXPONENT = 0.25


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key] = value
    return out


def _strip_comment(line: str) -> str:
    quote = None
    for i, c in enumerate(line):
        if quote:
            if c == quote:
                quote = None
        elif c in "\"'":
            quote = c
        elif c == "#":
            return line[:i]
    return line


def read_config(path) -> dict:
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _numbers(value: str, key: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in value.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {value!r}") from None


def scheme_from_config(cfg: dict) -> tuple[CutProjectScheme, Window]:
    """Keys: ``d``, ``m``, ``basis`` (row-major), ``window.kind``, ``window.data``."""
    try:
        d, m = int(cfg["d"]), int(cfg["m"])
        basis = _numbers(cfg["basis"], "basis")
        kind = cfg["window.kind"].strip().lower()
        data = _numbers(cfg["window.data"], "window.data")
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc.args[0]!r}") from None
    except ValueError:
        raise ConfigError("d and m must be integers") from None
    n = d + m
    if basis.size != n * n:
        raise ConfigError(f"basis needs {n * n} entries, got {basis.size}")
    scheme = build_cps(basis.reshape(n, n), d, m)
    if kind == "interval":
        if m != 1 or data.size != 2:
            raise ConfigError("interval window needs m = 1 and two endpoints")
        window: Window = Interval(float(data[0]), float(data[1]))
    elif kind == "polygon":
        if m != 2 or data.size < 6 or data.size % 2:
            raise ConfigError("polygon window needs m = 2 and an even list of >= 6 coordinates")
        window = Polygon(data.reshape(-1, 2))
    else:
        raise ConfigError(f"unknown window.kind {kind!r}")
    return scheme, window


def tone_map(values: np.ndarray) -> np.ndarray:
    """v = round(65535 (I / I_max)^(1/4)) as uint16."""
    v = np.asarray(values, dtype=float)
    top = v.max() if v.size else 0.0
    if top <= 0:
        return np.zeros(v.shape, dtype=np.uint16)
    return np.rint(65535.0 * np.clip(v / top, 0.0, 1.0) ** TONE_EXPONENT).astype(np.uint16)


def write_pgm16(path, image: np.ndarray) -> None:
    """Binary P5 PGM, maxval 65535, big-endian samples."""
    img = np.asarray(image)
    if img.ndim == 1:
        img = img.reshape(1, -1)
    if img.dtype != np.uint16:
        raise ConfigError("PGM writer expects uint16 pixels")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode("ascii"))
        pos = end
    if fields[0] != "P5" or int(fields[3]) != 65535:
        raise ConfigError(f"{path}: not a 16-bit P5 PGM")
    w, h = int(fields[1]), int(fields[2])
    pos += 1
    return np.frombuffer(data[pos : pos + 2 * w * h], dtype=">u2").reshape(h, w).astype(np.uint16)


def grid_image(values: np.ndarray) -> np.ndarray:
    """Arrange grid values for display: kx along columns, ky increasing upwards."""
    v = np.asarray(values)
    return v.reshape(1, -1) if v.ndim == 1 else v.T[::-1]


def write_sidecar(path, entries: dict) -> None:
    lines = [f"{k}={_fmt(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_sidecar(path) -> dict:
    return parse_config(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_peaks_csv(path, peaks) -> None:
    """Columns ``kx,ky,intensity,provenance`` (``kx,intensity,provenance`` in 1D)."""
    cols = ["kx", "ky"][: peaks.dim] + ["intensity", "provenance"]
    lines = [",".join(cols)]
    for i in range(len(peaks)):
        prov = "" if peaks.provenance is None else " ".join(str(int(c)) for c in peaks.provenance[i])
        ks = [f"{c:.12g}" for c in peaks.k[i]]
        lines.append(",".join(ks + [f"{peaks.intensity[i]:.12g}", prov]))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_peaks_csv(path) -> list[dict]:
    rows = Path(path).read_text().splitlines()
    header = rows[0].split(",")
    return [dict(zip(header, r.split(","))) for r in rows[1:] if r]


def write_spectrum_csv(path, spectra) -> None:
    """One interval per line: ``lambda,level,lo,hi``."""
    lines = ["lambda,level,lo,hi"]
    for s in spectra:
        lam, level = s.meta.get("lambda"), s.meta.get("level")
        for lo, hi in s.intervals:
            lines.append(f"{lam:.12g},{level},{lo:.12g},{hi:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_spectrum_csv(path) -> dict:
    """Map (lambda, level) -> (n, 2) interval array."""
    out: dict = {}
    for line in Path(path).read_text().splitlines()[1:]:
        if not line:
            continue
        lam, level, lo, hi = line.split(",")
        out.setdefault((float(lam), int(level)), []).append((float(lo), float(hi)))
    return {k: np.array(v) for k, v in out.items()}
