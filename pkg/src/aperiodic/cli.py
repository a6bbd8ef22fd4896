"""Command-line front end: ``aperiodic generate | diffract | spectrum | verify``.

Exit codes: 0 ok, 1 verification failure, 2 configuration error, 3 cap exceeded.
Every output file ``X`` is accompanied by ``X.meta`` recording the run
configuration.  Output directory and thread count are left out of sidecars so
that identical configs give identical bytes.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import io as aio
from .cps import (
    DEFAULT_CAP,
    PENROSE_CAP_RADIUS,
    fibonacci_cps,
    fibonacci_window,
    generate_model_set,
    lattice_cps,
    lattice_window,
    penrose_cps,
    penrose_vertices,
    penrose_window,
)
from .diffraction import (
    bragg_peaks_model_set,
    diffraction_image,
    numeric_peaks,
    peaks_from_grid,
    symmetric_grid_spec,
    symmetry_score,
    thue_morse_scaling,
)
from .errors import CapExceededError, ConfigError
from .pointset import PointSet, read_csv, write_csv
from .schrodinger import (
    MAX_ORACLE_SIZE,
    Spectrum,
    coupling_sweep,
    direct_spectrum_oracle,
    hausdorff_distance,
    oracle_bands,
    rasterize,
)
from .substitution import (
    THUE_MORSE,
    geometric_realization,
    ones_positions,
    read_rule,
    two_sided_fixed_point,
)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3

PRESETS = ("fibonacci", "penrose", "thue-morse", "lattice-z1", "lattice-z2")
_ALIASES = {"thue_morse": "thue-morse", "lattice": "lattice-z1", "lattice_z1": "lattice-z1",
            "lattice_z2": "lattice-z2", "z1": "lattice-z1", "z2": "lattice-z2"}

SYMMETRY_FOLDS = (2, 3, 4, 5, 6, 8, 10, 12)
GAPLESS_TOL = 1e-4
_UNRECORDED = {"out", "threads", "func"}


@dataclass
class RunConfig:
    subcommand: str
    config_path: str | None
    out: Path
    threads: int = 1
    cap: int = DEFAULT_CAP
    max_size: int = MAX_ORACLE_SIZE
    deterministic: bool = True  # no seeds anywhere; kept for the record

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if self.cap < 1 or self.max_size < 1:
            raise ConfigError("caps must be positive")


# --- argument parsing helpers ----------------------------------------------

def parse_number(text: str) -> float:
    """Accept decimals and fractions such as ``1/64``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def parse_region(text: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``a:b`` for every axis, or ``a:b,c:d`` per axis."""
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * dim
    if len(parts) != dim:
        raise ConfigError(f"region {text!r} does not match dimension {dim}")
    lo, hi = [], []
    for p in parts:
        ab = p.split(":")
        if len(ab) != 2:
            raise ConfigError(f"region component {p!r} must look like lo:hi")
        a, b = parse_number(ab[0]), parse_number(ab[1])
        if b < a:
            raise ConfigError(f"region component {p!r} has hi < lo")
        lo.append(a)
        hi.append(b)
    return np.array(lo), np.array(hi)


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` inclusive of both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--sweep must look like start:stop:step")
    a, b, step = (parse_number(p) for p in parts)
    if step <= 0 or b < a:
        raise ConfigError("--sweep needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(n + 1)]


def parse_lambdas(text: str) -> list[float]:
    vals = [parse_number(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ConfigError("--lambda needs at least one value")
    return vals


def parse_scaling(text: str) -> float:
    body = text.split("=", 1)[1] if "=" in text else text
    if "=" in text and text.split("=", 1)[0].strip() != "k":
        raise ConfigError("--scaling must look like k=<value>")
    return parse_number(body)


def normalize_preset(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return key


# --- sources ---------------------------------------------------------------

@dataclass
class Source:
    """A resolved generator: either a model set or an explicit point set."""

    name: str
    dim: int
    scheme: object = None
    window: object = None
    config: dict = field(default_factory=dict)
    word: object = None


def resolve_source(args) -> Source:
    if getattr(args, "points", None):
        pts = read_csv(args.points)
        return Source(f"file:{Path(args.points).name}", pts.dim)
    if args.config:
        cfg = aio.read_config(args.config)
        if any(k.startswith("rule.") for k in cfg):
            return Source("substitution", 1, config=cfg)
        scheme, window = aio.scheme_from_config(cfg)
        return Source("custom", scheme.d, scheme, window, cfg)
    if not args.preset:
        raise ConfigError("give --preset or --config")
    preset = normalize_preset(args.preset)
    if preset == "fibonacci":
        return Source(preset, 1, fibonacci_cps(), fibonacci_window())
    if preset == "penrose":
        return Source(preset, 2, penrose_cps(), penrose_window())
    if preset == "thue-morse":
        return Source(preset, 1)
    d = int(preset[-1])
    return Source(preset, d, lattice_cps(d), lattice_window(d))


def _word_points(rule, cfg: dict, lo: float, hi: float):
    """Two-sided fixed point covering [lo, hi] and its point set."""
    seed = cfg.get("seed", "0|0")
    if "|" not in seed:
        raise ConfigError("seed must look like left|right")
    left, right = seed.split("|", 1)
    lengths = {k[7:]: parse_number(v) for k, v in cfg.items() if k.startswith("length.")}
    need = max(abs(lo), abs(hi) + 1, 1.0)
    word, gen = two_sided_fixed_point(rule, (left, right), 0), 0
    while min(len(word.left), len(word.right)) < need:
        gen += 1
        if gen > 40:
            raise CapExceededError("substitution word does not grow to cover the region")
        word = two_sided_fixed_point(rule, (left, right), gen)
    if lengths:
        pts = geometric_realization(word, lengths)
        mask = (pts.points[:, 0] >= lo) & (pts.points[:, 0] <= hi)
        return word, pts.select(mask)
    a, b = int(math.ceil(lo)), int(math.floor(hi))
    word = word.restrict(max(a, word.lo), min(b + 1, word.hi)) if a <= 0 <= b + 1 else word
    pts = ones_positions(word, rule.alphabet)
    mask = (pts.points[:, 0] >= lo) & (pts.points[:, 0] <= hi)
    return word, pts.select(mask)


_GENERATE_DEFAULTS = {"fibonacci": "0:100", "thue-morse": "-16:15", "lattice-z1": "-10:10",
                      "lattice-z2": "-10:10", "custom": "0:100", "substitution": "-16:15"}
_DIFFRACT_DEFAULTS = {"fibonacci": "0:2000", "thue-morse": "0:4095", "lattice-z1": "-200:200",
                      "lattice-z2": "-20:20", "custom": "0:2000", "substitution": "0:4095"}


def build_points(src: Source, args, defaults: dict, run: RunConfig) -> tuple[PointSet, dict]:
    """Generate the point set for ``src``; returns it with descriptive metadata."""
    meta: dict = {"source": src.name}
    if src.name.startswith("file:"):
        pts = read_csv(args.points)
        meta["points_file_dim"] = pts.dim
        return pts, meta
    if src.name == "penrose":
        if args.region:
            region = parse_region(args.region, 2)
            pts = penrose_vertices(region=region, cap=run.cap, threads=run.threads)
            meta["region"] = f"{args.region}"
        else:
            radius = 20.0 if args.radius is None else args.radius
            pts = penrose_vertices(radius, cap=run.cap, threads=run.threads)
            meta["radius"] = radius
        meta["scheme_verified"] = "yes"
        return pts, meta
    if args.radius is not None:
        raise ConfigError("--radius only applies to the penrose preset")
    region_text = args.region or defaults[src.name]
    lo, hi = parse_region(region_text, src.dim)
    meta["region"] = region_text
    if src.name in ("thue-morse", "substitution"):
        rule = THUE_MORSE if src.name == "thue-morse" else read_rule(src.config)
        word, pts = _word_points(rule, src.config, float(lo[0]), float(hi[0]))
        src.word = word
        meta["rule"] = " ".join(f"{a}->{img}" for a, img in rule.images)
        return pts, meta
    pts = generate_model_set(src.scheme, src.window, (lo, hi), cap=run.cap, threads=run.threads)
    meta["scheme_verified"] = "yes" if src.scheme.verified else "no (unverified scheme)"
    return pts, meta


# --- sidecars --------------------------------------------------------------

def run_entries(args, extra: dict | None = None) -> dict:
    entries = {"tool": f"aperiodic {__version__}", "subcommand": args.command}
    for key in sorted(vars(args)):
        if key in _UNRECORDED or key == "command":
            continue
        value = getattr(args, key)
        if value is None or value is False:
            continue
        entries[f"arg.{key}"] = value
    if getattr(args, "config", None):
        for k, v in aio.read_config(args.config).items():
            entries[f"config.{k}"] = v
    entries.update(extra or {})
    return entries


def _sidecar(path: Path, args, extra: dict | None = None) -> None:
    aio.write_sidecar(path.with_name(path.name + ".meta"), run_entries(args, extra))


# --- subcommands -----------------------------------------------------------

def cmd_generate(args, run: RunConfig) -> int:
    src = resolve_source(args)
    pts, meta = build_points(src, args, _GENERATE_DEFAULTS, run)
    out = run.out / "points.csv"
    write_csv(pts, out)
    meta["count"] = len(pts)
    if pts.provenance is not None:
        prov = run.out / "points.provenance.csv"
        width = pts.provenance.shape[1]
        lines = [",".join(f"n{i + 1}" for i in range(width))]
        lines += [",".join(str(int(c)) for c in row) for row in pts.provenance]
        prov.write_text("\n".join(lines) + "\n", newline="\n")
        _sidecar(prov, args, {"rows_match": "points.csv"})
    if src.word is not None:
        wpath = run.out / "word.txt"
        wpath.write_text(f"{src.word}\n", newline="\n")
        _sidecar(wpath, args, {"format": "left|right, origin at the bar"})
    _sidecar(out, args, meta)
    if meta.get("scheme_verified", "yes") != "yes":
        print("note: scheme injectivity/density not verified", file=sys.stderr)
    print(f"wrote {len(pts)} points to {out}")
    return EXIT_OK


def cmd_diffract(args, run: RunConfig) -> int:
    src = resolve_source(args)
    pts, meta = build_points(src, args, _DIFFRACT_DEFAULTS, run)
    if len(pts) == 0:
        raise ConfigError("the patch is empty")
    d = pts.dim
    extent = args.extent if args.extent is not None else (4.0 if d == 2 else 3.0)
    pitch = parse_number(args.pitch) if args.pitch else (1 / 64 if d == 2 else 1 / 1024)
    if extent <= 0 or pitch <= 0:
        raise ConfigError("--extent and --pitch must be positive")
    origin, n = symmetric_grid_spec(extent, pitch, d)
    grid = diffraction_image(pts, origin, pitch, n, threads=run.threads)
    span = float(np.max(np.ptp(pts.points, axis=0))) if len(pts) > 1 else 0.0
    if d == 1 and span > 0.5 / pitch:
        peaks = numeric_peaks(pts, extent, pitch, count=args.peaks, threads=run.threads,
                              seed_span=0.5 / pitch)
    else:
        peaks = peaks_from_grid(pts, grid, count=args.peaks)

    geometry = {
        "origin": grid.origin, "pitch": pitch, "shape": list(grid.shape),
        "normalization": "I(k)=|S(k)|^2/N^2 so I(0)=1",
        "per_volume_convention": "multiply by (N/volume)^2 for Bragg weights per unit volume",
        "points": len(pts), "patch_span": span,
    }
    img_path = run.out / "intensity.pgm"
    aio.write_pgm16(img_path, aio.tone_map(aio.grid_image(grid.values)))
    _sidecar(img_path, args, {**meta, **geometry, "imax": float(grid.values.max()),
                              "tone_curve": "v=round(65535*(I/Imax)^(1/4))",
                              "orientation": "columns kx increasing; rows ky decreasing" if d == 2
                              else "single row, kx increasing"})
    peak_path = run.out / "peaks.csv"
    aio.write_peaks_csv(peak_path, peaks)
    _sidecar(peak_path, args, {**meta, **geometry, "peaks": len(peaks), "kind": "numeric, refined"})

    report = [f"points={len(pts)}", f"grid_shape={'x'.join(map(str, grid.shape))}", f"pitch={pitch:.12g}",
              f"numeric_peaks={len(peaks)}"]
    if src.scheme is not None:
        floor = 1e-3 if d == 1 else 1e-2
        exact = bragg_peaks_model_set(src.scheme, src.window, extent, floor).normalized()
        ex_path = run.out / "exact_peaks.csv"
        aio.write_peaks_csv(ex_path, exact)
        _sidecar(ex_path, args, {**meta, "peaks": len(exact), "kind": "exact Bragg, I(0)=1",
                                 "intensity_floor": floor, "k_cutoff": extent,
                                 "density": exact.meta["density"]})
        report.append(f"exact_peaks={len(exact)}")
        report.append(f"density={exact.meta['density']:.12g}")
    if d == 2:
        for fold in SYMMETRY_FOLDS:
            s = symmetry_score(peaks, fold, position_tol=pitch)
            report.append(f"symmetry_score.fold{fold}={s.score:.6f} (top {s.k_effective})")
    if args.scaling:
        if src.name != "thue-morse":
            raise ConfigError("--scaling is available for the thue-morse preset")
        k = parse_scaling(args.scaling)
        for weighted in (False, True):
            fit = thue_morse_scaling(k, weighted=weighted)
            label = "weighted" if weighted else "unweighted"
            beta = "null" if fit.null else f"{fit.beta:.6f}"
            report.append(f"scaling.k={k:.12g} beta.{label}={beta} sizes=2^8..2^16")
    for i in range(min(10, len(peaks))):
        ks = " ".join(f"{c:.6f}" for c in peaks.k[i])
        report.append(f"peak[{i}] k=({ks}) I={peaks.intensity[i]:.6g}")
    rep_path = run.out / "report.txt"
    rep_path.write_text("\n".join(report) + "\n", newline="\n")
    _sidecar(rep_path, args, meta)
    for line in report:
        if not line.startswith("peak["):
            print(line)
    return EXIT_OK


def _tag(spectra, lams, level):
    return [Spectrum(s.intervals, {**s.meta, "lambda": lam, "level": level}) for s, lam in zip(spectra, lams)]


def cmd_spectrum(args, run: RunConfig) -> int:
    if (args.sweep is None) == (args.lambda_ is None):
        raise ConfigError("give exactly one of --lambda or --sweep")
    lams = parse_sweep(args.sweep) if args.sweep else parse_lambdas(args.lambda_)
    level = args.level
    if level < 0:
        raise ConfigError("--level must be >= 0")
    pitch = parse_number(args.pitch) if args.pitch else 1e-3
    if pitch <= 0:
        raise ConfigError("--pitch must be positive")
    rows = coupling_sweep(lams, level, pitch, product=args.product, threads=run.threads)
    spec1 = _tag([r.spectrum for r in rows], lams, level)
    base = {"level": level, "pitch": pitch, "lambdas": lams}

    path = run.out / "spectrum.csv"
    aio.write_spectrum_csv(path, spec1)
    _sidecar(path, args, {**base, "variant": "1D approximant bands |x_k| <= 1"})
    report = []
    for s in spec1:
        report.append(f"lambda={s.meta['lambda']:.12g} level={level} intervals={len(s)} "
                      f"measure={s.measure:.9g} gaps={s.gap_count} max_gap={s.max_gap():.6g}")
    if args.product:
        spec2 = _tag([r.product for r in rows], lams, level)
        ppath = run.out / "product.csv"
        aio.write_spectrum_csv(ppath, spec2)
        _sidecar(ppath, args, {**base, "variant": "2D sumset of the 1D bands with themselves"})
        threshold = None
        for s in sorted(spec2, key=lambda s: s.meta["lambda"]):
            if s.max_gap() > GAPLESS_TOL:
                break
            threshold = s.meta["lambda"]
        for s in spec2:
            report.append(f"product lambda={s.meta['lambda']:.12g} intervals={len(s)} "
                          f"max_gap={s.max_gap():.6g}")
        report.append(f"product gapless up to lambda={'none' if threshold is None else f'{threshold:.12g}'}"
                      f" (gap tolerance {GAPLESS_TOL:g})")
    if len(lams) > 1 or args.sweep:
        lam_max = max(lams)
        variants = [("raster_1d.pgm", False, 2.0 + lam_max + 0.5)]
        if args.product:
            variants.append(("raster_2d.pgm", True, 2 * (2.0 + lam_max + 0.5)))
        for name, product, half in variants:
            hit = rasterize(rows, (-half, half), args.width, product=product)
            img = np.where(hit, 0, 65535).astype(np.uint16)
            rpath = run.out / name
            aio.write_pgm16(rpath, img)
            _sidecar(rpath, args, {**base, "energy_range": [-half, half], "width": args.width,
                                   "rows": "one per lambda, largest lambda at the top",
                                   "pixels": "0 where the column's energy bin meets the spectrum, 65535 otherwise"})
    if args.oracle:
        for lam, s in zip(lams, spec1):
            ev = direct_spectrum_oracle(lam, level, "periodic", max_size=run.max_size)
            points = Spectrum(np.stack([ev, ev], axis=1))
            bands = oracle_bands(lam, level, max_size=run.max_size)
            inside = "yes" if np.all(s.contains(ev, 1e-6)) else "no"
            h_ev, h_bands = hausdorff_distance(s, points), hausdorff_distance(s, bands)
            report.append(f"oracle lambda={lam:.12g} level={level} hausdorff_eigenvalues={h_ev:.6g}"
                          f" hausdorff_bands={h_bands:.6g} contained={inside}")
    rep = run.out / "spectrum_report.txt"
    rep.write_text("\n".join(report) + "\n", newline="\n")
    _sidecar(rep, args, base)
    if len(lams) == 1:
        for lo, hi in spec1[0].intervals[:20]:
            print(f"[{lo:.9f}, {hi:.9f}]")
        if len(spec1[0]) > 20:
            print(f"... {len(spec1[0]) - 20} more intervals")
    for line in report:
        print(line)
    return EXIT_OK


def cmd_verify(args, run: RunConfig) -> int:
    from .verify import run_checks

    ok = run_checks(quick=args.quick, golden_dir=args.golden_dir, threads=run.threads)
    return EXIT_OK if ok else EXIT_VERIFY


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aperiodic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        if outputs:
            p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--threads", type=int, default=1, help="worker pool size")
        p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="candidate-count cap")

    for name in ("generate", "diffract"):
        p = sub.add_parser(name, help=f"{name} a point set" if name == "generate" else "diffraction of a patch")
        p.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
        p.add_argument("--config", help="key=value scheme or substitution config")
        p.add_argument("--region", help="box lo:hi (all axes) or lo:hi,lo:hi")
        p.add_argument("--radius", type=float, help=f"penrose disk radius (cap {PENROSE_CAP_RADIUS:g})")
        common(p)
        if name == "diffract":
            p.add_argument("--points", help="point CSV to use instead of a generator")
            p.add_argument("--extent", type=float, help="grid half-width in k")
            p.add_argument("--pitch", help="grid pitch, e.g. 1/64")
            p.add_argument("--peaks", type=int, default=300, help="grid maxima to refine")
            p.add_argument("--scaling", help="peak scaling at k, e.g. k=1/3 (thue-morse)")
        p.set_defaults(func=cmd_generate if name == "generate" else cmd_diffract)

    p = sub.add_parser("spectrum", help="Fibonacci Hamiltonian approximant spectra")
    p.add_argument("--lambda", dest="lambda_", help="coupling(s), comma separated")
    p.add_argument("--sweep", help="coupling sweep start:stop:step")
    p.add_argument("--level", type=int, default=10, help="approximant level")
    p.add_argument("--pitch", help="energy sampling pitch (default 1e-3)")
    p.add_argument("--product", action="store_true", help="also the 2D sumset spectrum")
    p.add_argument("--oracle", action="store_true", help="compare with direct diagonalization")
    p.add_argument("--width", type=int, default=1024, help="raster width in pixels")
    p.add_argument("--max-size", dest="max_size", type=int, default=MAX_ORACLE_SIZE,
                   help="matrix size cap for the oracle")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="fast subset")
    p.add_argument("--golden-dir", dest="golden_dir", help="directory holding the golden files")
    common(p, outputs=False)
    p.set_defaults(func=cmd_verify)
    return parser


_VALUE_FLAGS = {"--region", "--sweep", "--lambda", "--pitch", "--extent"}


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--region -10:10`` into ``--region=-10:10`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok in _VALUE_FLAGS and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        out = Path(getattr(args, "out", ".") or ".")
        run = RunConfig(args.command, getattr(args, "config", None), out, args.threads, args.cap,
                        getattr(args, "max_size", MAX_ORACLE_SIZE))
        if args.command != "verify":
            try:
                out.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        return args.func(args, run)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
