import numpy as np
import pytest

from aperiodic import io as aio
from aperiodic.cps import PHI, fibonacci_cps, fibonacci_window, generate_model_set
from aperiodic.diffraction import PeakList
from aperiodic.errors import ConfigError
from aperiodic.pointset import PointSet, read_csv, write_csv
from aperiodic.schrodinger import Spectrum


def test_parse_config():
    cfg = aio.parse_config("""
# comment
d = 1
window.kind=interval   # trailing comment
name = "a # not a comment"
""")
    assert cfg == {"d": "1", "window.kind": "interval", "name": "a # not a comment"}
    with pytest.raises(ConfigError):
        aio.parse_config("no equals sign")


def fib_config():
    return {"d": "1", "m": "1", "basis": f"1 {PHI!r} 1 {1 - PHI!r}",
            "window.kind": "interval", "window.data": f"-1 {PHI - 1!r}"}


def test_scheme_from_config_matches_builtin():
    scheme, window = aio.scheme_from_config(fib_config())
    a = generate_model_set(scheme, window, (0.0, 100.0))
    b = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 100.0))
    assert np.array_equal(a.points, b.points)
    assert not scheme.verified


@pytest.mark.parametrize("patch", [
    {"basis": "1 2 3"},
    {"window.kind": "blob"},
    {"window.data": "0"},
    {"d": "x"},
    {"basis": "1 2 2 4"},
])
def test_scheme_config_errors(patch):
    cfg = fib_config()
    cfg.update(patch)
    with pytest.raises(ConfigError):
        aio.scheme_from_config(cfg)


def test_missing_key():
    cfg = fib_config()
    del cfg["basis"]
    with pytest.raises(ConfigError, match="basis"):
        aio.scheme_from_config(cfg)


def test_tone_map():
    v = aio.tone_map(np.array([0.0, 1 / 16, 1.0, 0.5]))
    assert v.dtype == np.uint16
    assert v.tolist() == [0, round(65535 * 0.5), 65535, round(65535 * 0.5**0.25)]
    assert aio.tone_map(np.zeros(3)).tolist() == [0, 0, 0]


def test_pgm_roundtrip_big_endian(tmp_path):
    img = np.array([[0, 1, 256], [65535, 2, 3]], dtype=np.uint16)
    path = tmp_path / "x.pgm"
    aio.write_pgm16(path, img)
    data = path.read_bytes()
    assert data.startswith(b"P5\n3 2\n65535\n")
    assert data[len(b"P5\n3 2\n65535\n"):][:6] == bytes([0, 0, 0, 1, 1, 0])
    assert np.array_equal(aio.read_pgm16(path), img)
    with pytest.raises(ConfigError):
        aio.write_pgm16(path, img.astype(float))


def test_grid_image_orientation():
    v = np.arange(6).reshape(3, 2)  # values[ix, iy]
    img = aio.grid_image(v)
    assert img.shape == (2, 3)
    assert img[-1].tolist() == [0, 2, 4] and img[0].tolist() == [1, 3, 5]


def test_peaks_csv(tmp_path):
    peaks = PeakList(np.array([[0.0, 0.0], [1.5, -2.0]]), np.array([1.0, 0.25]),
                     np.array([[0, 0, 0, 0], [1, -2, 3, 0]]))
    path = tmp_path / "p.csv"
    aio.write_peaks_csv(path, peaks)
    text = path.read_text()
    assert text.splitlines()[0] == "kx,ky,intensity,provenance"
    assert "\r" not in text
    rows = aio.read_peaks_csv(path)
    assert rows[1] == {"kx": "1.5", "ky": "-2", "intensity": "0.25", "provenance": "1 -2 3 0"}


def test_spectrum_csv(tmp_path):
    s = Spectrum(np.array([[-1.0, 0.5], [1.0, 2.0]]), {"lambda": 0.5, "level": 7})
    path = tmp_path / "s.csv"
    aio.write_spectrum_csv(path, [s])
    assert path.read_text().splitlines()[0] == "lambda,level,lo,hi"
    back = aio.read_spectrum_csv(path)
    assert np.array_equal(back[(0.5, 7)], s.intervals)


def test_sidecar_roundtrip(tmp_path):
    path = tmp_path / "a.meta"
    aio.write_sidecar(path, {"pitch": 1 / 64, "shape": [3, 4], "name": "x"})
    assert aio.read_sidecar(path) == {"pitch": "0.015625", "shape": "3 4", "name": "x"}


def test_point_csv_roundtrip(tmp_path):
    pts = PointSet(np.array([[0.1, -2.0], [1 / 3, 4.0]]))
    path = tmp_path / "pts.csv"
    write_csv(pts, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# dim=2" and lines[2] == "0.333333333333,4"
    back = read_csv(path)
    assert back.dim == 2 and np.allclose(back.points, pts.points, atol=1e-12)


def test_point_csv_requires_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n")
    with pytest.raises(ConfigError):
        read_csv(path)
