import json
import subprocess
import sys

import numpy as np
import pytest

from coevoseg import ImageBuffer, LabelMap
from coevoseg.bench import BoundaryMap
from coevoseg.cli import main
from coevoseg.fileio import (
    FormatError, encode_image, encode_pbm, format_labels, load_labels, mean_color_image,
    parse_labels, parse_netpbm, read_config_file, save_image, save_pbm,
)

import oracles


def test_pgm_roundtrip():
    img = ImageBuffer(np.arange(12, dtype=np.uint8).reshape(3, 4))
    magic, arr = parse_netpbm(encode_image(img))
    assert magic == "P5" and np.array_equal(arr, img.data)


def test_ppm_with_comment():
    data = b"P6\n# made by hand\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    magic, arr = parse_netpbm(data)
    assert magic == "P6" and arr.tolist() == [[[1, 2, 3], [4, 5, 6]]]


def test_truncated_payload():
    with pytest.raises(FormatError, match="expected 6 bytes, got 3"):
        parse_netpbm(b"P6\n2 1\n255\n" + bytes(3))


def test_bad_header_and_maxval():
    with pytest.raises(FormatError, match="malformed header"):
        parse_netpbm(b"P7\n1 1\n255\n\x00")
    with pytest.raises(FormatError, match="maxval"):
        parse_netpbm(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(FormatError, match="width"):
        parse_netpbm(b"P5\nx 1\n255\n\x00")


def test_pbm_roundtrip():
    bits = np.array([[1, 0, 1], [0, 0, 1]], bool)
    magic, arr = parse_netpbm(encode_pbm(BoundaryMap(bits)))
    assert magic == "P1" and np.array_equal(arr, bits)


def test_label_text_roundtrip(tmp_path):
    lm = LabelMap(np.array([[1, 2, 2], [3, 3, 1]]))
    assert format_labels(lm) == "3 2\n1 2 2 3 3 1"
    assert parse_labels(format_labels(lm)) == lm
    with pytest.raises(FormatError):
        parse_labels("3 2\n1 2")


def test_mean_color_image():
    img = ImageBuffer(np.array([[10, 21, 200]], np.uint8))
    out = mean_color_image(img, LabelMap(np.array([[1, 1, 2]])))
    assert out.data[0, :, 0].tolist() == [16, 16, 200]  # 15.5 rounds up


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nr = 7\ntheta-p=20  # inline\n\n")
    assert read_config_file(p) == {"r": "7", "theta_p": "20"}
    p.write_text("nonsense\n")
    with pytest.raises(FormatError, match=":1:"):
        read_config_file(p)


@pytest.fixture
def band_files(tmp_path):
    img = ImageBuffer(oracles.band_image())
    save_image(img, tmp_path / "band.pgm")
    from coevoseg.bench import boundary_of
    save_pbm(boundary_of(LabelMap(oracles.band_truth())), tmp_path / "band_gt.pbm")
    return tmp_path


def test_cli_end_to_end(band_files, capsys):
    d = band_files
    (d / "run.cfg").write_text("r=9\ntheta_p=30\n")
    rc = main([
        "--input", str(d / "band.pgm"), "--output-prefix", str(d / "out" / "band"),
        "--config", str(d / "run.cfg"), "--theta-p", "17", "--gt", str(d / "band_gt.pbm"), "--seed", "3",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "3 regions" in out and "best F=" in out
    labels = load_labels(d / "out" / "band_labels.txt")
    assert labels.n_regions == 3
    report = json.loads((d / "out" / "band_report.json").read_text())
    assert report["config"]["theta_p"] == 17.0 and report["seed"] == 3
    assert report["best"]["F"] >= 0.95
    for suffix in ("_boundary.pbm", "_mean.ppm", "_original.pgm"):
        assert (d / "out" / ("band" + suffix)).exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["--input", str(tmp_path / "missing.pgm"), "--output-prefix", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("coevoseg: error:") and "missing.pgm" in err and err.count("\n") == 1
    (tmp_path / "a.pgm").write_bytes(b"P5\n2 2\n255\n\x00\x00\x00\x00")
    assert main(["--input", str(tmp_path / "a.pgm"), "--output-prefix", str(tmp_path / "x"),
                 "--lambda-l", "0.99"]) == 1
    assert "lambda_L" in capsys.readouterr().err


def test_console_script(band_files):
    proc = subprocess.run(
        [sys.executable, "-m", "coevoseg.cli", "--input", str(band_files / "band.pgm"),
         "--output-prefix", str(band_files / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (band_files / "o_labels.txt").exists()
