import subprocess
import sys

import pytest

from podrom_plots import FigureSpec, InputError, render

SMOKE_CONFIG = """
problem = heat
n = 6
T_span = 0.05
step = 0.002
grid.M = 4
rom.r = 2
sampling.density = 64
horizon.periods = 1
"""


@pytest.fixture(scope="session")
def smoke_run(tmp_path_factory):
    """CSV artifacts from a real solver smoke run, via the solver CLI."""
    outdir = tmp_path_factory.mktemp("smoke")
    cfg = outdir / "smoke.cfg"
    cfg.write_text(SMOKE_CONFIG)
    subprocess.run(
        [sys.executable, "-m", "podrom.harness.cli", "experiment",
         "--config", str(cfg), "--out", str(outdir)],
        check=True, capture_output=True,
    )
    return outdir


def test_error_series_png(smoke_run, tmp_path):
    out = tmp_path / "errors.png"
    render(FigureSpec(kind="error_series",
                      inputs=(str(smoke_run / "errors.csv"),),
                      output=str(out)))
    assert out.exists()
    assert out.stat().st_size > 1024


def test_sv_decay_with_threshold(smoke_run, tmp_path):
    out = tmp_path / "eigs.png"
    render(FigureSpec(kind="sv_decay",
                      inputs=(str(smoke_run / "eigs.csv"),),
                      output=str(out), threshold=0.0273))
    assert out.stat().st_size > 1024


def test_table_html(smoke_run, tmp_path):
    out = tmp_path / "summary.html"
    render(FigureSpec(kind="table",
                      inputs=(str(smoke_run / "summary.csv"),),
                      output=str(out)))
    html = out.read_text()
    for fragment in ("max |u_h - u_r|_0", "max |u_h - P u_h|_0",
                     "max |grad(u_h - u_r)|_0", "max |grad(I - P)u_h|_0"):
        assert fragment in html
    assert "<table>" in html


def test_rendering_is_deterministic(smoke_run, tmp_path):
    blobs = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        render(FigureSpec(kind="error_series",
                          inputs=(str(smoke_run / "errors.csv"),),
                          output=str(out)))
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]

    htmls = []
    for name in ("a.html", "b.html"):
        out = tmp_path / name
        render(FigureSpec(kind="table",
                          inputs=(str(smoke_run / "summary.csv"),),
                          output=str(out)))
        htmls.append(out.read_bytes())
    assert htmls[0] == htmls[1]


def test_single_eigenvalue_decay(tmp_path):
    csv = tmp_path / "eigs.csv"
    csv.write_text("k,lambda,sigma,tail\n1,4.0,2.0,0.0\n")
    out = tmp_path / "one.png"
    render(FigureSpec(kind="sv_decay", inputs=(str(csv),), output=str(out)))
    assert out.stat().st_size > 1024


def test_multiple_decay_inputs(tmp_path):
    paths = []
    for m, lam in (("32", 4.0), ("64", 2.0)):
        p = tmp_path / f"eigs_M{m}.csv"
        p.write_text(f"k,lambda,sigma,tail\n1,{lam},{lam ** 0.5},0.1\n2,0.1,0.3,0.0\n")
        paths.append(str(p))
    out = tmp_path / "multi.png"
    render(FigureSpec(kind="sv_decay", inputs=tuple(paths), output=str(out),
                      threshold=0.5))
    assert out.stat().st_size > 1024


def test_missing_file_and_missing_column(tmp_path):
    with pytest.raises(InputError, match="does not exist"):
        render(FigureSpec(kind="sv_decay", inputs=(str(tmp_path / "no.csv"),),
                          output=str(tmp_path / "x.png")))
    bad = tmp_path / "bad.csv"
    bad.write_text("k,lambda,tail\n1,2,0\n")
    with pytest.raises(InputError, match="sigma"):
        render(FigureSpec(kind="sv_decay", inputs=(str(bad),),
                          output=str(tmp_path / "x.png")))


def test_non_numeric_entry(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("k,lambda,sigma,tail\n1,two,3,0\n")
    with pytest.raises(InputError, match="non-numeric"):
        render(FigureSpec(kind="sv_decay", inputs=(str(bad),),
                          output=str(tmp_path / "x.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(InputError):
        FigureSpec(kind="pie", inputs=("x.csv",), output="x.png")


def test_cli_render(smoke_run, tmp_path):
    out = tmp_path / "cli.png"
    proc = subprocess.run(
        [sys.executable, "-m", "podrom_plots.cli", "render",
         "--kind", "sv_decay", "--in", str(smoke_run / "eigs.csv"),
         "--out", str(out), "--threshold", "0.0273"],
        check=True, capture_output=True, text=True,
    )
    assert "wrote" in proc.stdout
    assert out.stat().st_size > 1024
