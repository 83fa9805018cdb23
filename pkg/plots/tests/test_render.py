"""Tests for the CSV-to-figure renderers."""

import numpy as np
import pytest
from PIL import Image

from ntkln_plots.cli import main
from ntkln_plots.render import PlotJob, SchemaError, heatmap_matrix, read_columns, render


def write_curve_csv(path, xs, means, cis):
    with open(path, "w", newline="\n") as fh:
        fh.write("x,mean,ci_half_width\n")
        for x, m, c in zip(xs, means, cis):
            fh.write(f"{x},{m},{c}\n")


def write_heatmap_csv(path, grid, mat):
    with open(path, "w", newline="\n") as fh:
        fh.write("x,x_prime,theta_mean,theta_std,n_seeds\n")
        for i, a in enumerate(grid):
            for j, b in enumerate(grid):
                fh.write(f"{a},{b},{mat[i, j]},0.0,5\n")


@pytest.fixture
def golden_curve(tmp_path):
    path = tmp_path / "curve.csv"
    xs = np.linspace(-3, 3, 3)
    write_curve_csv(path, xs, np.sin(xs), 0.1 * np.ones_like(xs))
    return path


@pytest.fixture
def golden_heatmap(tmp_path):
    path = tmp_path / "heat.csv"
    grid = np.array([-2.0, 0.0, 2.0])
    mat = np.array([[4.0, 1.0, -2.0], [1.0, 0.5, 1.0], [-2.0, 1.0, 4.0]])
    write_heatmap_csv(path, grid, mat)
    return path


class TestCurves:
    def test_golden_renders(self, golden_curve, tmp_path):
        out = tmp_path / "c.png"
        render(PlotJob(inputs=(str(golden_curve),), output=str(out),
                       kind="curves", labels=("demo",)))
        assert out.exists() and out.stat().st_size > 0

    def test_train_dots_overlay(self, golden_curve, tmp_path):
        train = tmp_path / "train.csv"
        train.write_text("x,y\n0.0,0.5\n1.0,-0.5\n")
        out = tmp_path / "c.png"
        render(PlotJob(inputs=(str(golden_curve),), output=str(out),
                       kind="curves", train_csv=str(train)))
        assert out.stat().st_size > 0

    def test_missing_column_names_it(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,value\n0,1\n")
        with pytest.raises(SchemaError, match="mean"):
            read_columns(str(bad), ("x", "mean", "ci_half_width"))

    def test_non_numeric_cell(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,mean,ci_half_width\n0,oops,0\n")
        with pytest.raises(SchemaError, match="mean"):
            read_columns(str(bad), ("x", "mean", "ci_half_width"))


class TestHeatmap:
    def test_matrix_assembly_symmetric(self, golden_heatmap):
        cols = read_columns(str(golden_heatmap), ("x", "x_prime", "theta_mean"))
        grid, mat = heatmap_matrix(cols)
        np.testing.assert_allclose(mat, mat.T)
        assert list(grid) == [-2.0, 0.0, 2.0]

    def test_golden_renders(self, golden_heatmap, tmp_path):
        out = tmp_path / "h.png"
        render(PlotJob(inputs=(str(golden_heatmap),), output=str(out),
                       kind="heatmap", labels=("demo",)))
        assert out.stat().st_size > 0

    def test_pixel_symmetry_bare_render(self, golden_heatmap, tmp_path):
        # Bare render: nothing but the matrix; a symmetric grid must give a
        # (transpose-mirrored) symmetric image up to the square crop.
        out = tmp_path / "h.png"
        render(PlotJob(inputs=(str(golden_heatmap),), output=str(out),
                       kind="heatmap", bare=True))
        img = np.asarray(Image.open(out).convert("L"), dtype=float)
        rows = np.where(img.std(axis=1) > 0)[0]
        cols = np.where(img.std(axis=0) > 0)[0]
        side = min(rows[-1] - rows[0], cols[-1] - cols[0]) + 1
        crop = img[rows[0]:rows[0] + side, cols[0]:cols[0] + side]
        # Matrix[i, j] == Matrix[j, i]; with origin='lower' the image is the
        # matrix flipped vertically, so compare against flip + transpose.
        mirrored = np.flipud(np.fliplr(crop).T)
        assert np.mean(np.abs(crop - mirrored)) < 2.0

    def test_incomplete_grid(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,x_prime,theta_mean,theta_std,n_seeds\n"
                       "0,0,1,0,5\n0,1,2,0,5\n1,0,2,0,5\n")
        cols = read_columns(str(bad), ("x", "x_prime", "theta_mean"))
        with pytest.raises(SchemaError, match="grid"):
            heatmap_matrix(cols)


class TestOtherKinds:
    def test_variance(self, tmp_path):
        src = tmp_path / "v.csv"
        src.write_text("norm,theta_xx\n1,3.0\n10,3.1\n100,3.1\n")
        out = tmp_path / "v.png"
        render(PlotJob(inputs=(str(src),), output=str(out), kind="variance"))
        assert out.stat().st_size > 0

    def test_homogeneity(self, tmp_path):
        src = tmp_path / "h.csv"
        src.write_text("lambda,ratio\n100,2.0\n1000,2.01\n")
        out = tmp_path / "h.png"
        render(PlotJob(inputs=(str(src),), output=str(out), kind="homogeneity"))
        assert out.stat().st_size > 0


class TestCli:
    def test_curves_cli(self, golden_curve, tmp_path):
        out = tmp_path / "o.png"
        code = main(["--kind", "curves", "--input", str(golden_curve),
                     "--label", "gp", "--output", str(out)])
        assert code == 0
        assert out.exists()

    def test_missing_column_exit_and_message(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,wrong\n0,1\n")
        out = tmp_path / "o.png"
        code = main(["--kind", "curves", "--input", str(bad),
                     "--output", str(out)])
        assert code == 2
        err = capsys.readouterr().err
        assert "mean" in err

    def test_deterministic_output(self, golden_curve, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        for out in (a, b):
            assert main(["--kind", "curves", "--input", str(golden_curve),
                         "--output", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_kind_exits_2(self, golden_curve, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["--kind", "sparkline", "--input", str(golden_curve),
                  "--output", str(tmp_path / "o.png")])
        assert exc.value.code == 2
