import csv
import shutil

import pytest

from figurekit import FigureInputError, RenderResult, render
from figurekit.cli import main


def exponent_strings(path, observables=None):
    """The verbatim exponent strings from an exponents CSV."""
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if observables is None:
        return [r["exponent"] for r in rows]
    return [r["exponent"] for r in rows if r["observable"] in observables]


# ---------------------------------------------------------------------------
# every figure renders from real CLI outputs

def test_f1_renders_a_price_series(run_dir, tmp_path):
    result = render("f1", run_dir, tmp_path / "f1.png")
    assert isinstance(result, RenderResult)
    assert (tmp_path / "f1.png").stat().st_size > 0


def test_f9_renders_grouped_sign_frequencies(run_dir, tmp_path):
    result = render("f9", run_dir, tmp_path / "f9.png")
    assert (tmp_path / "f9.png").stat().st_size > 0
    assert result.annotations == ()


@pytest.mark.parametrize("figure_id", ["f4", "f5", "f6"])
def test_scaling_figures_render(sweep_dir, tmp_path, figure_id):
    result = render(figure_id, sweep_dir, tmp_path / f"{figure_id}.png")
    assert (tmp_path / f"{figure_id}.png").stat().st_size > 0
    if figure_id in ("f4", "f5"):
        # sigma2/H/K always fit; a wealth fit needs positive means, which a
        # short smoke sweep does not guarantee
        assert result.annotations


def test_f11_renders_washout_times(washout_dir, tmp_path):
    result = render("f11", washout_dir, tmp_path / "f11.png")
    assert (tmp_path / "f11.png").stat().st_size > 0
    assert len(result.annotations) == 3  # one fit per washout fraction


# ---------------------------------------------------------------------------
# annotations quote the exponent tables verbatim

def test_f4_annotations_match_the_exponent_tables(sweep_dir, tmp_path):
    result = render("f4", sweep_dir, tmp_path / "f4.png")
    expected = set()
    for impact in ("linear", "sqrt"):
        expected |= set(exponent_strings(sweep_dir / f"exponents_{impact}.csv",
                                         {"sigma2", "H"}))
    quoted = {a.split("N^", 1)[1] for a in result.annotations}
    assert quoted == expected


def test_f6_annotation_matches_the_wealth_exponent(sweep_dir, tmp_path):
    result = render("f6", sweep_dir, tmp_path / "f6.png")
    expected = set(exponent_strings(sweep_dir / "exponents_sqrt.csv",
                                    {"mean_wealth"}))
    quoted = {a.split("N^", 1)[1] for a in result.annotations}
    assert quoted == expected


def test_f11_annotations_match_the_washout_exponents(washout_dir, tmp_path):
    result = render("f11", washout_dir, tmp_path / "f11.png")
    with (washout_dir / "exponents_washout.csv").open(newline="") as fh:
        expected = {r["exponent"] for r in csv.DictReader(fh)}
    quoted = {a.split("N^", 1)[1] for a in result.annotations}
    assert quoted == expected


# ---------------------------------------------------------------------------
# error reporting and invariants

def test_missing_column_is_named(sweep_dir, tmp_path):
    broken = tmp_path / "broken"
    shutil.copytree(sweep_dir, broken)
    path = broken / "summary_sqrt.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    drop = header.index("H")
    rewritten = [",".join(v for i, v in enumerate(line.split(",")) if i != drop)
                 for line in lines]
    path.write_text("\n".join(rewritten) + "\n", encoding="utf-8")
    with pytest.raises(FigureInputError, match="summary_sqrt.csv.*H"):
        render("f4", broken, tmp_path / "f4.png")


def test_missing_file_is_named(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(FigureInputError, match="series.csv"):
        render("f1", empty, tmp_path / "f1.png")


def test_unknown_figure_id_is_rejected(run_dir, tmp_path):
    with pytest.raises(FigureInputError, match="f99"):
        render("f99", run_dir, tmp_path / "x.png")


def test_rendering_is_deterministic_and_read_only(run_dir, tmp_path):
    before = {p.name: p.read_bytes() for p in run_dir.iterdir()}
    render("f9", run_dir, tmp_path / "a.png")
    render("f9", run_dir, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    after = {p.name: p.read_bytes() for p in run_dir.iterdir()}
    assert before == after


def test_svg_output_is_deterministic(run_dir, tmp_path):
    render("f1", run_dir, tmp_path / "a.svg")
    render("f1", run_dir, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


# ---------------------------------------------------------------------------
# command line

def test_cli_renders_and_reports_annotations(sweep_dir, tmp_path, capsys):
    out = tmp_path / "f4.png"
    assert main(["f4", str(sweep_dir), str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "wrote f4" in stdout
    assert "N^" in stdout
    assert out.exists()


def test_cli_reports_input_errors(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["f1", str(empty), str(tmp_path / "x.png")]) == 2
    assert "series.csv" in capsys.readouterr().err
