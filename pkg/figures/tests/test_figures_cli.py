import pytest

from regcb_figures.cli import main


def test_cli_renders_each_kind(sweep_dir, aggregate_dir, diag_dir, tmp_path, capsys):
    for kind, in_dir in (
        ("performance", sweep_dir),
        ("cdf", aggregate_dir),
        ("width", diag_dir),
    ):
        out = tmp_path / f"{kind}.png"
        assert main([kind, "--in", str(in_dir), "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 0
        assert kind in capsys.readouterr().out


def test_cli_schema_mismatch_exits_2_listing_columns(write_csv, tmp_path, capsys):
    d = tmp_path / "aggregate"
    d.mkdir()
    write_csv(d / "losses.csv", ["algorithm", "name", "score"], [["alpha", "a", "0"]])
    write_csv(d / "cdf.csv", ["algorithm", "x", "count"], [["alpha", "0.0", "1"]])
    rc = main(["cdf", "--in", str(d), "--out", str(tmp_path / "cdf.png")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "missing columns" in err
    assert "dataset" in err and "loss" in err


def test_cli_missing_input_file_exits_2(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    rc = main(["cdf", "--in", str(d), "--out", str(tmp_path / "cdf.png")])
    assert rc == 2
    assert "losses.csv" in capsys.readouterr().err


def test_cli_rejects_unknown_kind():
    with pytest.raises(SystemExit) as exc:
        main(["histogram", "--in", "x", "--out", "y.png"])
    assert exc.value.code == 2


def test_cli_reruns_are_byte_identical(diag_dir, tmp_path):
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    assert main(["width", "--in", str(diag_dir), "--out", str(out_a)]) == 0
    assert main(["width", "--in", str(diag_dir), "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
