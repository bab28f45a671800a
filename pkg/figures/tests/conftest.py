import csv
import math

import pytest


@pytest.fixture
def write_csv():
    def _write(path, header, rows):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)

    return _write


@pytest.fixture
def sweep_dir(tmp_path, write_csv):
    d = tmp_path / "sweep"
    d.mkdir()
    ts = [4, 8, 16, 32, 64]
    write_csv(
        d / "best_series.csv",
        ["t", "mean_reward"],
        [[t, repr(0.4 + 0.05 * i)] for i, t in enumerate(ts)],
    )
    write_csv(
        d / "envelope_series.csv",
        ["t", "max_mean_reward"],
        [[t, repr(0.45 + 0.05 * i)] for i, t in enumerate(ts)],
    )
    return d


@pytest.fixture
def aggregate_dir(tmp_path, write_csv):
    d = tmp_path / "aggregate"
    d.mkdir()
    write_csv(
        d / "losses.csv",
        ["algorithm", "dataset", "loss"],
        [
            ["alpha", "ds-a", "0.0"],
            ["beta", "ds-a", "1.0"],
            ["alpha", "ds-b", "0.25"],
            ["beta", "ds-b", "0.0"],
            ["alpha", "ds-c", "0.0"],
            ["beta", "ds-c", "1.0"],
        ],
    )
    write_csv(
        d / "cdf.csv",
        ["algorithm", "x", "count"],
        [
            ["alpha", "0.0", "2"],
            ["alpha", "0.25", "3"],
            ["alpha", "0.99", "3"],
            ["beta", "0.0", "1"],
            ["beta", "0.99", "1"],
            ["beta", "1.0", "3"],
        ],
    )
    return d


@pytest.fixture
def diag_dir(tmp_path, write_csv):
    d = tmp_path / "diag"
    d.mkdir()
    slope, intercept = -0.5432109, 0.3
    rows = []
    for t in range(2, 102):
        w = math.exp(intercept) * t**slope
        rows.append([t, repr(w), repr(w)])
    write_csv(d / "width_series.csv", ["t", "width", "smoothed"], rows)
    write_csv(
        d / "slope.csv",
        ["series", "slope", "intercept", "n_used", "n_dropped"],
        [["width", repr(slope), repr(intercept), 100, 0]],
    )
    dis_rows = []
    for t in range(2, 102):
        size = float(max(1, 4 - t // 30))
        dis_rows.append([t, repr(size), repr(size)])
    write_csv(d / "disagreement_series.csv", ["t", "size", "smoothed"], dis_rows)
    return d
