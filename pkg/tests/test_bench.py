import csv
import json

import numpy as np
import pytest

from spectralweak import bench
from spectralweak.dataset import pairwise_distances
from spectralweak.errors import MissingDataError, ParseError
from spectralweak.weakanno import SynthBagsConfig


# ---------------------------------------------------------------------------
# fetch instructions and gating

def test_fetch_instructions_name_files_and_host():
    text = bench.fetch_instructions("banknotes", "some/dir")
    assert "banknote.csv" in text
    assert "some/dir" in text
    assert "vincentarelbundock.github.io" in text
    seg = bench.fetch_instructions("segmentation")
    assert "segmentation.data" in seg and "segmentation.test" in seg
    assert "archive.ics.uci.edu" in seg
    with pytest.raises(ParseError):
        bench.fetch_instructions("iris")


def test_missing_files_raise_with_instructions(tmp_path):
    for name, loader in bench.BENCH_LOADERS.items():
        with pytest.raises(MissingDataError) as err:
            loader(tmp_path)
        assert "curl" in str(err.value)
        assert str(tmp_path) in str(err.value)


# ---------------------------------------------------------------------------
# loaders on synthetic stand-in files

def write_fake_banknotes(path, n_per_class=100, sep=3.0, spread=0.2, rownames=True):
    rng = np.random.default_rng(0)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        header = ["Status", "Length", "Left", "Right", "Bottom", "Top", "Diagonal"]
        if rownames:
            header = ["rownames"] + header
        w.writerow(header)
        for i in range(n_per_class):
            row = ["genuine", *np.round(rng.normal(0.0, spread, 6), 4)]
            w.writerow(([i + 1] + row) if rownames else row)
        for i in range(n_per_class):
            row = ["counterfeit", *np.round(rng.normal(sep, spread, 6), 4)]
            w.writerow(([i + 101] + row) if rownames else row)


def test_banknotes_loader_accepts_both_layouts(tmp_path):
    write_fake_banknotes(tmp_path / "banknote.csv")
    ds = bench.load_banknotes(tmp_path)
    assert len(ds.instances) == 200
    assert ds.instances[0].features.shape == (6,)
    assert sorted(ds.labels) == ["counterfeit", "genuine"]
    assert ds.strong_label == "counterfeit"
    assert all(len(b.members) == 1 for b in ds.bags)

    bare = tmp_path / "bare"
    bare.mkdir()
    write_fake_banknotes(bare / "banknote.csv", rownames=False)
    ds2 = bench.load_banknotes(bare)
    assert np.array_equal(ds2.feature_matrix(), ds.feature_matrix())


def test_banknotes_loader_validates_shape(tmp_path):
    write_fake_banknotes(tmp_path / "banknote.csv", n_per_class=99)
    with pytest.raises(ParseError, match="expected 200 rows"):
        bench.load_banknotes(tmp_path)

    two_labels = tmp_path / "two"
    two_labels.mkdir()
    with (two_labels / "banknote.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Status", "Grade", "a", "b", "c", "d", "e"])
        for i in range(200):
            w.writerow(["genuine" if i < 100 else "fake", "x", 1, 2, 3, 4, 5])
    with pytest.raises(ParseError, match="non-numeric"):
        bench.load_banknotes(two_labels)


def write_fake_segmentation(d, n_train=210, n_test=2100):
    classes = ["SKY", "CEMENT", "WINDOW", "BRICKWORK", "FOLIAGE", "PATH", "GRASS"]
    rng = np.random.default_rng(1)

    def rows(n, path):
        with path.open("w") as fh:
            fh.write(";;; header junk\nCLASS LIST\n\n")
            for i in range(n):
                label = classes[i % 7]
                vals = np.round(rng.normal(classes.index(label), 0.5, 19), 3)
                fh.write(label + "," + ",".join(str(float(v)) for v in vals) + "\n")

    rows(n_train, d / "segmentation.data")
    rows(n_test, d / "segmentation.test")


def test_segmentation_loader_skips_headers_and_counts(tmp_path):
    write_fake_segmentation(tmp_path)
    ds = bench.load_segmentation(tmp_path)
    assert len(ds.instances) == 2310
    assert ds.instances[0].features.shape == (19,)
    assert len(ds.labels) == 7

    short = tmp_path / "short"
    short.mkdir()
    write_fake_segmentation(short, n_test=2000)
    with pytest.raises(ParseError, match="expected 2310"):
        bench.load_segmentation(short)


def write_fake_abalone(path, n=4177):
    rng = np.random.default_rng(2)
    with path.open("w") as fh:
        for i in range(n):
            sex = "MFI"[i % 3]
            vals = np.round(rng.uniform(0.05, 1.0, 7), 4)
            rings = int(rng.integers(1, 25))
            fh.write(sex + "," + ",".join(str(float(v)) for v in vals) + f",{rings}\n")


def test_abalone_loader_dummies_and_ring_clipping(tmp_path):
    write_fake_abalone(tmp_path / "abalone.data")
    ds = bench.load_abalone(tmp_path)
    assert len(ds.instances) == 4177
    assert ds.instances[0].features.shape == (9,)
    labels = set(ds.labels)
    assert labels <= {f"r{r:02d}" for r in range(4, 14)}
    assert "r04" in labels and "r13" in labels
    # sex dummies: M -> (1,0), F -> (0,1), I -> (0,0)
    assert ds.instances[0].features[0] == 1.0 and ds.instances[0].features[1] == 0.0
    assert ds.instances[1].features[0] == 0.0 and ds.instances[1].features[1] == 1.0
    assert ds.instances[2].features[0] == 0.0 and ds.instances[2].features[1] == 0.0


def test_abalone_loader_reports_bad_lines(tmp_path):
    path = tmp_path / "abalone.data"
    path.write_text("M,0.1,0.2,0.3,0.4,0.5,0.6,0.7,9\nX,0.1,0.2,0.3,0.4,0.5,0.6,0.7,9\n")
    with pytest.raises(ParseError, match=":2: sex must be"):
        bench.load_abalone(tmp_path)
    path.write_text("M,0.1,0.2,9\n")
    with pytest.raises(ParseError, match=":1: expected 9 fields"):
        bench.load_abalone(tmp_path)


# ---------------------------------------------------------------------------
# bundled toy dataset and sweep helpers

def test_dataset_a_shape():
    ds = bench.load_dataset_a()
    assert len(ds.instances) == 26
    assert ds.instances[0].features.shape == (2,)
    assert len(ds.labels) == 2
    assert all(len(b.members) == 1 for b in ds.bags)


def test_partition_matches_ignores_names():
    a = np.array(["x", "x", "y", "y"])
    b = np.array([7, 7, 3, 3])
    c = np.array([7, 3, 3, 7])
    assert bench.partition_matches(a, b)
    assert not bench.partition_matches(a, c)
    with pytest.raises(ParseError):
        bench.partition_matches(a, b[:3])


def test_epsilon_sweep_grid_brackets_all_behaviour():
    dist = pairwise_distances(np.array([[0.0], [1.0], [3.0]]))
    grid = bench.epsilon_sweep_grid(dist)
    # distinct distances 1, 2, 3 -> below-min, three midpoints, above-max
    assert grid == (0.5, 1.5, 2.5, pytest.approx(3.3))


# ---------------------------------------------------------------------------
# report mechanics

def test_check_lines_and_report_gating():
    hard_pass = bench.BenchCheck("a", "hard", True, value=1.0, target="x >= 1")
    soft_miss = bench.BenchCheck("b", "soft", False, value=0.5, target="x >= 1", detail="close")
    hard_fail = bench.BenchCheck("c", "hard", False)
    assert hard_pass.line() == "[PASS] a value=1 target: x >= 1"
    assert soft_miss.line() == "[MISS] b value=0.5 target: x >= 1 (close)"
    assert hard_fail.line() == "[FAIL] c"

    report = bench.BenchReport("demo", (hard_pass, soft_miss), 1.0)
    assert report.passed
    assert report.lines()[-1] == "suite demo: PASS"
    failing = bench.BenchReport("demo", (hard_pass, hard_fail), 1.0)
    assert not failing.passed

    payload = report.to_json_dict()
    assert set(payload) == {"suite", "passed", "checks"}
    json.dumps(payload)


def test_report_rows_csv(tmp_path):
    report = bench.BenchReport(
        "demo", (), 0.0, rows=({"a": 1, "b": "x"}, {"a": 2, "b": "y"})
    )
    path = tmp_path / "rows.csv"
    report.write_rows_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1:] == ["1,x", "2,y"]
    empty = bench.BenchReport("demo", (), 0.0)
    empty.write_rows_csv(tmp_path / "none.csv")
    assert not (tmp_path / "none.csv").exists()


# ---------------------------------------------------------------------------
# suites

def test_table1_banknotes_on_standin_data(tmp_path):
    write_fake_banknotes(tmp_path / "banknote.csv")
    report = bench.table1(tmp_path, datasets=("banknotes",))
    assert report.suite == "table1"
    assert len(report.checks) == 4
    assert all(c.kind == "hard" for c in report.checks)
    assert report.passed
    names = [c.name for c in report.checks]
    assert "banknotes prob_threshold min" in names
    assert "banknotes prob_criterion max" in names
    row = report.rows[0]
    assert set(row) == {"dataset", "model", "symmetrize", "w_thresh", "sigma", "objective", "error"}


def test_table2synth_small_run():
    config = SynthBagsConfig(bags_per_class=6, disordered_bag_size=(8, 12))
    report = bench.table2synth(seeds=(0, 1), config=config)
    assert report.suite == "table2synth"
    assert len(report.rows) == 2
    assert report.passed
    for row in report.rows:
        assert set(row) == {"seed", "weak_accuracy", "baseline_accuracy", "gap", "agreement", "win"}
        assert row["gap"] == pytest.approx(row["weak_accuracy"] - row["baseline_accuracy"])
    (check,) = report.checks
    assert check.kind == "hard"
    assert "2/2 seeds" in check.name


def test_toyfig_suite_passes():
    report = bench.toyfig()
    assert report.passed
    assert report.suite == "toyfig"
    families = {row["family"] for row in report.rows}
    assert families == {"epsilon", "knn_symmetric", "knn_mutual", "prob_threshold"}
    names = " ".join(c.name for c in report.checks)
    assert "planted" in names and "reference" in names


def test_run_suite_dispatch(tmp_path):
    report = bench.run_suite("toyfig")
    assert report.suite == "toyfig"
    with pytest.raises(ParseError, match="unknown suite"):
        bench.run_suite("table9")
    with pytest.raises(MissingDataError):
        bench.run_suite("table1", data_dir=tmp_path)
