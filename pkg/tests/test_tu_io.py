"""TU flat-file reader/writer: round trips, tolerance, and golden files."""

import os

import numpy as np
import pytest

from ginflip.errors import (
    DataFormatError,
    GraphConsistencyError,
    UnsupportedFormatError,
)
from ginflip.graphs import MISSING_TARGET, Dataset, LabeledGraph, gen_wl_task
from ginflip.tu_io import load_tu_dataset, write_tu_dataset

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "data", "golden_tu")


def triangle_path_fixture() -> Dataset:
    triangle = LabeledGraph(3, ((0, 1), (1, 2), (0, 2)), (0, 1, 0))
    path = LabeledGraph(4, ((0, 1), (1, 2), (2, 3)), (1, 1, 0, 0))
    return Dataset(
        (triangle, path), np.array([[0], [1]]), "binary-single", 2
    )


def test_two_triangles_smallest_wellformed(tmp_path):
    d = tmp_path / "tiny"
    d.mkdir()
    (d / "tiny_A.txt").write_text(
        "1, 2\n2, 3\n1, 3\n4, 5\n5, 6\n4, 6\n", encoding="utf-8"
    )
    (d / "tiny_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n2\n")
    (d / "tiny_graph_labels.txt").write_text("1\n2\n")
    ds = load_tu_dataset(str(d), "tiny")
    assert ds.num_graphs == 2
    assert ds.task_kind == "binary-single"
    assert list(ds.targets[:, 0]) == [0, 1]
    assert all(g.node_labels == (0, 0, 0) for g in ds.graphs)


def test_reverse_duplicate_edges_collapse(tmp_path):
    d = tmp_path / "dup"
    d.mkdir()
    (d / "dup_A.txt").write_text("1, 2\n2, 1\n")
    (d / "dup_graph_indicator.txt").write_text("1\r\n1\r\n")  # CR/LF tolerated
    (d / "dup_graph_labels.txt").write_text("0\n1\n")  # second graph is empty
    ds = load_tu_dataset(str(d), "dup")
    assert ds.graphs[0].edges == ((0, 1),)


def test_missing_file_and_consistency_errors(tmp_path):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "bad_A.txt").write_text("1, 2\n")
    (d / "bad_graph_indicator.txt").write_text("1\n2\n")
    with pytest.raises(DataFormatError):
        load_tu_dataset(str(d), "bad")  # graph_labels missing
    (d / "bad_graph_labels.txt").write_text("0\n1\n")
    with pytest.raises(GraphConsistencyError):
        load_tu_dataset(str(d), "bad")  # edge crosses graphs


def test_single_node_empty_edges(tmp_path):
    ds = Dataset((LabeledGraph(1, (), (0,)),), np.array([[0]]), "multiclass", 1, 1)
    write_tu_dataset(ds, str(tmp_path), "one")
    assert (tmp_path / "one_A.txt").read_text() == ""
    assert (tmp_path / "one_graph_indicator.txt").read_text() == "1\n"
    assert (tmp_path / "one_graph_labels.txt").read_text() == "0\n"


def test_write_rejects_unrepresentable():
    g = LabeledGraph(1, (), (0,))
    multi = Dataset((g,), np.array([[0, 1]]), "binary-multi", 1)
    with pytest.raises(UnsupportedFormatError):
        write_tu_dataset(multi, "/tmp/never", "x")
    holed = Dataset((g,), np.array([[MISSING_TARGET]]), "binary-single", 1)
    with pytest.raises(UnsupportedFormatError):
        write_tu_dataset(holed, "/tmp/never", "x")


def test_synthetic_round_trip_bit_exact(tmp_path):
    for family, lo in (("cycles-vs-paths", 3), ("tree-depth", 4)):
        ds = gen_wl_task(family, 6, (lo, lo + 5), seed=13)
        out = tmp_path / family
        write_tu_dataset(ds, str(out), "synth")
        again = load_tu_dataset(str(out), "synth")
        assert again == ds


def test_labeled_round_trip(tmp_path):
    ds = triangle_path_fixture()
    write_tu_dataset(ds, str(tmp_path), "fix")
    again = load_tu_dataset(str(tmp_path), "fix")
    assert again == ds


def test_write_matches_golden_files(tmp_path):
    # Golden bytes were produced once by this writer and frozen; any change
    # to the on-disk layout must be deliberate.
    ds = triangle_path_fixture()
    write_tu_dataset(ds, str(tmp_path), "golden")
    for suffix in ("A", "graph_indicator", "graph_labels", "node_labels"):
        fresh = (tmp_path / f"golden_{suffix}.txt").read_bytes()
        frozen = open(os.path.join(GOLDEN_DIR, f"golden_{suffix}.txt"), "rb").read()
        assert fresh == frozen, f"golden_{suffix}.txt drifted"
