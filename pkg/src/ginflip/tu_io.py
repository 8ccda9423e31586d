"""Reader and writer for the TUDataset flat-file layout.

Layout (1-indexed, one record per line, comma or whitespace separated):
  <name>_A.txt               edge list "i, j" over global node ids
  <name>_graph_indicator.txt graph id of each global node
  <name>_graph_labels.txt    one label per graph
  <name>_node_labels.txt     optional, one label per node

The reader tolerates CR/LF and blank lines; the writer emits LF endings and
lists every undirected edge in both directions (the collection's convention).
Edge-label and node-attribute files are ignored: only discrete node labels
feed the models.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DataFormatError, GraphConsistencyError, UnsupportedFormatError
from .graphs import MISSING_TARGET, Dataset, LabeledGraph


def _read_int_rows(path: str, expected_cols: int) -> list[tuple[int, ...]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.replace(",", " ").strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != expected_cols:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {expected_cols} fields, got {len(parts)}"
                )
            try:
                rows.append(tuple(int(p) for p in parts))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return rows


def load_tu_dataset(directory_path: str, name: str) -> Dataset:
    """Load a TU-layout dataset from ``directory_path``.

    Nodes are re-indexed from 0 within each graph (ascending global id),
    edges deduplicated as undirected pairs, node labels densified preserving
    sorted original order (all 0 when the node-label file is absent), and
    graph labels remapped to 0..C-1 preserving sorted original order.
    Two distinct labels load as a binary-single task; otherwise multiclass.
    """

    def p(suffix):
        return os.path.join(directory_path, f"{name}_{suffix}.txt")

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not os.path.isfile(p(suffix)):
            raise DataFormatError(f"missing mandatory file {p(suffix)}")

    indicator = [r[0] for r in _read_int_rows(p("graph_indicator"), 1)]
    graph_labels_raw = [r[0] for r in _read_int_rows(p("graph_labels"), 1)]
    edges_raw = _read_int_rows(p("A"), 2)

    num_nodes = len(indicator)
    num_graphs = len(graph_labels_raw)
    if num_graphs == 0:
        raise DataFormatError(f"{p('graph_labels')}: no graphs")
    if any(g < 1 or g > num_graphs for g in indicator):
        raise GraphConsistencyError("graph_indicator references an unknown graph")

    if os.path.isfile(p("node_labels")):
        node_labels_raw = [r[0] for r in _read_int_rows(p("node_labels"), 1)]
        if len(node_labels_raw) != num_nodes:
            raise DataFormatError(
                f"{p('node_labels')}: {len(node_labels_raw)} labels for {num_nodes} nodes"
            )
        label_values = sorted(set(node_labels_raw))
        label_map = {v: i for i, v in enumerate(label_values)}
        node_labels = [label_map[v] for v in node_labels_raw]
        alphabet = len(label_values)
    else:
        node_labels = [0] * num_nodes
        alphabet = 1

    # Global node id -> (graph index, local node index).
    local_index = [0] * num_nodes
    graph_sizes = [0] * num_graphs
    for gid_global, gid in enumerate(indicator):
        g = gid - 1
        local_index[gid_global] = graph_sizes[g]
        graph_sizes[g] += 1

    per_graph_edges: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for i, j in edges_raw:
        if not (1 <= i <= num_nodes and 1 <= j <= num_nodes):
            raise GraphConsistencyError(f"edge ({i}, {j}) references a node outside the dataset")
        gi, gj = indicator[i - 1] - 1, indicator[j - 1] - 1
        if gi != gj:
            raise GraphConsistencyError(f"edge ({i}, {j}) crosses graphs {gi + 1} and {gj + 1}")
        u, v = local_index[i - 1], local_index[j - 1]
        if u == v:
            raise GraphConsistencyError(f"self-loop at global node {i}")
        per_graph_edges[gi].add((min(u, v), max(u, v)))

    per_graph_labels: list[list[int]] = [[] for _ in range(num_graphs)]
    for gid_global, gid in enumerate(indicator):
        per_graph_labels[gid - 1].append(node_labels[gid_global])

    graphs = tuple(
        LabeledGraph(graph_sizes[g], tuple(sorted(per_graph_edges[g])), tuple(per_graph_labels[g]))
        for g in range(num_graphs)
    )

    class_values = sorted(set(graph_labels_raw))
    class_map = {v: i for i, v in enumerate(class_values)}
    remapped = np.asarray([[class_map[v]] for v in graph_labels_raw], dtype=np.int64)
    if len(class_values) == 2:
        return Dataset(graphs, remapped, "binary-single", alphabet, None)
    return Dataset(graphs, remapped, "multiclass", alphabet, len(class_values))


def write_tu_dataset(dataset: Dataset, directory_path: str, name: str) -> None:
    """Write ``dataset`` in the TU flat-file layout accepted by the loader.

    The layout stores one label per graph, so binary-multi datasets (and
    binary datasets containing missing targets) are not representable.
    """
    if dataset.task_kind == "binary-multi":
        raise UnsupportedFormatError("TU layout stores one label per graph")
    if (dataset.targets == MISSING_TARGET).any():
        raise UnsupportedFormatError("TU layout cannot represent missing targets")

    os.makedirs(directory_path, exist_ok=True)

    def p(suffix):
        return os.path.join(directory_path, f"{name}_{suffix}.txt")

    offsets = []
    total = 0
    for g in dataset.graphs:
        offsets.append(total)
        total += g.node_count

    with open(p("A"), "w", encoding="utf-8", newline="\n") as fh:
        for g, off in zip(dataset.graphs, offsets):
            directed = sorted(
                [(u + off + 1, v + off + 1) for u, v in g.edges]
                + [(v + off + 1, u + off + 1) for u, v in g.edges]
            )
            for i, j in directed:
                fh.write(f"{i}, {j}\n")

    with open(p("graph_indicator"), "w", encoding="utf-8", newline="\n") as fh:
        for gi, g in enumerate(dataset.graphs, start=1):
            for _ in range(g.node_count):
                fh.write(f"{gi}\n")

    with open(p("graph_labels"), "w", encoding="utf-8", newline="\n") as fh:
        for row in dataset.targets:
            fh.write(f"{int(row[0])}\n")

    has_labels = any(any(l != 0 for l in g.node_labels) for g in dataset.graphs)
    if has_labels or dataset.label_alphabet_size > 1:
        with open(p("node_labels"), "w", encoding="utf-8", newline="\n") as fh:
            for g in dataset.graphs:
                for l in g.node_labels:
                    fh.write(f"{l}\n")
