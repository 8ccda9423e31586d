"""1-WL color refinement, unfolding trees, multiset Jaccard, and the
within-class Jaccard statistic used to characterize how strongly class
membership correlates with graph structure.

Color refinement realizes the hash injectively by handing out consecutive
integer ids in first-occurrence order; the iteration order over (graph index,
node index) is fixed, so colorings are canonical and comparable across all
graphs colored in one call.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StatisticsError
from .graphs import MISSING_TARGET, Dataset, LabeledGraph
from .rng import SplitMix64, derive_seed


class WLPalette:
    """Shared color tables of one joint refinement.

    ``label_map`` densifies the input labels for round 0; ``round_maps[t]``
    maps (previous color, sorted neighbor-color tuple) to the round-(t+1)
    color id.  Ids restart at 0 each round; colors are only comparable
    within a round, which is all the multiset statistics need.
    """

    def __init__(self):
        self.label_map: dict[int, int] = {}
        self.round_maps: list[dict[tuple, int]] = []


@dataclass
class WLColoring:
    """Per-node colors of one graph for rounds 0..k under a shared palette."""

    rounds: list[np.ndarray]
    palette: WLPalette

    @property
    def num_rounds(self) -> int:
        return len(self.rounds) - 1


def wl_refine(graphs: list[LabeledGraph], k: int) -> list[WLColoring]:
    """Jointly refine ``graphs`` for ``k`` rounds under one shared palette."""
    if k < 0:
        raise ParameterError("k must be non-negative")
    palette = WLPalette()
    adjacency = [g.adjacency() for g in graphs]

    colors: list[np.ndarray] = []
    for g in graphs:
        arr = np.empty(g.node_count, dtype=np.int64)
        for v, label in enumerate(g.node_labels):
            if label not in palette.label_map:
                palette.label_map[label] = len(palette.label_map)
            arr[v] = palette.label_map[label]
        colors.append(arr)
    rounds_per_graph: list[list[np.ndarray]] = [[c] for c in colors]

    for _ in range(k):
        table: dict[tuple, int] = {}
        new_colors = []
        for gi, g in enumerate(graphs):
            prev = colors[gi]
            arr = np.empty(g.node_count, dtype=np.int64)
            for v in range(g.node_count):
                key = (int(prev[v]), tuple(sorted(int(prev[u]) for u in adjacency[gi][v])))
                if key not in table:
                    table[key] = len(table)
                arr[v] = table[key]
            new_colors.append(arr)
        palette.round_maps.append(table)
        colors = new_colors
        for gi in range(len(graphs)):
            rounds_per_graph[gi].append(colors[gi])

    return [WLColoring(rounds, palette) for rounds in rounds_per_graph]


def wl_refine_from(
    graphs: list[LabeledGraph], initial_colors: list, k: int
) -> list[WLColoring]:
    """Refine for ``k`` rounds starting from an explicit round-0 coloring.

    Used to study coarsened (non-injective) layer outputs: round 0 is taken
    verbatim from ``initial_colors`` instead of the node labels.
    """
    if k < 0:
        raise ParameterError("k must be non-negative")
    relabeled = []
    for g, colors in zip(graphs, initial_colors):
        arr = np.asarray(colors, dtype=np.int64)
        if arr.shape != (g.node_count,):
            raise ParameterError("one initial color per node required")
        relabeled.append(
            LabeledGraph(g.node_count, g.edges, tuple(int(c) for c in arr))
        )
    return wl_refine(relabeled, k)


def wl_color_multiset(coloring: WLColoring, round_index: int) -> Counter:
    """Multiset of colors the graph exhibits at ``round_index``."""
    if not 0 <= round_index <= coloring.num_rounds:
        raise ParameterError(
            f"round {round_index} out of range 0..{coloring.num_rounds}"
        )
    return Counter(int(c) for c in coloring.rounds[round_index])


# --- unfolding trees ---------------------------------------------------------


@dataclass(frozen=True)
class UnfoldingTree:
    """Rooted tree of all walks of bounded length from a node (backtracking allowed)."""

    root_label: int
    children: tuple["UnfoldingTree", ...] = ()


def unfolding_tree(graph: LabeledGraph, v: int, k: int) -> UnfoldingTree:
    """Height-``k`` unfolding tree of node ``v``.

    Children at depth d are the trees of all graph-neighbors of the
    depth-(d-1) node, including the node it was reached from.
    """
    if not 0 <= v < graph.node_count:
        raise ParameterError(f"node {v} outside graph of size {graph.node_count}")
    if k < 0:
        raise ParameterError("k must be non-negative")
    adjacency = graph.adjacency()
    memo: dict[tuple[int, int], UnfoldingTree] = {}

    def build(node: int, depth: int) -> UnfoldingTree:
        key = (node, depth)
        if key not in memo:
            if depth == 0:
                memo[key] = UnfoldingTree(graph.node_labels[node])
            else:
                memo[key] = UnfoldingTree(
                    graph.node_labels[node],
                    tuple(build(u, depth - 1) for u in adjacency[node]),
                )
        return memo[key]

    return build(v, k)


def canonical_form(tree: UnfoldingTree) -> str:
    """Canonical string encoding; children sorted lexicographically at every level."""
    memo: dict[int, str] = {}

    def enc(t: UnfoldingTree) -> str:
        key = id(t)
        if key not in memo:
            memo[key] = f"{t.root_label}({','.join(sorted(enc(c) for c in t.children))})"
        return memo[key]

    return enc(tree)


def trees_isomorphic(t1: UnfoldingTree, t2: UnfoldingTree) -> bool:
    """Rooted labeled tree isomorphism with multiset child semantics."""
    return canonical_form(t1) == canonical_form(t2)


# --- multiset Jaccard and the within-class statistic -------------------------


def multiset_jaccard(a, b) -> float:
    """Multiset Jaccard distance 1 - sum(min)/sum(max) over the union support."""
    ca, cb = Counter(a), Counter(b)
    if not ca and not cb:
        raise ParameterError("multiset Jaccard is undefined for two empty multisets")
    support = set(ca) | set(cb)
    num = sum(min(ca[x], cb[x]) for x in support)
    den = sum(max(ca[x], cb[x]) for x in support)
    return 1.0 - num / den


@dataclass(frozen=True)
class GlwlStatistic:
    """Mean within-class Jaccard distance of WL color multisets.

    ``mean_jaccard[i][j]`` is the value at round ``ks[i]`` for
    ``class_ids[j]``; ``pairs_counted`` carries the matching pair counts.
    """

    ks: tuple[int, ...]
    class_ids: tuple[int, ...]
    mean_jaccard: np.ndarray
    pairs_counted: np.ndarray


def _pairwise_mean(multisets: list[Counter]) -> tuple[float, int]:
    n = len(multisets)
    pairs = n * (n - 1) // 2
    total = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            total += multiset_jaccard(multisets[i], multisets[j])
    return total / pairs, pairs


def epsilon_glwl_statistic(
    dataset: Dataset, k_max: int, sample_size: int, seed: int
) -> GlwlStatistic:
    """Within-class mean pairwise Jaccard distance of k-round color multisets.

    Computed for k = 1..k_max over a seeded sample of at most ``sample_size``
    graphs, all colored under one shared palette.  For binary-multi datasets
    the statistic is computed per task over graphs with present targets and
    averaged across the tasks where the class has at least two graphs.
    """
    if k_max < 1:
        raise ParameterError("k_max must be positive")
    if sample_size < 1:
        raise ParameterError("sample_size must be positive")
    n = dataset.num_graphs
    take = min(sample_size, n)
    sample = sorted(SplitMix64(derive_seed(seed, "glwl-sample")).sample(n, take))

    colorings = wl_refine([dataset.graphs[i] for i in sample], k_max)
    multisets = [
        [wl_color_multiset(c, k) for c in colorings] for k in range(1, k_max + 1)
    ]
    targets = dataset.targets[sample]

    if dataset.task_kind == "binary-multi":
        class_ids = (0, 1)
        groups_per_task = [
            {
                c: [i for i in range(take) if targets[i, t] == c]
                for c in class_ids
            }
            for t in range(dataset.num_tasks)
        ]
        mean = np.zeros((k_max, 2))
        pairs = np.zeros((k_max, 2), dtype=np.int64)
        for ci, c in enumerate(class_ids):
            usable = [g[c] for g in groups_per_task if len(g[c]) >= 2]
            if not usable:
                raise StatisticsError(f"class {c} has < 2 graphs in every task")
            for ki in range(k_max):
                vals, cnts = zip(
                    *(_pairwise_mean([multisets[ki][i] for i in idx]) for idx in usable)
                )
                mean[ki, ci] = float(np.mean(vals))
                pairs[ki, ci] = int(np.sum(cnts))
        return GlwlStatistic(tuple(range(1, k_max + 1)), class_ids, mean, pairs)

    groups: dict[int, list[int]] = {}
    for i in range(take):
        groups.setdefault(int(targets[i, 0]), []).append(i)
    if MISSING_TARGET in groups:
        del groups[MISSING_TARGET]
    class_ids = tuple(sorted(groups))
    for c in class_ids:
        if len(groups[c]) < 2:
            raise StatisticsError(f"class {c} has < 2 sampled graphs")
    mean = np.zeros((k_max, len(class_ids)))
    pairs = np.zeros((k_max, len(class_ids)), dtype=np.int64)
    for ci, c in enumerate(class_ids):
        for ki in range(k_max):
            mean[ki, ci], pairs[ki, ci] = _pairwise_mean(
                [multisets[ki][i] for i in groups[c]]
            )
    return GlwlStatistic(tuple(range(1, k_max + 1)), class_ids, mean, pairs)
