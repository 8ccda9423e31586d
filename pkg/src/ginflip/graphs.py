"""Graph and dataset types, deterministic splitting, and synthetic structural tasks.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import SplitMix64, derive_seed

#: Explicit third state for binary targets; never stored as a float sentinel.
MISSING_TARGET = -1

TASK_KINDS = ("binary-single", "binary-multi", "multiclass")


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected graph with discrete node labels.

    ``edges`` holds each undirected edge exactly once as a sorted (u, v) pair;
    no self-loops, no duplicates, all endpoints < ``node_count``.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    node_labels: tuple[int, ...]

    def __post_init__(self):
        if self.node_count < 0:
            raise ParameterError("node_count must be non-negative")
        if len(self.node_labels) != self.node_count:
            raise ParameterError(
                f"{len(self.node_labels)} labels for {self.node_count} nodes"
            )
        if any(l < 0 for l in self.node_labels):
            raise ParameterError("node labels must be non-negative")
        seen = set()
        norm = []
        for u, v in self.edges:
            if u == v:
                raise ParameterError(f"self-loop at node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ParameterError(f"edge ({u}, {v}) outside node range")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ParameterError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists, ascending within each list."""
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return adj

    def degrees(self) -> list[int]:
        deg = [0] * self.node_count
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


@dataclass(frozen=True, eq=False)
class Dataset:
    """A list of labeled graphs plus per-graph classification targets.

    ``targets`` is an int matrix of shape (num_graphs, num_tasks).  Binary
    tasks use {0, 1, MISSING_TARGET}; multiclass datasets store a single
    class index per graph (num_tasks == 1, no missing entries).
    """

    graphs: tuple[LabeledGraph, ...]
    targets: np.ndarray
    task_kind: str
    label_alphabet_size: int
    num_classes: int | None = None

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ParameterError(f"unknown task kind {self.task_kind!r}")
        t = np.asarray(self.targets, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != len(self.graphs):
            raise ParameterError("targets must be (num_graphs, num_tasks)")
        if self.task_kind == "multiclass":
            if self.num_classes is None or self.num_classes < 1:
                raise ParameterError("multiclass datasets need num_classes >= 1")
            if t.shape[1] != 1:
                raise ParameterError("multiclass targets must have one column")
            if ((t < 0) | (t >= self.num_classes)).any():
                raise ParameterError("multiclass targets out of range (no missing allowed)")
        else:
            bad = ~np.isin(t, (0, 1, MISSING_TARGET))
            if bad.any():
                raise ParameterError("binary targets must be 0, 1 or MISSING_TARGET")
            if self.task_kind == "binary-single" and t.shape[1] != 1:
                raise ParameterError("binary-single targets must have one column")
        if self.label_alphabet_size < 1:
            raise ParameterError("label_alphabet_size must be positive")
        for g in self.graphs:
            if any(l >= self.label_alphabet_size for l in g.node_labels):
                raise ParameterError("node label outside the declared alphabet")
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    @property
    def num_tasks(self) -> int:
        return self.targets.shape[1]

    def target_mask(self) -> np.ndarray:
        """Boolean matrix marking targets that are present."""
        if self.task_kind == "multiclass":
            return np.ones_like(self.targets, dtype=bool)
        return self.targets != MISSING_TARGET

    def subset(self, indices) -> "Dataset":
        idx = list(indices)
        return Dataset(
            graphs=tuple(self.graphs[i] for i in idx),
            targets=self.targets[idx].copy(),
            task_kind=self.task_kind,
            label_alphabet_size=self.label_alphabet_size,
            num_classes=self.num_classes,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.graphs == other.graphs
            and np.array_equal(self.targets, other.targets)
            and self.task_kind == other.task_kind
            and self.label_alphabet_size == other.label_alphabet_size
            and self.num_classes == other.num_classes
        )


@dataclass(frozen=True)
class SplitSpec:
    """Train/valid/test fractions plus the seed of the split permutation."""

    fractions: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ParameterError("fractions must be three non-negative reals")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ParameterError("fractions must sum to 1 within 1e-9")


def split_dataset(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/valid/test cover of the graph indices.

    Valid and test get floor(fraction * n) graphs each; train absorbs the
    remainder.  The permutation comes from the package's splitmix64 stream
    seeded with ``spec.seed``, so splits are identical across runs and
    platforms.
    """
    n = dataset.num_graphs
    if n == 0:
        raise ParameterError("cannot split an empty dataset")
    perm = SplitMix64(derive_seed(spec.seed, "split")).permutation(n)
    n_valid = math.floor(spec.fractions[1] * n)
    n_test = math.floor(spec.fractions[2] * n)
    n_train = n - n_valid - n_test
    train = perm[:n_train]
    valid = perm[n_train : n_train + n_valid]
    test = perm[n_train + n_valid :]
    return dataset.subset(train), dataset.subset(valid), dataset.subset(test)


# --- synthetic structural task generators -----------------------------------

WL_TASK_FAMILIES = ("cycles-vs-paths", "regular-pairs", "tree-depth")

_FAMILY_MIN_SIZE = {"cycles-vs-paths": 3, "regular-pairs": 6, "tree-depth": 4}


def _cycle(n: int) -> LabeledGraph:
    edges = tuple((i, (i + 1) % n) for i in range(n))
    return LabeledGraph(n, edges, (0,) * n)


def _path(n: int) -> LabeledGraph:
    edges = tuple((i, i + 1) for i in range(n - 1))
    return LabeledGraph(n, edges, (0,) * n)


def _chorded_cycle(n: int, chord_span: int) -> LabeledGraph:
    # Cycle plus one chord between nodes at ring distance chord_span.
    edges = [(i, (i + 1) % n) for i in range(n)] + [(0, chord_span)]
    return LabeledGraph(n, tuple(edges), (0,) * n)


def _complete_rary_tree(r: int, n: int) -> LabeledGraph:
    # Node i attaches to parent (i - 1) // r; breadth-first complete r-ary tree.
    edges = tuple(((i - 1) // r, i) for i in range(1, n))
    return LabeledGraph(n, edges, (0,) * n)


def _family_pair(family: str, n: int) -> tuple[LabeledGraph, LabeledGraph]:
    if family == "cycles-vs-paths":
        return _cycle(n), _path(n)
    if family == "regular-pairs":
        # Same degree sequence (two degree-3 nodes on a cycle), but the
        # span-2 chord closes a triangle while the span-3 chord does not;
        # 2-round WL color multisets differ for every n >= 6.
        return _chorded_cycle(n, 2), _chorded_cycle(n, 3)
    if family == "tree-depth":
        # Complete binary vs complete 4-ary tree on the same node count:
        # depth floor(log2) vs floor(log4), different for every n >= 4.
        return _complete_rary_tree(2, n), _complete_rary_tree(4, n)
    raise ParameterError(f"unknown task family {family!r}")


def gen_wl_task(
    family: str, graphs_per_class: int, size_range: tuple[int, int], seed: int
) -> Dataset:
    """Binary graph-classification task whose classes are 1-WL distinguishable.

    Emits ``graphs_per_class`` pairs; both members of a pair share the node
    count, drawn uniformly from ``size_range`` (inclusive).  All node labels
    are uniform (0), so the classes differ in structure only.  Deterministic
    under ``seed``.
    """
    if family not in WL_TASK_FAMILIES:
        raise ParameterError(f"unknown task family {family!r}")
    lo, hi = size_range
    if lo < 3:
        raise ParameterError("size_range lower bound must be >= 3")
    if lo > hi:
        raise ParameterError("empty size_range")
    if lo < _FAMILY_MIN_SIZE[family]:
        raise ParameterError(
            f"family {family!r} needs sizes >= {_FAMILY_MIN_SIZE[family]}"
        )
    if graphs_per_class < 1:
        raise ParameterError("graphs_per_class must be positive")
    rng = SplitMix64(derive_seed(seed, "gen-wl-task", family))
    graphs: list[LabeledGraph] = []
    targets: list[list[int]] = []
    for _ in range(graphs_per_class):
        n = rng.integers(lo, hi + 1)
        g0, g1 = _family_pair(family, n)
        graphs.extend((g0, g1))
        targets.extend(([0], [1]))
    return Dataset(
        graphs=tuple(graphs),
        targets=np.asarray(targets, dtype=np.int64),
        task_kind="binary-single",
        label_alphabet_size=1,
        num_classes=None,
    )


