"""Quantized GIN (sum aggregation, per-layer MLPs, sum+concat readout) and the
GCN ablation (closed-neighborhood mean, single linear per layer), plus the
checkpoint container format.

Node features are one-hot encodings of the node labels; with a uniform label
alphabet that degenerates to a constant 1-dim feature.  The readout
concatenates per-graph sums of every representation from hop 0 up to the last
layer, and a single quantized linear head maps it to the task logits.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ParameterError, ShapeError
from .graphs import LabeledGraph
from .quant import BitAddress, QuantizedTensor, dequantize, flip_bit, quantize
from .rng import SplitMix64, derive_seed
from .tensor import Tape

ARCHITECTURES = ("GIN", "GCN")


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "GIN"
    num_layers: int = 5
    hidden_dim: int = 64
    input_dim: int = 1
    output_dim: int = 1
    mlp_depth: int = 2
    epsilon: float = 0.0
    virtual_node: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ParameterError(f"unknown architecture {self.architecture!r}")
        for name in ("num_layers", "hidden_dim", "input_dim", "output_dim", "mlp_depth"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")

    @property
    def readout_dim(self) -> int:
        return self.input_dim + self.num_layers * self.hidden_dim


def layer_plan(config: ModelConfig) -> list[tuple[str, int, int]]:
    """Ordered (name, in_dim, out_dim) of every linear in the model.

    Each entry owns one quantized weight `<name>.weight` and one
    full-precision bias `<name>.bias`.  GCN layers have a single linear;
    GIN layers have `mlp_depth` of them.  The virtual node, when enabled,
    adds a mirrored stack per layer under the `vn` prefix.
    """
    plan: list[tuple[str, int, int]] = []
    for k in range(1, config.num_layers + 1):
        d_in = config.input_dim if k == 1 else config.hidden_dim
        if config.architecture == "GIN":
            dims = [d_in] + [config.hidden_dim] * config.mlp_depth
            for j in range(config.mlp_depth):
                plan.append((f"layer{k}.lin{j + 1}", dims[j], dims[j + 1]))
            if config.virtual_node:
                for j in range(config.mlp_depth):
                    plan.append((f"layer{k}.vn.lin{j + 1}", dims[j], dims[j + 1]))
        else:
            plan.append((f"layer{k}", d_in, config.hidden_dim))
            if config.virtual_node:
                plan.append((f"layer{k}.vn", d_in, config.hidden_dim))
    plan.append(("head", config.readout_dim, config.output_dim))
    return plan


@dataclass
class ModelParams:
    """Named quantized weights plus full-precision biases of one model.

    Reads may be shared; any mutation (training step, bit flip) requires
    exclusive access.
    """

    config: ModelConfig
    weights: dict[str, QuantizedTensor]
    biases: dict[str, np.ndarray]

    @property
    def weight_names(self) -> list[str]:
        return list(self.weights)

    def attackable_bit_count(self) -> int:
        return 8 * sum(q.size for q in self.weights.values())

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            dict(self.weights),
            {k: v.copy() for k, v in self.biases.items()},
        )

    def apply_flip(self, addr: BitAddress) -> tuple[int, int]:
        """Flip one bit in place; returns (code_before, code_after)."""
        q = self.weights[addr.tensor_name]
        before = int(q.codes.reshape(-1)[addr.element_index])
        self.weights[addr.tensor_name] = flip_bit(q, addr)
        after = int(
            self.weights[addr.tensor_name].codes.reshape(-1)[addr.element_index]
        )
        return before, after

    def codes_equal(self, other: "ModelParams") -> bool:
        return self.weight_names == other.weight_names and all(
            np.array_equal(self.weights[n].codes, other.weights[n].codes)
            and self.weights[n].scale == other.weights[n].scale
            for n in self.weights
        )


def init_model(config: ModelConfig) -> ModelParams:
    """Deterministic init: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) then
    quantized (the scale stays frozen from here on); biases start at zero."""
    rng = SplitMix64(derive_seed(config.seed, "init-model"))
    weights: dict[str, QuantizedTensor] = {}
    biases: dict[str, np.ndarray] = {}
    for name, d_in, d_out in layer_plan(config):
        bound = 1.0 / np.sqrt(d_in)
        w = np.empty((d_in, d_out))
        flat = w.reshape(-1)
        for i in range(flat.size):
            flat[i] = (2.0 * rng.uniform() - 1.0) * bound
        weights[f"{name}.weight"] = quantize(w)
        biases[f"{name}.bias"] = np.zeros((1, d_out))
    return ModelParams(config, weights, biases)


# --- batching ----------------------------------------------------------------


@dataclass(frozen=True)
class GraphBatch:
    """Disjoint union of graphs prepared for the tape engine.

    Edges are materialized in both directions.  When virtual nodes are
    enabled each graph gets one extra node wired to all its real nodes;
    readout always runs over the real nodes only.
    """

    features: np.ndarray        # (num_nodes, input_dim) one-hot; zero rows for virtual nodes
    edge_src: np.ndarray        # (num_directed_edges,)
    edge_dst: np.ndarray
    segment_ids: np.ndarray     # node -> graph, ascending
    num_graphs: int
    real_rows: np.ndarray       # indices of non-virtual nodes
    virtual_rows: np.ndarray    # indices of virtual nodes (empty when disabled)
    node_order: np.ndarray      # permutation restoring node order from [real; virtual]

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


def make_batch(
    graphs: list[LabeledGraph], input_dim: int, virtual_node: bool = False
) -> GraphBatch:
    """One-hot features and directed edge arrays for a disjoint-union batch."""
    if not graphs:
        raise ParameterError("cannot batch zero graphs")
    sizes = [g.node_count + (1 if virtual_node else 0) for g in graphs]
    total = sum(sizes)
    features = np.zeros((total, input_dim))
    segment_ids = np.empty(total, dtype=np.int64)
    src: list[int] = []
    dst: list[int] = []
    real: list[int] = []
    virtual: list[int] = []
    offset = 0
    for gi, g in enumerate(graphs):
        for v, label in enumerate(g.node_labels):
            if label >= input_dim:
                raise ShapeError(
                    f"node label {label} outside feature alphabet of size {input_dim}"
                )
            features[offset + v, label] = 1.0
        segment_ids[offset : offset + sizes[gi]] = gi
        for u, v in g.edges:
            src.extend((offset + u, offset + v))
            dst.extend((offset + v, offset + u))
        real.extend(range(offset, offset + g.node_count))
        if virtual_node:
            vn = offset + g.node_count
            virtual.append(vn)
            for v in range(g.node_count):
                src.extend((offset + v, vn))
                dst.extend((vn, offset + v))
        offset += sizes[gi]
    real_rows = np.asarray(real, dtype=np.int64)
    virtual_rows = np.asarray(virtual, dtype=np.int64)
    node_order = np.empty(total, dtype=np.int64)
    node_order[real_rows] = np.arange(len(real))
    if virtual_node:
        node_order[virtual_rows] = len(real) + np.arange(len(virtual))
    return GraphBatch(
        features=features,
        edge_src=np.asarray(src, dtype=np.int64),
        edge_dst=np.asarray(dst, dtype=np.int64),
        segment_ids=segment_ids,
        num_graphs=len(graphs),
        real_rows=real_rows,
        virtual_rows=virtual_rows,
        node_order=node_order,
    )


# --- forward passes -----------------------------------------------------------


def make_param_nodes(tape: Tape, params: ModelParams) -> tuple[dict[str, int], dict[str, int]]:
    """Register dequantized weights and biases as named leaves on ``tape``."""
    weight_nodes = {
        name: tape.leaf(dequantize(q), name=name) for name, q in params.weights.items()
    }
    bias_nodes = {
        name: tape.leaf(b, name=name) for name, b in params.biases.items()
    }
    return weight_nodes, bias_nodes


def _linear(tape, h, name, weight_nodes, bias_nodes):
    return tape.add_bias_rowwise(
        tape.matmul(h, weight_nodes[f"{name}.weight"]), bias_nodes[f"{name}.bias"]
    )


def _mlp(tape, h, prefix, depth, weight_nodes, bias_nodes):
    for j in range(1, depth + 1):
        h = _linear(tape, h, f"{prefix}.lin{j}", weight_nodes, bias_nodes)
        if j < depth:
            h = tape.relu(h)
    return h


def _neighbor_sum(tape, h, batch):
    gathered = tape.gather_rows(h, batch.edge_src)
    return tape.segment_sum(gathered, batch.edge_dst, batch.num_nodes)


def _split_apply(tape, z, batch, apply_real, apply_virtual):
    # Route real and virtual rows through their own stacks, then restore order.
    h_real = apply_real(tape.gather_rows(z, batch.real_rows))
    h_virt = apply_virtual(tape.gather_rows(z, batch.virtual_rows))
    return tape.gather_rows(tape.concat_rows([h_real, h_virt]), batch.node_order)


def _readout_and_head(tape, per_layer, batch, weight_nodes, bias_nodes):
    sums = []
    for h in per_layer:
        real = tape.gather_rows(h, batch.real_rows)
        sums.append(
            tape.segment_sum(real, batch.segment_ids[batch.real_rows], batch.num_graphs)
        )
    readout = tape.concat_cols(sums)
    return _linear(tape, readout, "head", weight_nodes, bias_nodes)


def gin_forward(
    params: ModelParams,
    batch: GraphBatch,
    tape: Tape,
    param_nodes: tuple[dict[str, int], dict[str, int]] | None = None,
) -> int:
    """Logits node of the GIN forward pass.

    Layer k computes MLP_k((1 + eps) * h_v + sum of neighbor h_u); the first
    layer consumes raw one-hot sums directly (no MLP before summation).
    Pass ``param_nodes`` to reuse existing leaves, e.g. to run two batches
    against the same weights on one tape.
    """
    cfg = params.config
    if cfg.architecture != "GIN":
        raise ParameterError("gin_forward needs a GIN config")
    if batch.features.shape[1] != cfg.input_dim:
        raise ShapeError(
            f"batch features {batch.features.shape[1]}-dim, model expects {cfg.input_dim}"
        )
    weight_nodes, bias_nodes = param_nodes or make_param_nodes(tape, params)
    h = tape.constant(batch.features)
    per_layer = [h]
    for k in range(1, cfg.num_layers + 1):
        agg = _neighbor_sum(tape, h, batch)
        z = tape.add(tape.scale(h, 1.0 + cfg.epsilon), agg)
        if cfg.virtual_node:
            h = _split_apply(
                tape,
                z,
                batch,
                lambda zr: _mlp(tape, zr, f"layer{k}", cfg.mlp_depth, weight_nodes, bias_nodes),
                lambda zv: _mlp(tape, zv, f"layer{k}.vn", cfg.mlp_depth, weight_nodes, bias_nodes),
            )
        else:
            h = _mlp(tape, z, f"layer{k}", cfg.mlp_depth, weight_nodes, bias_nodes)
        per_layer.append(h)
    return _readout_and_head(tape, per_layer, batch, weight_nodes, bias_nodes)


def gcn_forward(
    params: ModelParams,
    batch: GraphBatch,
    tape: Tape,
    param_nodes: tuple[dict[str, int], dict[str, int]] | None = None,
) -> int:
    """Logits node of the GCN forward pass.

    Layer k computes ReLU(linear(mean over the closed neighborhood)); the
    readout and head match GIN so attacks stay comparable.
    """
    cfg = params.config
    if cfg.architecture != "GCN":
        raise ParameterError("gcn_forward needs a GCN config")
    if batch.features.shape[1] != cfg.input_dim:
        raise ShapeError(
            f"batch features {batch.features.shape[1]}-dim, model expects {cfg.input_dim}"
        )
    weight_nodes, bias_nodes = param_nodes or make_param_nodes(tape, params)
    degrees = np.bincount(batch.edge_dst, minlength=batch.num_nodes)
    inv_closed = 1.0 / (1.0 + degrees)
    h = tape.constant(batch.features)
    per_layer = [h]
    for k in range(1, cfg.num_layers + 1):
        mean = tape.scale_rows(tape.add(h, _neighbor_sum(tape, h, batch)), inv_closed)
        if cfg.virtual_node:
            h = _split_apply(
                tape,
                mean,
                batch,
                lambda mr: tape.relu(_linear(tape, mr, f"layer{k}", weight_nodes, bias_nodes)),
                lambda mv: tape.relu(_linear(tape, mv, f"layer{k}.vn", weight_nodes, bias_nodes)),
            )
        else:
            h = tape.relu(_linear(tape, mean, f"layer{k}", weight_nodes, bias_nodes))
        per_layer.append(h)
    return _readout_and_head(tape, per_layer, batch, weight_nodes, bias_nodes)


def forward(params, batch, tape, param_nodes=None) -> int:
    """Dispatch on the configured architecture."""
    if params.config.architecture == "GIN":
        return gin_forward(params, batch, tape, param_nodes)
    return gcn_forward(params, batch, tape, param_nodes)


# --- checkpoint container ------------------------------------------------------

_CKPT_MAGIC = "ginflip-checkpoint v1"


def save_checkpoint(params: ModelParams, path: str) -> None:
    """Versioned plain-text container; code bytes and biases as base64."""
    cfg = params.config
    lines = [
        _CKPT_MAGIC,
        f"architecture {cfg.architecture}",
        f"num_layers {cfg.num_layers}",
        f"hidden_dim {cfg.hidden_dim}",
        f"input_dim {cfg.input_dim}",
        f"output_dim {cfg.output_dim}",
        f"mlp_depth {cfg.mlp_depth}",
        f"epsilon {cfg.epsilon:.17g}",
        f"virtual_node {int(cfg.virtual_node)}",
        f"seed {cfg.seed}",
        f"weights {len(params.weights)}",
        f"biases {len(params.biases)}",
    ]
    for name, q in params.weights.items():
        payload = base64.b64encode(q.codes.tobytes()).decode("ascii")
        lines.append(
            f"weight {name} {q.shape[0]} {q.shape[1]} {q.clip_range[0]} "
            f"{q.clip_range[1]} {q.scale:.17g} {payload}"
        )
    for name, b in params.biases.items():
        payload = base64.b64encode(
            np.ascontiguousarray(b, dtype="<f8").tobytes()
        ).decode("ascii")
        lines.append(f"bias {name} {b.shape[0]} {b.shape[1]} {payload}")
    lines.append("end")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _ckpt_fields(line: str, lineno: int, kind: str, count: int) -> list[str]:
    parts = line.split(" ")
    if parts[0] != kind or len(parts) != count:
        raise CheckpointError(lineno, f"expected a {kind} record, got {line[:40]!r}")
    return parts


def load_checkpoint(path: str) -> ModelParams:
    """Inverse of save_checkpoint; byte-exact on codes, scales and biases."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    def need(lineno):
        if lineno >= len(lines):
            raise CheckpointError(lineno + 1, "file truncated")
        return lines[lineno]

    if need(0) != _CKPT_MAGIC:
        raise CheckpointError(1, f"bad magic {need(0)[:40]!r}")
    header: dict[str, str] = {}
    for i in range(1, 12):
        key, _, value = need(i).partition(" ")
        header[key] = value
    try:
        cfg = ModelConfig(
            architecture=header["architecture"],
            num_layers=int(header["num_layers"]),
            hidden_dim=int(header["hidden_dim"]),
            input_dim=int(header["input_dim"]),
            output_dim=int(header["output_dim"]),
            mlp_depth=int(header["mlp_depth"]),
            epsilon=float(header["epsilon"]),
            virtual_node=bool(int(header["virtual_node"])),
            seed=int(header["seed"]),
        )
        n_weights = int(header["weights"])
        n_biases = int(header["biases"])
    except (KeyError, ValueError, ParameterError) as exc:
        raise CheckpointError(12, f"bad header: {exc}") from None

    weights: dict[str, QuantizedTensor] = {}
    biases: dict[str, np.ndarray] = {}
    lineno = 12
    for _ in range(n_weights):
        parts = _ckpt_fields(need(lineno), lineno + 1, "weight", 8)
        try:
            rows, cols = int(parts[2]), int(parts[3])
            clip = (int(parts[4]), int(parts[5]))
            scale = float(parts[6])
            raw = base64.b64decode(parts[7], validate=True)
            codes = np.frombuffer(raw, dtype=np.int8)
            if codes.size != rows * cols:
                raise ValueError(f"{codes.size} codes for shape {rows}x{cols}")
            weights[parts[1]] = QuantizedTensor(
                codes.reshape(rows, cols).copy(), scale, clip
            )
        except Exception as exc:
            raise CheckpointError(lineno + 1, str(exc)) from None
        lineno += 1
    for _ in range(n_biases):
        parts = _ckpt_fields(need(lineno), lineno + 1, "bias", 5)
        try:
            rows, cols = int(parts[2]), int(parts[3])
            raw = base64.b64decode(parts[4], validate=True)
            values = np.frombuffer(raw, dtype="<f8")
            if values.size != rows * cols:
                raise ValueError(f"{values.size} values for shape {rows}x{cols}")
            biases[parts[1]] = values.reshape(rows, cols).astype(np.float64)
        except Exception as exc:
            raise CheckpointError(lineno + 1, str(exc)) from None
        lineno += 1
    if need(lineno) != "end":
        raise CheckpointError(lineno + 1, "missing end marker")

    plan = layer_plan(cfg)
    if list(weights) != [f"{n}.weight" for n, _, _ in plan]:
        raise CheckpointError(lineno + 1, "weight names do not match the architecture")
    if list(biases) != [f"{n}.bias" for n, _, _ in plan]:
        raise CheckpointError(lineno + 1, "bias names do not match the architecture")
    return ModelParams(cfg, weights, biases)
