"""Fault-injection lab for INT8-quantized graph neural networks.

Trains quantized GIN/GCN models on structural graph-classification tasks and
attacks them with random (RBFA), loss-maximizing (PBFA), and
injectivity-targeting (IBFA1/IBFA2) bit flips, alongside a Weisfeiler-Leman
toolkit for dataset characterization.
"""

from .attacks import (
    AttackConfig,
    AttackReport,
    FlipRecord,
    escalation_protocol,
    ibfa,
    pbfa,
    pbs_iteration,
    rbfa,
    select_input_pair,
)
from .graphs import (
    MISSING_TARGET,
    Dataset,
    LabeledGraph,
    SplitSpec,
    gen_wl_task,
    split_dataset,
)
from .losses import LossKind, loss_eval
from .metrics import (
    EvalResult,
    MetricKind,
    accuracy,
    auroc,
    average_precision,
    evaluate_model,
    is_random_output,
)
from .models import (
    GraphBatch,
    ModelConfig,
    ModelParams,
    gcn_forward,
    gin_forward,
    init_model,
    load_checkpoint,
    make_batch,
    save_checkpoint,
)
from .quant import (
    BitAddress,
    QuantizedTensor,
    ascending_flip_mask,
    bit_gradients,
    dequantize,
    flip_bit,
    quantize,
    ste_backward,
)
from .tensor import Tape, backward, finite_diff_check
from .training import train_quantized
from .tu_io import load_tu_dataset, write_tu_dataset
from .wl import (
    UnfoldingTree,
    WLColoring,
    epsilon_glwl_statistic,
    multiset_jaccard,
    trees_isomorphic,
    unfolding_tree,
    wl_color_multiset,
    wl_refine,
    wl_refine_from,
)

__version__ = "0.1.0"
