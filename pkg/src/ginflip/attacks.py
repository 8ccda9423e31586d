"""Bit-flip attacks on quantized models.

Implemented variants:
  RBFA  - uniformly random flips, the robustness baseline;
  PBFA  - progressive bit search ascending the training loss on one batch;
  IBFA1 - PBS descending the output difference of one maximally different
          input pair, selected once on the clean model;
  IBFA2 - as IBFA1 but the pair is re-selected under the perturbed model
          before every attack run.

One attack run is one PBS iteration; a run applies a single flip, or a small
combination when no single flip improves the objective.  All sampling comes
from streams derived from the attack seed, so a report is a pure function of
(checkpoint, dataset, config).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, PoolError
from .graphs import Dataset
from .losses import KL_LINKS, LossKind, loss_eval, pairwise_loss_value
from .metrics import EvalResult, MetricKind, evaluate_model, is_random_output
from .models import GraphBatch, ModelParams, forward, make_batch, make_param_nodes
from .quant import BitAddress, ascending_flip_mask, bit_gradients, code_bits
from .rng import SplitMix64, derive_seed
from .tensor import Tape, backward

#: Strict-improvement tolerance of the progressive bit search.
IMPROVEMENT_TOL = 1e-12
#: Pair objectives below this stall an IBFA run outright (degenerate selection).
DEGENERATE_PAIR_TOL = 1e-9

ATTACK_KINDS = ("RBFA", "PBFA", "IBFA1", "IBFA2")


@dataclass(frozen=True)
class AttackConfig:
    attack: str
    attack_runs: int = 5
    candidates_per_layer: int = 10
    max_combination_size: int = 2
    batch_size: int = 32
    loss: LossKind | None = None
    pool_fraction: float = 1.0
    seed: int = 0
    resample_batch: bool = False

    def __post_init__(self):
        if self.attack not in ATTACK_KINDS:
            raise ParameterError(f"unknown attack {self.attack!r}")
        if self.attack_runs < 0:
            raise ParameterError("attack_runs must be non-negative")
        if self.candidates_per_layer < 1 or self.max_combination_size < 1:
            raise ParameterError("search parameters must be positive")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be positive")
        if not 0.0 < self.pool_fraction <= 1.0:
            raise ParameterError("pool_fraction must be in (0, 1]")
        if self.attack in ("IBFA1", "IBFA2"):
            if self.loss not in (LossKind.L1_OUTPUT, LossKind.KL_POINTWISE):
                raise ParameterError(f"{self.attack} requires an output-pair loss")
        elif self.attack == "PBFA":
            if self.loss not in (LossKind.BCE_MASKED, LossKind.CE):
                raise ParameterError("PBFA requires a target-based loss")


@dataclass(frozen=True)
class FlipRecord:
    run_index: int
    address: BitAddress
    code_before: int
    code_after: int
    objective_before: float
    objective_after: float


@dataclass
class AttackReport:
    attack: str
    flips: list[FlipRecord] = field(default_factory=list)
    metric_curve: list[tuple[int, float]] = field(default_factory=list)
    selected_pair_ids: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(
        default_factory=list
    )
    stalled: bool = False
    runs_completed: int = 0

    @property
    def total_bit_flips(self) -> int:
        return len(self.flips)

    @property
    def per_tensor_flip_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for f in self.flips:
            counts[f.address.tensor_name] = counts.get(f.address.tensor_name, 0) + 1
        return counts

    @property
    def clean_metric(self) -> float:
        return self.metric_curve[0][1]

    @property
    def final_metric(self) -> float:
        return self.metric_curve[-1][1]


# --- progressive bit search ----------------------------------------------------


@dataclass
class PbsResult:
    applied: list[tuple[BitAddress, int, int]]
    objective_before: float
    objective_after: float
    stalled: bool


@dataclass(frozen=True)
class _Candidate:
    tensor_index: int
    address: BitAddress
    abs_grad: float

    @property
    def order_key(self):
        return (self.tensor_index, self.address.element_index, self.address.bit_position)


def _rank_candidates(params, grads, direction, n_b) -> list[_Candidate]:
    candidates: list[_Candidate] = []
    sign = 1.0 if direction == "ascend" else -1.0
    for t_idx, name in enumerate(params.weight_names):
        q = params.weights[name]
        if name not in grads:
            continue
        bg = bit_gradients(grads[name], q)
        mask = ascending_flip_mask(code_bits(q), sign * bg)
        if not mask.any():
            continue
        elems, bits = np.nonzero(mask)
        magnitudes = np.abs(bg[elems, bits])
        # |gradient| descending, then element and bit ascending.
        order = np.lexsort((bits, elems, -magnitudes))[:n_b]
        for pos in order:
            candidates.append(
                _Candidate(
                    t_idx,
                    BitAddress(name, int(elems[pos]), int(bits[pos])),
                    float(magnitudes[pos]),
                )
            )
    return candidates


def pbs_iteration(
    params: ModelParams,
    objective,
    direction: str,
    n_b: int = 10,
    max_combination_size: int = 2,
) -> PbsResult:
    """One progressive-bit-search step; mutates ``params`` when a flip helps.

    ``objective(params, need_grads)`` returns (value, weight-gradient map).
    Per tensor, the n_b direction-consistent bits with the largest
    |bit gradient| become candidates; each is tentatively flipped, evaluated,
    and reverted, and the single best strictly improving flip model-wide is
    applied (ties broken by tensor order, element, bit).  If no single flip
    improves, candidate combinations of growing size are tried exhaustively
    in descending combined-|gradient| order, keeping the first improvement.
    Otherwise the search reports a stall and leaves ``params`` untouched.
    """
    if direction not in ("ascend", "descend"):
        raise ParameterError(f"unknown direction {direction!r}")
    base, grads = objective(params, True)

    def improved(value: float) -> bool:
        if direction == "ascend":
            return value > base + IMPROVEMENT_TOL
        return value < base - IMPROVEMENT_TOL

    def better(value: float, incumbent: float) -> bool:
        return value > incumbent if direction == "ascend" else value < incumbent

    candidates = sorted(
        _rank_candidates(params, grads, direction, n_b), key=lambda c: c.order_key
    )

    best: _Candidate | None = None
    best_value = base
    for cand in candidates:
        params.apply_flip(cand.address)
        value, _ = objective(params, False)
        params.apply_flip(cand.address)
        if improved(value) and (best is None or better(value, best_value)):
            best, best_value = cand, value
    if best is not None:
        before, after = params.apply_flip(best.address)
        return PbsResult([(best.address, before, after)], base, best_value, False)

    for size in range(2, max_combination_size + 1):
        combos = sorted(
            itertools.combinations(candidates, size),
            key=lambda c: (-sum(x.abs_grad for x in c), tuple(x.order_key for x in c)),
        )
        for combo in combos:
            for cand in combo:
                params.apply_flip(cand.address)
            value, _ = objective(params, False)
            for cand in combo:
                params.apply_flip(cand.address)
            if improved(value):
                applied = [
                    (c.address,) + params.apply_flip(c.address) for c in combo
                ]
                return PbsResult(applied, base, value, False)

    return PbsResult([], base, base, True)


# --- objectives -----------------------------------------------------------------


def _named_weight_grads(tape: Tape, grads: dict[int, np.ndarray], params) -> dict:
    return {
        name: grads[nid]
        for name, nid in tape.named_leaves.items()
        if name in params.weights and nid in grads
    }


class _TargetObjective:
    """Training-style loss on one fixed batch with its true targets."""

    def __init__(self, batch: GraphBatch, targets: np.ndarray, loss_kind: LossKind):
        self.batch = batch
        self.targets = targets
        self.loss_kind = loss_kind

    def __call__(self, params: ModelParams, need_grads: bool):
        tape = Tape()
        logits = forward(params, self.batch, tape)
        if self.loss_kind == LossKind.CE:
            loss = loss_eval(tape, self.loss_kind, logits, self.targets.reshape(-1))
        else:
            loss = loss_eval(tape, self.loss_kind, logits, self.targets)
        value = float(tape.value(loss)[0, 0])
        if not need_grads:
            return value, None
        return value, _named_weight_grads(tape, backward(tape, loss), params)


class _PairObjective:
    """Output difference of two batches, both run under the current weights."""

    def __init__(self, batch_a: GraphBatch, batch_b: GraphBatch, loss_kind, link):
        self.batch_a = batch_a
        self.batch_b = batch_b
        self.loss_kind = loss_kind
        self.link = link

    def __call__(self, params: ModelParams, need_grads: bool):
        tape = Tape()
        nodes = make_param_nodes(tape, params)
        logits_a = forward(params, self.batch_a, tape, nodes)
        logits_b = forward(params, self.batch_b, tape, nodes)
        loss = loss_eval(tape, self.loss_kind, logits_a, logits_b, link=self.link)
        value = float(tape.value(loss)[0, 0])
        if not need_grads:
            return value, None
        return value, _named_weight_grads(tape, backward(tape, loss), params)


# --- input-pair selection --------------------------------------------------------


def _partition_pool(pool: Dataset, cfg: AttackConfig) -> list[list[int]]:
    n = pool.num_graphs
    take = max(1, int(round(cfg.pool_fraction * n))) if cfg.pool_fraction < 1.0 else n
    rng = SplitMix64(derive_seed(cfg.seed, "ibfa-pool"))
    chosen = rng.sample(n, take)
    batches = [
        chosen[i : i + cfg.batch_size]
        for i in range(0, len(chosen) - cfg.batch_size + 1, cfg.batch_size)
    ]
    if len(batches) < 2:
        raise PoolError(
            f"pool of {take} graphs yields {len(batches)} full batches; need >= 2"
        )
    return batches


def _select_pair_indices(
    params: ModelParams,
    pool: Dataset,
    batches: list[list[int]],
    loss_kind: LossKind,
    link: str,
) -> tuple[int, int, float]:
    """Argmax over ordered batch pairs of the output-difference loss, with
    per-batch outputs cached for the current model."""
    logits = []
    for idx in batches:
        batch = make_batch(
            [pool.graphs[i] for i in idx],
            params.config.input_dim,
            params.config.virtual_node,
        )
        tape = Tape()
        logits.append(tape.value(forward(params, batch, tape)).copy())
    best = (-1.0, 0, 0)
    for a in range(len(batches)):
        for b in range(len(batches)):
            if a == b:
                continue
            value = pairwise_loss_value(loss_kind, logits[a], logits[b], link)
            if value > best[0]:
                best = (value, a, b)
    return best[1], best[2], best[0]


def select_input_pair(
    params: ModelParams,
    pool: Dataset,
    loss: LossKind,
    batch_size: int,
    seed: int = 0,
    pool_fraction: float = 1.0,
) -> tuple[tuple[int, ...], tuple[int, ...], float]:
    """Partition ``pool`` into seeded full batches and return the ordered pair
    of graph-index tuples whose unperturbed outputs differ most under
    ``loss``, together with the achieved value."""
    cfg = AttackConfig(
        attack="IBFA1", loss=loss, batch_size=batch_size, seed=seed,
        pool_fraction=pool_fraction,
    )
    batches = _partition_pool(pool, cfg)
    link = KL_LINKS[pool.task_kind]
    a, b, value = _select_pair_indices(params, pool, batches, loss, link)
    return tuple(batches[a]), tuple(batches[b]), value


# --- attack drivers ---------------------------------------------------------------


def _metric(params, eval_data, metric_kind) -> float:
    return evaluate_model(params, eval_data, metric_kind).value


def _record_pbs(report: AttackReport, run: int, result: PbsResult):
    for addr, before, after in result.applied:
        report.flips.append(
            FlipRecord(run, addr, before, after, result.objective_before, result.objective_after)
        )


def rbfa(
    params: ModelParams,
    n_flips: int,
    seed: int,
    *,
    eval_data: Dataset,
    metric_kind: MetricKind,
) -> AttackReport:
    """Flip ``n_flips`` uniformly sampled distinct bits across all quantized
    tensors, recording the metric after every flip."""
    total = params.attackable_bit_count()
    if n_flips > total:
        raise ParameterError(f"{n_flips} flips exceed the {total} attackable bits")
    sizes = [(name, params.weights[name].size) for name in params.weight_names]
    flat = SplitMix64(derive_seed(seed, "rbfa")).sample(total, n_flips)
    report = AttackReport("RBFA")
    report.metric_curve.append((0, _metric(params, eval_data, metric_kind)))
    for run, code in enumerate(flat):
        element, bit = divmod(code, 8)
        for name, size in sizes:
            if element < size:
                addr = BitAddress(name, element, bit)
                break
            element -= size
        before, after = params.apply_flip(addr)
        report.flips.append(
            FlipRecord(run, addr, before, after, float("nan"), float("nan"))
        )
        report.metric_curve.append(
            (report.total_bit_flips, _metric(params, eval_data, metric_kind))
        )
        report.runs_completed = run + 1
    return report


def pbfa(
    params: ModelParams,
    data: Dataset,
    cfg: AttackConfig,
    *,
    eval_data: Dataset,
    metric_kind: MetricKind,
) -> AttackReport:
    """Progressive bit search ascending the training loss on a seeded batch
    carrying its true targets; stalls end the attack with a partial report."""
    if cfg.attack != "PBFA":
        raise ParameterError("config is not a PBFA config")
    n = data.num_graphs
    size = min(cfg.batch_size, n)
    report = AttackReport("PBFA")
    report.metric_curve.append((0, _metric(params, eval_data, metric_kind)))

    def sample_objective(run: int) -> _TargetObjective:
        tag = run if cfg.resample_batch else 0
        idx = SplitMix64(derive_seed(cfg.seed, "pbfa-batch", tag)).sample(n, size)
        batch = make_batch(
            [data.graphs[i] for i in idx],
            params.config.input_dim,
            params.config.virtual_node,
        )
        return _TargetObjective(batch, data.targets[idx], cfg.loss)

    objective = sample_objective(0)
    for run in range(cfg.attack_runs):
        if cfg.resample_batch and run > 0:
            objective = sample_objective(run)
        result = pbs_iteration(
            params, objective, "ascend", cfg.candidates_per_layer, cfg.max_combination_size
        )
        if result.stalled:
            report.stalled = True
            break
        _record_pbs(report, run, result)
        report.metric_curve.append(
            (report.total_bit_flips, _metric(params, eval_data, metric_kind))
        )
        report.runs_completed = run + 1
    return report


def ibfa(
    params: ModelParams,
    pool: Dataset,
    cfg: AttackConfig,
    *,
    eval_data: Dataset,
    metric_kind: MetricKind,
) -> AttackReport:
    """Injectivity attack: PBS descending the output difference of a
    maximally different input pair.  IBFA1 selects the pair once on the clean
    model; IBFA2 re-selects it under the perturbed model before every run.
    Targets are never used."""
    if cfg.attack not in ("IBFA1", "IBFA2"):
        raise ParameterError("config is not an IBFA config")
    batches = _partition_pool(pool, cfg)
    link = KL_LINKS[pool.task_kind]
    report = AttackReport(cfg.attack)
    report.metric_curve.append((0, _metric(params, eval_data, metric_kind)))

    def build_objective() -> _PairObjective | None:
        a, b, value = _select_pair_indices(params, pool, batches, cfg.loss, link)
        if value < DEGENERATE_PAIR_TOL:
            return None
        report.selected_pair_ids.append((tuple(batches[a]), tuple(batches[b])))
        make = lambda idx: make_batch(
            [pool.graphs[i] for i in idx],
            params.config.input_dim,
            params.config.virtual_node,
        )
        return _PairObjective(make(batches[a]), make(batches[b]), cfg.loss, link)

    objective = None
    for run in range(cfg.attack_runs):
        if cfg.attack == "IBFA2" or objective is None:
            objective = build_objective()
            if objective is None:
                report.stalled = True
                break
        result = pbs_iteration(
            params, objective, "descend", cfg.candidates_per_layer, cfg.max_combination_size
        )
        if result.stalled:
            report.stalled = True
            break
        _record_pbs(report, run, result)
        report.metric_curve.append(
            (report.total_bit_flips, _metric(params, eval_data, metric_kind))
        )
        report.runs_completed = run + 1
    return report


def run_attack(
    params: ModelParams,
    cfg: AttackConfig,
    attack_data: Dataset,
    *,
    eval_data: Dataset,
    metric_kind: MetricKind,
) -> AttackReport:
    """Dispatch one attack config against ``params`` (mutated in place)."""
    if cfg.attack == "RBFA":
        return rbfa(
            params, cfg.attack_runs, cfg.seed, eval_data=eval_data, metric_kind=metric_kind
        )
    if cfg.attack == "PBFA":
        return pbfa(params, attack_data, cfg, eval_data=eval_data, metric_kind=metric_kind)
    return ibfa(params, attack_data, cfg, eval_data=eval_data, metric_kind=metric_kind)


# --- escalation protocol -----------------------------------------------------------


@dataclass
class ProtocolResult:
    attack_runs: int
    reports: dict[str, AttackReport]
    random_output: dict[str, bool]
    capped: bool
    clean_metric: float


def escalation_protocol(
    clean_params: ModelParams,
    attacks: list[AttackConfig],
    attack_data: Dataset,
    *,
    eval_data: Dataset,
    metric_kind: MetricKind,
    initial_runs: int = 5,
    cap: int = 50,
    positive_rate: float | None = None,
) -> ProtocolResult:
    """Run every attack at the same run count, escalating until one reaches
    random output.

    All attacks start at ``initial_runs`` runs from the same clean
    checkpoint; while none is at random output and the cap is not reached,
    the run count is incremented and every attack restarts from the clean
    checkpoint.  The result reports all attacks at the first-success count,
    or is flagged as capped.
    """
    if len(attacks) < 2:
        raise ParameterError("the protocol compares at least two attack kinds")
    labels = [cfg.attack for cfg in attacks]
    if len(set(labels)) != len(labels):
        raise ParameterError("duplicate attack kinds in one protocol")
    clean_metric = _metric(clean_params, eval_data, metric_kind)

    reports: dict[str, AttackReport] = {}
    random_flags: dict[str, bool] = {}
    runs = initial_runs
    while True:
        reports = {}
        random_flags = {}
        for cfg in attacks:
            working = clean_params.copy()
            report = run_attack(
                working,
                replace(cfg, attack_runs=runs),
                attack_data,
                eval_data=eval_data,
                metric_kind=metric_kind,
            )
            reports[cfg.attack] = report
            result = EvalResult(metric_kind, report.final_metric, (), 0)
            random_flags[cfg.attack] = is_random_output(
                result,
                eval_data.task_kind,
                num_classes=eval_data.num_classes,
                positive_rate=positive_rate,
            )
        if any(random_flags.values()):
            return ProtocolResult(runs, reports, random_flags, False, clean_metric)
        if runs >= cap:
            return ProtocolResult(runs, reports, random_flags, True, clean_metric)
        runs += 1
