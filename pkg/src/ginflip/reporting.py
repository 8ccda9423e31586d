"""Serialized attack artifacts: structured text report, metric-curve CSV,
replayable flip log, and the comparative summary table.

All files are deterministic byte-for-byte for a given report: LF endings,
decimal points, reals at 17 significant digits, no timestamps.
"""

from __future__ import annotations

import csv
import io

from .attacks import AttackReport, FlipRecord, ProtocolResult
from .errors import DataFormatError
from .metrics import MetricKind
from .models import ModelParams
from .quant import BitAddress

_REPORT_MAGIC = "ginflip-attack-report v1"
_FLIPLOG_MAGIC = "ginflip-flip-log v1"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def render_report(report: AttackReport, metric_kind: MetricKind) -> str:
    lines = [
        _REPORT_MAGIC,
        f"attack {report.attack}",
        f"runs_completed {report.runs_completed}",
        f"total_bit_flips {report.total_bit_flips}",
        f"stalled {int(report.stalled)}",
        f"clean_{metric_kind.value} {_fmt(report.clean_metric)}",
        f"final_{metric_kind.value} {_fmt(report.final_metric)}",
        "per_tensor_flip_counts "
        + ",".join(f"{k}:{v}" for k, v in sorted(report.per_tensor_flip_counts.items())),
    ]
    for i, (ids_a, ids_b) in enumerate(report.selected_pair_ids):
        lines.append(
            f"pair {i} a={','.join(map(str, ids_a))} b={','.join(map(str, ids_b))}"
        )
    lines.append("flips run tensor element bit code_before code_after objective_before objective_after")
    for f in report.flips:
        lines.append(
            f"flip {f.run_index} {f.address.tensor_name} {f.address.element_index} "
            f"{f.address.bit_position} {f.code_before} {f.code_after} "
            f"{_fmt(f.objective_before)} {_fmt(f.objective_after)}"
        )
    return "\n".join(lines) + "\n"


def write_report(report: AttackReport, metric_kind: MetricKind, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(render_report(report, metric_kind))


def write_curve_csv(report: AttackReport, metric_kind: MetricKind, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("flip_count,metric_kind,value\n")
        for flips, value in report.metric_curve:
            fh.write(f"{flips},{metric_kind.value},{_fmt(value)}\n")


def write_flip_log(report: AttackReport, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_FLIPLOG_MAGIC + "\n")
        for f in report.flips:
            fh.write(
                f"{f.run_index} {f.address.tensor_name} {f.address.element_index} "
                f"{f.address.bit_position} {f.code_before} {f.code_after}\n"
            )


def load_flip_log(path: str) -> list[FlipRecord]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _FLIPLOG_MAGIC:
        raise DataFormatError(f"{path}: not a flip log")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataFormatError(f"{path}:{lineno}: expected 6 fields")
        try:
            records.append(
                FlipRecord(
                    run_index=int(parts[0]),
                    address=BitAddress(parts[1], int(parts[2]), int(parts[3])),
                    code_before=int(parts[4]),
                    code_after=int(parts[5]),
                    objective_before=float("nan"),
                    objective_after=float("nan"),
                )
            )
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return records


def replay_flips(params: ModelParams, records: list[FlipRecord]) -> None:
    """Re-apply a flip log to a clean checkpoint, verifying each code."""
    for r in records:
        before, after = params.apply_flip(r.address)
        if before != r.code_before or after != r.code_after:
            raise DataFormatError(
                f"replay mismatch at {r.address}: expected {r.code_before}->{r.code_after}, "
                f"got {before}->{after}"
            )


def render_summary_csv(result: ProtocolResult, metric_kind: MetricKind) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["attack", "attack_runs", "total_bit_flips", f"clean_{metric_kind.value}",
         f"post_{metric_kind.value}", "random_output", "stalled"]
    )
    for name, report in result.reports.items():
        writer.writerow(
            [
                name,
                result.attack_runs,
                report.total_bit_flips,
                _fmt(result.clean_metric),
                _fmt(report.final_metric),
                int(result.random_output[name]),
                int(report.stalled),
            ]
        )
    return buf.getvalue()
