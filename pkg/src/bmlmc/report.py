"""Report emission: per-round CSV rows, final JSON report, trace CSV.

CSV files are append-only while a run progresses (a crash leaves a valid
prefix).  The JSON report is self-contained: config echo, round table,
per-level statistics, fitted rates, budget and loss summaries.
"""

from __future__ import annotations

import json
from dataclasses import asdict

from .controller import RunResult

SCHEMA_VERSION = 1


class RoundCsvWriter:
    """Streams one row per executed round; header fixed by max_level."""

    def __init__(self, path, max_level: int):
        self.max_level = max_level
        self._fh = open(path, "w", encoding="utf-8", buffering=1)
        self._fh.write(f"# bmlmc rounds schema={SCHEMA_VERSION}\n")
        m_cols = ",".join(f"m{ell}" for ell in range(max_level + 1))
        self._fh.write("round,epsilon,max_level,err_disc,err_input,err_rmse,"
                       f"consumed,remaining,{m_cols}\n")

    def __call__(self, row: dict) -> None:
        samples = list(row["samples"])
        samples += [""] * (self.max_level + 1 - len(samples))
        cells = [row["round"], repr(row["epsilon"]), row["max_level"],
                 repr(row["err_disc"]), repr(row["err_input"]),
                 repr(row["err_rmse"]), repr(row["consumed"]),
                 repr(row["remaining"])] + samples
        self._fh.write(",".join(str(c) for c in cells) + "\n")

    def close(self) -> None:
        self._fh.close()


class TraceCsvWriter:
    """One row per sample: scheduling identity and cost."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8", buffering=1)
        self._fh.write("round,level,wave,group,units,seed,cost\n")

    def __call__(self, row: dict) -> None:
        self._fh.write(f"{row['round']},{row['level']},{row['wave']},"
                       f"{row['group']},{row['units']},{row['seed']},"
                       f"{float(row['cost'])!r}\n")

    def close(self) -> None:
        self._fh.close()


def _level_rows(result: RunResult) -> list[dict]:
    rows = []
    for acc in result.data.accumulators:
        rows.append({
            "level": acc.level,
            "count": acc.count,
            "mean_q": acc.mean_q,
            "var_q": acc.s2_q / (acc.count - 1) if acc.count >= 2 else None,
            "mean_y": acc.mean_y,
            "var_y": acc.s2_y / (acc.count - 1) if acc.count >= 2 else None,
            "mean_cost": acc.mean_cost,
            "total_cost": acc.total_cost,
        })
    return rows


def build_report(result: RunResult, config_echo: dict) -> dict:
    errors = result.errors
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_echo,
        "rounds": result.rounds,
        "levels": _level_rows(result),
        "rates": asdict(result.rates) if result.rates is not None else None,
        "final": {
            "q_hat": result.q_hat,
            "err_disc": errors.err_disc if errors else None,
            "err_input": errors.err_input if errors else None,
            "err_mse": errors.err_mse if errors else None,
            "err_rmse": errors.err_rmse if errors else None,
            "epsilon": result.epsilon_final,
            "stop_reason": result.stop_reason,
        },
        "budget": {
            "initial": result.ledger.initial,
            "consumed": result.ledger.consumed,
            "remaining": result.ledger.remaining,
            "overshoot": result.ledger.overshoot,
            "per_round": result.ledger.consumed_per_round,
        },
        "losses": {
            "raw_cost": result.losses.raw_cost,
            "charged_cost": result.losses.charged_cost,
            "comm_loss": result.losses.comm_loss,
            "busy": result.losses.busy,
            "idle": result.losses.idle,
            "wall_span": result.losses.wall_span,
            "sync_span": result.losses.sync_span,
        },
        "flags": result.flags,
    }


def dump_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
