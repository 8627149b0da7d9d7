"""Per-step run records and their CSV / JSONL persistence."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("step", "loss_r", "loss_b", "loss_total", "grad_norm", "cos_phi", "ratio_r", "cos_phi_max",
           "membership", "cond_i", "cond_ii_ratio", "m_lower", "step_cos_max", "branch")
_INT = {"step"}
_BOOL = {"membership"}
_STR = {"branch"}


def fmt_float(x: float) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return "%.17g" % x


@dataclass
class RunRecord:
    rows: list[dict] = field(default_factory=list)
    relative_l2: float = math.nan  # best over checkpoints
    final_relative_l2: float = math.nan
    stop_reason: str = ""
    wall_time: float = 0.0
    seed: int = 0
    checkpoints: list[tuple[int, float]] = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and row["step"] <= self.rows[-1]["step"]:
            raise ValueError("rows must be strictly increasing in step")
        self.rows.append({k: row[k] for k in COLUMNS})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def terminal(self) -> dict:
        return {"seed": self.seed, "relative_l2": self.relative_l2,
                "final_relative_l2": self.final_relative_l2, "stop_reason": self.stop_reason,
                "wall_time": self.wall_time, "checkpoints": [list(c) for c in self.checkpoints]}


def _cell(name, value) -> str:
    if name in _STR:
        return str(value)
    if name in _INT:
        return str(int(value))
    if name in _BOOL:
        return "1" if value else "0"
    return fmt_float(float(value))


def _parse(name, text):
    if name in _STR:
        return text
    if name in _INT:
        return int(text)
    if name in _BOOL:
        return text == "1"
    return float(text)


def write_csv(record: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in record.rows:
            w.writerow([_cell(k, row[k]) for k in COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [{k: _parse(k, v) for k, v in zip(header, line)} for line in r]


def write_run(out_dir, config: dict, run_id: str, records: list[RunRecord]) -> Path:
    """``meta.jsonl`` (one line: config echo, run id, per-trial terminals) and one CSV per trial."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials = []
    for i, rec in enumerate(records):
        name = f"trial_{i:03d}.csv"
        write_csv(rec, out / name)
        trials.append({**rec.terminal(), "csv": name})
    meta = {"run_id": run_id, "config": config, "trials": trials}
    with open(out / "meta.jsonl", "a") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
    return out


def read_run(out_dir) -> tuple[dict, list[RunRecord]]:
    """Last run written to ``out_dir``."""
    out = Path(out_dir)
    lines = (out / "meta.jsonl").read_text().strip().splitlines()
    meta = json.loads(lines[-1])
    records = []
    for t in meta["trials"]:
        rec = RunRecord(rows=read_csv(out / t["csv"]), relative_l2=t["relative_l2"],
                        final_relative_l2=t["final_relative_l2"], stop_reason=t["stop_reason"],
                        wall_time=t["wall_time"], seed=t["seed"],
                        checkpoints=[tuple(c) for c in t["checkpoints"]])
        records.append(rec)
    return meta, records
