"""CSV persistence for trial and prediction records, plus JSON run manifests.

Real fields are serialized with 17 significant digits, which round-trips
float64 exactly, so reruns can be compared byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .prediction import PredictionTable, as_prediction_table
from .trials import TrialTable, as_table

TRIAL_HEADER = ("trial_index", "settings_id", "raw1", "raw2", "alpha1", "alpha2", "beta1", "beta2", "seed")
PREDICTION_HEADER = (
    "trial_index",
    "settings_id",
    "trajectory_mean1",
    "trajectory_mean2",
    "predicted1",
    "predicted2",
    "actual1",
    "actual2",
    "seed",
)
SWEEP_HEADER = ("v", "exact_chsh", "empirical_chsh", "chsh_stderr", "verdict")


@dataclass(frozen=True)
class SweepRow:
    v: float
    exact_chsh: float
    empirical_chsh: float
    chsh_stderr: float
    verdict: str


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run's record outputs byte for byte
    (timestamps are informational only)."""

    tool_version: str
    command: str
    master_seed: int
    parameters: dict
    started: str
    finished: str
    output_paths: list


def _real(x: float) -> str:
    return f"{float(x):.17g}"


def _check_id(sid: str) -> str:
    if any(ch in sid for ch in (",", "\n", "\r")):
        raise ValueError(f"settings_id {sid!r} contains CSV delimiter characters")
    return sid


def _is_empty(records) -> bool:
    if isinstance(records, (TrialTable, PredictionTable)):
        return len(records) == 0
    if isinstance(records, (list, tuple)):
        return len(records) == 0
    return False


def emit_records(records, path: str) -> str:
    """Write trial records as CSV; an empty record set yields a header-only file."""
    with open(path, "w", newline="") as f:
        f.write(",".join(TRIAL_HEADER) + "\n")
        if _is_empty(records):
            return path
        t = as_table(records)
        sids = [_check_id(s) for s in t.settings_ids()]
        f.writelines(
            f"{t.trial_index[i]},{sids[i]},{_real(t.raw1[i])},{_real(t.raw2[i])},"
            f"{_real(t.alpha1[i])},{_real(t.alpha2[i])},{t.beta1[i]},{t.beta2[i]},{t.seed[i]}\n"
            for i in range(len(t))
        )
    return path


def read_records(path: str) -> TrialTable:
    """Read a trial CSV back into a table; exact inverse of emit_records."""
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != TRIAL_HEADER:
            raise ValueError(f"unexpected trial CSV header {header!r}")
        index, sids, raw1, raw2, alpha1, alpha2, beta1, beta2, seed = [], [], [], [], [], [], [], [], []
        for row in reader:
            if len(row) != len(TRIAL_HEADER):
                raise ValueError(f"malformed trial CSV row: {row!r}")
            index.append(int(row[0]))
            sids.append(row[1])
            raw1.append(float(row[2]))
            raw2.append(float(row[3]))
            alpha1.append(float(row[4]))
            alpha2.append(float(row[5]))
            beta1.append(int(row[6]))
            beta2.append(int(row[7]))
            seed.append(int(row[8]))
    if not index:
        raise ValueError(f"trial CSV {path} holds no records")
    sid = sids[0] if len(set(sids)) == 1 else np.array(sids, dtype=object)
    return TrialTable(index, raw1, raw2, alpha1, alpha2, beta1, beta2, sid, seed)


def emit_predictions(records, path: str) -> str:
    """Write prediction records as CSV; empty set yields a header-only file."""
    with open(path, "w", newline="") as f:
        f.write(",".join(PREDICTION_HEADER) + "\n")
        if _is_empty(records):
            return path
        t = as_prediction_table(records)
        sids = [_check_id(s) for s in t.settings_ids()]
        f.writelines(
            f"{t.trial_index[i]},{sids[i]},{_real(t.trajectory_mean1[i])},"
            f"{_real(t.trajectory_mean2[i])},{t.predicted1[i]},{t.predicted2[i]},"
            f"{t.actual1[i]},{t.actual2[i]},{t.seed[i]}\n"
            for i in range(len(t))
        )
    return path


def read_predictions(path: str) -> PredictionTable:
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != PREDICTION_HEADER:
            raise ValueError(f"unexpected prediction CSV header {header!r}")
        cols = ([], [], [], [], [], [], [], [], [])
        for row in reader:
            if len(row) != len(PREDICTION_HEADER):
                raise ValueError(f"malformed prediction CSV row: {row!r}")
            cols[0].append(int(row[0]))
            cols[1].append(row[1])
            cols[2].append(float(row[2]))
            cols[3].append(float(row[3]))
            cols[4].append(int(row[4]))
            cols[5].append(int(row[5]))
            cols[6].append(int(row[6]))
            cols[7].append(int(row[7]))
            cols[8].append(int(row[8]))
    if not cols[0]:
        raise ValueError(f"prediction CSV {path} holds no records")
    sid = cols[1][0] if len(set(cols[1])) == 1 else np.array(cols[1], dtype=object)
    return PredictionTable(cols[0], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7], sid, cols[8])


def emit_sweep(rows, path: str) -> str:
    with open(path, "w", newline="") as f:
        f.write(",".join(SWEEP_HEADER) + "\n")
        f.writelines(
            f"{_real(r.v)},{_real(r.exact_chsh)},{_real(r.empirical_chsh)},"
            f"{_real(r.chsh_stderr)},{r.verdict}\n"
            for r in rows
        )
    return path


def read_sweep(path: str) -> list:
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != SWEEP_HEADER:
            raise ValueError(f"unexpected sweep CSV header {header!r}")
        return [
            SweepRow(float(r[0]), float(r[1]), float(r[2]), float(r[3]), r[4]) for r in reader
        ]


def emit_manifest(manifest: RunManifest, path: str) -> str:
    """Write the manifest as a single JSON object."""
    with open(path, "w") as f:
        json.dump(asdict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_manifest(path: str) -> RunManifest:
    with open(path, "r") as f:
        data = json.load(f)
    return RunManifest(**data)
