"""CSV/JSON file formats for cohorts and their hidden truth.

A dataset is three CSV files sharing a prefix:

* ``<prefix>_events.csv``: ``subject_id,t_last_neg,t_pos,t_trt,t_cen,delta,age,density``
  with empty cells for absent times,
* ``<prefix>_longitudinal.csv``: ``subject_id,time,psa_log2``,
* ``<prefix>_truth.csv`` (simulation only): ``subject_id,t_prg_star,t_trt_star``
  followed by the random effects ``u0..u3``.

Floats are written with ``repr`` (shortest round-trip form), so parsing a
written file gives back identical values.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .core import EventKind, SubjectRecord, validate_record
from .errors import ConfigError, MissingTruth, RecordError
from .predictor import SubjectProfile
from .simulator import TrueOutcome

EVENTS_HEADER = ["subject_id", "t_last_neg", "t_pos", "t_trt", "t_cen", "delta", "age", "density"]
LONGITUDINAL_HEADER = ["subject_id", "time", "psa_log2"]
TRUTH_HEADER = ["subject_id", "t_prg_star", "t_trt_star", "u0", "u1", "u2", "u3"]


def fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _opt(cell: str) -> Optional[float]:
    cell = cell.strip()
    return None if cell == "" else float(cell)


@dataclass
class Dataset:
    records: list
    truths: Optional[dict] = None  # id -> TrueOutcome
    random_effects: Optional[dict] = None  # id -> (u0, u1, u2, u3)

    def profiles(self, use_random_effects: bool = True) -> dict:
        """Subject profiles keyed by id; random effects default to zero."""
        out = {}
        for rec in self.records:
            u = (0.0,) * 4
            if use_random_effects and self.random_effects is not None:
                u = self.random_effects[rec.id]
            out[rec.id] = SubjectProfile(rec.age, rec.density, u)
        return out


def dataset_paths(prefix) -> dict:
    """Paths of the three files of a dataset.

    ``prefix`` may also be the events file itself.
    """
    prefix = str(prefix)
    if prefix.endswith("_events.csv"):
        prefix = prefix[: -len("_events.csv")]
    return {kind: Path(f"{prefix}_{kind}.csv") for kind in ("events", "longitudinal", "truth")}


# -- writing ------------------------------------------------------------------------

def write_events(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENTS_HEADER)
        for r in records:
            w.writerow([r.id, fmt(r.t_last_neg), fmt(r.t_pos), fmt(r.t_trt), fmt(r.t_cen),
                        int(r.delta), fmt(r.age), fmt(r.density)])


def write_longitudinal(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONGITUDINAL_HEADER)
        for r in records:
            for time, value in r.psa:
                w.writerow([r.id, fmt(time), fmt(value)])


def write_truth(path, subjects) -> None:
    """``subjects`` are :class:`~icaccuracy.simulator.SimulatedSubject` objects."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for s in subjects:
            w.writerow([s.record.id, fmt(s.truth.t_prg_star), fmt(s.truth.t_trt_star),
                        *[fmt(x) for x in s.profile.u]])


def write_dataset(prefix, subjects) -> dict:
    paths = dataset_paths(prefix)
    records = [s.record for s in subjects]
    write_events(paths["events"], records)
    write_longitudinal(paths["longitudinal"], records)
    write_truth(paths["truth"], subjects)
    return paths


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- reading ------------------------------------------------------------------------

def _check_header(reader, expected, path, prefix_only=False):
    header = next(reader, None)
    if header is None:
        raise RecordError(f"{path}: empty file", field="header")
    header = [h.strip() for h in header]
    ok = header[: len(expected)] == expected if prefix_only else header == expected
    if not ok:
        raise RecordError(f"{path}: expected header {','.join(expected)}", field="header")


def read_longitudinal(path) -> dict:
    series = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(reader, LONGITUDINAL_HEADER, path)
        for row in reader:
            if not row:
                continue
            series[row[0]].append((float(row[1]), float(row[2])))
    return dict(series)


def read_events(path, longitudinal: Optional[dict] = None) -> list:
    """Validated records; longitudinal rows must join to an events row."""
    longitudinal = longitudinal or {}
    records, seen = [], set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(reader, EVENTS_HEADER, path)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(EVENTS_HEADER):
                raise RecordError(f"{path}:{line}: expected {len(EVENTS_HEADER)} fields", field="row")
            sid = row[0]
            if sid in seen:
                raise RecordError(f"{path}:{line}: duplicate subject_id {sid}", field="subject_id")
            seen.add(sid)
            try:
                delta = EventKind(int(row[5]))
            except ValueError as exc:
                raise RecordError(f"{path}:{line}: bad delta {row[5]!r}", field="delta") from exc
            rec = SubjectRecord(
                id=sid, t_last_neg=float(row[1]), delta=delta, t_pos=_opt(row[2]),
                t_trt=_opt(row[3]), t_cen=_opt(row[4]), age=float(row[6]),
                density=float(row[7]), psa=tuple(sorted(longitudinal.get(sid, ()))),
            )
            validate_record(rec)
            records.append(rec)
    orphans = set(longitudinal) - seen
    if orphans:
        raise RecordError(f"longitudinal rows without events row: {sorted(orphans)[:5]}", field="subject_id")
    return records


def read_truth(path):
    """``(truths, random_effects)`` keyed by subject id."""
    truths, effects = {}, {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(reader, TRUTH_HEADER[:3], path, prefix_only=True)
        for row in reader:
            if not row:
                continue
            truths[row[0]] = TrueOutcome(float(row[1]), float(row[2]))
            if len(row) >= 7:
                effects[row[0]] = tuple(float(x) for x in row[3:7])
    return truths, (effects or None)


def load_dataset(prefix, truth: Optional[bool] = None) -> Dataset:
    """Read a dataset by prefix.

    ``truth=None`` loads the truth file when present, ``True`` requires it
    and ``False`` ignores it.
    """
    paths = dataset_paths(prefix)
    if not paths["events"].exists():
        raise ConfigError(f"events file {paths['events']} not found")
    longitudinal = read_longitudinal(paths["longitudinal"]) if paths["longitudinal"].exists() else {}
    records = read_events(paths["events"], longitudinal)
    truths = effects = None
    if truth is not False and paths["truth"].exists():
        truths, effects = read_truth(paths["truth"])
        missing = {r.id for r in records} - set(truths)
        if missing:
            raise RecordError(f"truth file lacks subjects {sorted(missing)[:5]}", field="subject_id")
    elif truth:
        raise MissingTruth(f"truth file {paths['truth']} not found")
    return Dataset(records, truths, effects)
