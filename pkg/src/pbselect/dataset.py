"""Turn a run archive into a labeled learning dataset.

Each (instance, timestep) pair becomes one row: the instance features with
the timestep appended, plus the winner label.  The winner is the solver
holding the smallest sampled objective at that timestep; ties go to the
solver that reached the value first, and residual ties (same value, same
time) to the earlier solver in portfolio declaration order.  Pairs where
no solver has found anything yet get the NO_SOLUTION label.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .features import FeatureVector, append_timestep, extract_timed, feature_names
from .grid import TimestepGrid, make_grid
from .opb import MissingObjectiveError, OpbParseError, parse_opb_file
from .runner import RunArchive

logger = logging.getLogger(__name__)

NO_SOLUTION = "NO_SOLUTION"

TRAIN = "train"
TEST = "test"

_META_COLUMNS = ("benchmark", "instance", "timestep", "label", "split")


def label_pair(
    samples: dict[str, tuple[int | None, float | None]], solver_order: list[str]
) -> str:
    """Winner label for one (instance, timestep) pair.

    ``samples`` maps solver id to (sampled objective, achievement time);
    both are None while the solver has no solution.  Smallest objective
    wins; ties break to the earliest achievement time, then to portfolio
    declaration order.
    """
    best: tuple[str, int, float] | None = None
    for sid in solver_order:
        value, at = samples.get(sid, (None, None))
        if value is None:
            continue
        if best is None or value < best[1] or (value == best[1] and at < best[2]):
            best = (sid, value, at)
    return best[0] if best else NO_SOLUTION


@dataclass(frozen=True)
class DatasetRow:
    instance_id: str
    benchmark_id: str
    timestep_index: int
    features: FeatureVector
    label: str


@dataclass
class LabeledDataset:
    rows: list[DatasetRow]
    schema: str
    encoding: str
    grid: TimestepGrid
    solver_order: list[str]
    split: dict[str, str] = field(default_factory=dict)
    feature_seconds: dict[str, float] = field(default_factory=dict)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def vocabulary(self) -> list[str]:
        return self.solver_order + [NO_SOLUTION]

    def instance_ids(self) -> list[str]:
        seen = dict.fromkeys(r.instance_id for r in self.rows)
        return list(seen)

    def rows_for(self, part: str | None) -> list[DatasetRow]:
        if part is None:
            return self.rows
        return [r for r in self.rows if self.split.get(r.instance_id) == part]

    def feature_matrix(self, rows: list[DatasetRow]) -> np.ndarray:
        return np.array([r.features.full() for r in rows], dtype=np.float64)

    def label_indices(self, rows: list[DatasetRow]) -> np.ndarray:
        index = {label: i for i, label in enumerate(self.vocabulary())}
        return np.array([index[r.label] for r in rows], dtype=np.intp)


def build_dataset(
    archive: RunArchive,
    schema: str,
    solver_order: list[str],
    encoding: str = "index",
) -> LabeledDataset:
    """One row per (instance, timestep) over everything the archive holds.

    Instances that fail to parse, lack an objective, or miss a trajectory
    for some portfolio solver are skipped and listed in the skip manifest.
    Features are computed once per instance (wall time recorded for
    overhead accounting) and repeated across timesteps.
    """
    grid = archive.grid
    rows: list[DatasetRow] = []
    feature_seconds: dict[str, float] = {}
    skipped: list[tuple[str, str]] = []

    for iid, bench, path in archive.instances():
        trajs = {}
        missing = None
        for sid in solver_order:
            if not archive.has(iid, sid):
                missing = sid
                break
            trajs[sid] = archive.read_trajectory(iid, sid)
        if missing is not None:
            skipped.append((iid, f"missing trajectory for solver {missing}"))
            continue
        try:
            inst = parse_opb_file(path, benchmark_id=bench)
        except (OSError, OpbParseError) as exc:
            skipped.append((iid, f"unparsable: {exc}"))
            continue
        try:
            fv, seconds = extract_timed(inst, schema)
        except MissingObjectiveError:
            skipped.append((iid, "no objective"))
            continue
        feature_seconds[iid] = seconds
        ach = {sid: trajs[sid].achievement_times(grid) for sid in solver_order}
        for j in range(grid.count):
            samples = {sid: (trajs[sid].sampled[j], ach[sid][j]) for sid in solver_order}
            rows.append(
                DatasetRow(
                    instance_id=iid,
                    benchmark_id=bench,
                    timestep_index=j,
                    features=append_timestep(fv, j, grid, encoding),
                    label=label_pair(samples, solver_order),
                )
            )
    for iid, reason in skipped:
        logger.warning("skipped %s: %s", iid, reason)
    return LabeledDataset(
        rows=rows,
        schema=schema,
        encoding=encoding,
        grid=grid,
        solver_order=list(solver_order),
        feature_seconds=feature_seconds,
        skipped=skipped,
    )


def split_by_benchmark(
    ds: LabeledDataset, seed: int, train_fraction: float = 0.7
) -> LabeledDataset:
    """Assign instances to train/test per benchmark, ceil(fraction*k) to train.

    The shuffle is seeded and benchmarks are visited in sorted order, so the
    split is a deterministic function of (dataset, seed).  A single-instance
    benchmark goes entirely to train.
    """
    by_bench: dict[str, set[str]] = {}
    for r in ds.rows:
        by_bench.setdefault(r.benchmark_id, set()).add(r.instance_id)
    rng = random.Random(seed)
    split: dict[str, str] = {}
    for bench in sorted(by_bench):
        ids = sorted(by_bench[bench])
        rng.shuffle(ids)
        n_train = math.ceil(train_fraction * len(ids))
        for i, iid in enumerate(ids):
            split[iid] = TRAIN if i < n_train else TEST
    return replace(ds, split=split)


@dataclass
class WinSummary:
    labels: list[str]
    by_timestep: dict[str, list[int]]  # label -> per-timestep win counts
    by_benchmark: dict[str, dict[str, int]]  # benchmark -> label -> wins

    def timestep_csv(self) -> str:
        lines = ["timestep," + ",".join(self.labels)]
        count = len(next(iter(self.by_timestep.values())))
        for j in range(count):
            lines.append(f"{j}," + ",".join(str(self.by_timestep[l][j]) for l in self.labels))
        return "\n".join(lines) + "\n"

    def benchmark_csv(self) -> str:
        lines = ["benchmark," + ",".join(self.labels)]
        for bench in sorted(self.by_benchmark):
            counts = self.by_benchmark[bench]
            lines.append(bench + "," + ",".join(str(counts.get(l, 0)) for l in self.labels))
        return "\n".join(lines) + "\n"


def win_summary(ds: LabeledDataset) -> WinSummary:
    labels = ds.vocabulary()
    by_timestep = {l: [0] * ds.grid.count for l in labels}
    by_benchmark: dict[str, dict[str, int]] = {}
    for r in ds.rows:
        by_timestep[r.label][r.timestep_index] += 1
        by_benchmark.setdefault(r.benchmark_id, {}).setdefault(r.label, 0)
        by_benchmark[r.benchmark_id][r.label] += 1
    return WinSummary(labels=labels, by_timestep=by_timestep, by_benchmark=by_benchmark)


# ---------------------------------------------------------------------------
# CSV persistence

def _sidecars(path: Path) -> tuple[Path, Path]:
    return path.with_suffix(".meta.json"), path.with_suffix(".skips.txt")


def write_csv(ds: LabeledDataset, path: str | Path) -> None:
    """Write rows as CSV plus a .meta.json sidecar and a skip manifest.

    The ``timestep`` column holds the grid index; the encoded timestep
    feature is reconstructed from it (and the recorded encoding) on read,
    so it is not duplicated as a second column.
    """
    path = Path(path)
    header = list(_META_COLUMNS) + list(feature_names(ds.schema, with_timestep=False))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in ds.rows:
            w.writerow(
                [
                    r.benchmark_id,
                    r.instance_id,
                    r.timestep_index,
                    r.label,
                    ds.split.get(r.instance_id, ""),
                ]
                + [repr(v) for v in r.features.values]
            )
    meta_path, skips_path = _sidecars(path)
    meta = {
        "schema": ds.schema,
        "encoding": ds.encoding,
        "grid": ds.grid.params(),
        "solvers": ds.solver_order,
        "feature_seconds": ds.feature_seconds,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    skips_path.write_text("".join(f"{iid}\t{reason}\n" for iid, reason in ds.skipped))


def read_csv(path: str | Path) -> LabeledDataset:
    path = Path(path)
    meta_path, skips_path = _sidecars(path)
    meta = json.loads(meta_path.read_text())
    grid = make_grid(**meta["grid"])
    schema, encoding = meta["schema"], meta["encoding"]
    n_meta = len(_META_COLUMNS)
    rows: list[DatasetRow] = []
    split: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = list(_META_COLUMNS) + list(feature_names(schema, with_timestep=False))
        if header != expected:
            raise ValueError(f"unexpected dataset header in {path}")
        for rec in reader:
            bench, iid, j, label, part = rec[:n_meta]
            j = int(j)
            values = tuple(float(v) for v in rec[n_meta:])
            fv = append_timestep(FeatureVector(values, schema), j, grid, encoding)
            rows.append(DatasetRow(iid, bench, j, fv, label))
            if part:
                split[iid] = part
    skipped = []
    if skips_path.exists():
        for line in skips_path.read_text().splitlines():
            iid, _, reason = line.partition("\t")
            skipped.append((iid, reason))
    return LabeledDataset(
        rows=rows,
        schema=schema,
        encoding=encoding,
        grid=grid,
        solver_order=list(meta["solvers"]),
        split=split,
        feature_seconds={k: float(v) for k, v in meta["feature_seconds"].items()},
        skipped=skipped,
    )
