"""Anytime evaluation: normalization, cumulative metrics, gap scores.

Objective values are normalized per instance against the best and worst
feasible values any portfolio solver ever found there: the result is
(o - o_min) / (o_max - o_min), with two special cases -- 0 when the pair
sits at a degenerate o_min == o_max, and 2 when the policy has no feasible
solution while others do.  Cumulative sums of these values give m_s per
solver and m_ms for a selector policy; the headline score is the gap ratio

    m_hat = (m_ms - m_VBS) / (m_SBS - m_VBS)

which is 0 for a perfect (virtual-best) selector and 1 for always running
the single best solver.  Only (instance, timestep) pairs where at least
one solver has a feasible solution are evaluated; accuracy and the
confusion matrix, by contrast, cover every test row.

With overhead accounting on, each instance's measured feature-extraction
plus prediction seconds shift the trajectory lookup to the largest grid
point t_j' with t_j' + overhead <= t_j, so the selector only gets credit
for what its solver could produce in the remaining budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import NO_SOLUTION, TEST, LabeledDataset
from .grid import TimestepGrid
from .runner import RunArchive, Trajectory

Pair = tuple[str, int]  # (instance_id, timestep index)


class DegeneratePortfolioError(ValueError):
    """m_SBS equals m_VBS, so the gap ratio is undefined."""


@dataclass(frozen=True)
class InstanceBounds:
    """Extremes over all feasible solutions found by any solver, any time."""

    o_min: int | None
    o_max: int | None

    @property
    def defined(self) -> bool:
        return self.o_max is not None


def compute_bounds(trajectories: list[Trajectory]) -> InstanceBounds:
    lo: int | None = None
    hi: int | None = None
    for traj in trajectories:
        for _, value in traj.events:
            if lo is None or value < lo:
                lo = value
            if hi is None or value > hi:
                hi = value
    return InstanceBounds(o_min=lo, o_max=hi)


def normalize(o: int | None, bounds: InstanceBounds) -> float:
    """Map an objective (or the no-solution case) into [0, 1] or {2}."""
    if not bounds.defined:
        raise ValueError("normalize needs defined instance bounds")
    if o is None:
        return 2.0
    if bounds.o_min == bounds.o_max:
        return 0.0
    return (o - bounds.o_min) / (bounds.o_max - bounds.o_min)


def cumulative_metric(
    values: list[int | None], bounds_per_pair: list[InstanceBounds]
) -> float:
    """Sum of normalized values over the evaluated pairs, in pair order."""
    if len(values) != len(bounds_per_pair):
        raise ValueError("policy must provide a value for every evaluated pair")
    return math.fsum(normalize(o, b) for o, b in zip(values, bounds_per_pair))


def m_hat(m_ms: float, m_sbs: float, m_vbs: float) -> float:
    if m_sbs <= m_vbs:
        raise DegeneratePortfolioError(
            f"m_SBS ({m_sbs}) must exceed m_VBS ({m_vbs}) for the gap ratio"
        )
    return (m_ms - m_vbs) / (m_sbs - m_vbs)


def sbs_breakdown(
    values: list[int | None], best_values: list[int | None]
) -> dict[str, int]:
    """Classify each pair: best-found incumbent, worse feasible, or none."""
    counts = {"best": 0, "non_best": 0, "none": 0}
    for got, best in zip(values, best_values):
        if got is None:
            counts["none"] += 1
        elif got == best:
            counts["best"] += 1
        else:
            counts["non_best"] += 1
    return counts


@dataclass
class EvalContext:
    """Trajectory samples, bounds and the evaluated pair set for one split."""

    grid: TimestepGrid
    solver_order: list[str]
    instance_ids: list[str]
    sampled: dict[tuple[str, str], tuple[int | None, ...]]
    bounds: dict[str, InstanceBounds]
    pairs: list[Pair]

    def solver_values(self, solver_id: str) -> list[int | None]:
        return [self.sampled[(iid, solver_id)][j] for iid, j in self.pairs]

    def best_values(self) -> list[int | None]:
        out: list[int | None] = []
        for iid, j in self.pairs:
            vals = [
                v
                for sid in self.solver_order
                if (v := self.sampled[(iid, sid)][j]) is not None
            ]
            out.append(min(vals) if vals else None)
        return out

    def bounds_per_pair(self) -> list[InstanceBounds]:
        return [self.bounds[iid] for iid, _ in self.pairs]

    def policy_values(
        self,
        policy: dict[Pair, str],
        overhead_seconds: dict[str, float] | None = None,
    ) -> list[int | None]:
        """Objective each pair's chosen solver holds at that timestep.

        NO_SOLUTION choices are undefined.  When overheads are given, the
        lookup index moves to the largest grid point that still fits before
        t_j once the overhead is spent; if none fits, the value is
        undefined.
        """
        out: list[int | None] = []
        points = self.grid.points
        for iid, j in self.pairs:
            choice = policy[(iid, j)]
            if choice == NO_SOLUTION:
                out.append(None)
                continue
            j_eff = j
            if overhead_seconds is not None:
                shifted = self.grid.floor_index(points[j] - overhead_seconds[iid])
                if shifted is None:
                    out.append(None)
                    continue
                j_eff = shifted
            out.append(self.sampled[(iid, choice)][j_eff])
        return out

    def metric(self, values: list[int | None]) -> float:
        return cumulative_metric(values, self.bounds_per_pair())


def context_from_trajectories(
    grid: TimestepGrid,
    solver_order: list[str],
    trajectories: dict[str, dict[str, Trajectory]],
) -> EvalContext:
    """Build an evaluation context from per-instance, per-solver trajectories.

    The evaluated pair set keeps exactly the (instance, timestep) pairs
    where at least one solver holds a feasible solution.
    """
    ids = sorted(trajectories)
    sampled: dict[tuple[str, str], tuple[int | None, ...]] = {}
    bounds: dict[str, InstanceBounds] = {}
    pairs: list[Pair] = []
    for iid in ids:
        per_solver = trajectories[iid]
        for sid in solver_order:
            sampled[(iid, sid)] = per_solver[sid].sampled
        bounds[iid] = compute_bounds([per_solver[sid] for sid in solver_order])
        for j in range(grid.count):
            if any(sampled[(iid, sid)][j] is not None for sid in solver_order):
                pairs.append((iid, j))
    return EvalContext(
        grid=grid,
        solver_order=solver_order,
        instance_ids=ids,
        sampled=sampled,
        bounds=bounds,
        pairs=pairs,
    )


def build_context(
    ds: LabeledDataset, archive: RunArchive, part: str | None = TEST
) -> EvalContext:
    """Load trajectories for one split and keep pairs some solver has solved."""
    if part is not None and not ds.split:
        raise ValueError("dataset has no train/test split yet")
    ids = sorted(
        iid for iid in ds.instance_ids() if part is None or ds.split.get(iid) == part
    )
    trajectories = {
        iid: {sid: archive.read_trajectory(iid, sid) for sid in ds.solver_order}
        for iid in ids
    }
    return context_from_trajectories(ds.grid, ds.solver_order, trajectories)


def pick_sbs(ctx: EvalContext, sbs: str = "auto") -> tuple[str, dict[str, float]]:
    """Resolve the single best solver and return all per-solver metrics."""
    m_s = {sid: ctx.metric(ctx.solver_values(sid)) for sid in ctx.solver_order}
    if sbs != "auto":
        if sbs not in ctx.solver_order:
            raise ValueError(f"pinned SBS {sbs!r} is not a portfolio solver")
        return sbs, m_s
    best = ctx.solver_order[0]
    for sid in ctx.solver_order[1:]:
        if m_s[sid] < m_s[best]:
            best = sid
    return best, m_s


@dataclass
class EvalReport:
    solver_order: list[str]
    vocabulary: list[str]
    n_pairs: int
    n_rows: int
    m_s: dict[str, float]
    sbs_id: str
    m_sbs: float
    m_vbs: float
    m_ms: float
    m_ms_overhead: float | None
    m_hat: float
    m_hat_overhead: float | None
    accuracy: float
    confusion: np.ndarray  # rows: true label, columns: predicted
    breakdown: dict[str, dict[str, int]]
    per_timestep: list[tuple[int, float | None, float | None]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"evaluated pairs: {self.n_pairs}   test rows: {self.n_rows}",
            f"SBS: {self.sbs_id}",
        ]
        for sid in self.solver_order:
            lines.append(f"m[{sid}] = {self.m_s[sid]:.6f}")
        lines.append(f"m_VBS = {self.m_vbs:.6f}")
        lines.append(f"m_SBS = {self.m_sbs:.6f}")
        lines.append(f"m_ms  = {self.m_ms:.6f}")
        lines.append(f"m_hat (no overhead) = {self.m_hat:.6f}")
        if self.m_hat_overhead is not None:
            lines.append(f"m_hat (overhead)    = {self.m_hat_overhead:.6f}")
        lines.append(f"accuracy = {self.accuracy:.6f}")
        for policy, counts in self.breakdown.items():
            lines.append(
                f"breakdown[{policy}]: best={counts['best']} "
                f"non_best={counts['non_best']} none={counts['none']}"
            )
        return "\n".join(lines) + "\n"

    def confusion_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.vocabulary)]
        for i, label in enumerate(self.vocabulary):
            lines.append(label + "," + ",".join(str(int(v)) for v in self.confusion[i]))
        return "\n".join(lines) + "\n"

    def per_timestep_csv(self) -> str:
        lines = ["timestep,m_hat,m_hat_overhead"]
        for j, plain, ov in self.per_timestep:
            lines.append(
                f"{j},{'' if plain is None else repr(plain)},"
                f"{'' if ov is None else repr(ov)}"
            )
        return "\n".join(lines) + "\n"

    def breakdown_csv(self) -> str:
        lines = ["policy,best,non_best,none"]
        for policy, c in self.breakdown.items():
            lines.append(f"{policy},{c['best']},{c['non_best']},{c['none']}")
        return "\n".join(lines) + "\n"


def _per_timestep_series(
    ctx: EvalContext,
    sbs_values: list[int | None],
    vbs_values: list[int | None],
    policy_values: list[int | None],
    overhead_values: list[int | None] | None,
) -> list[tuple[int, float | None, float | None]]:
    buckets: dict[int, list[int]] = {}
    for pos, (_, j) in enumerate(ctx.pairs):
        buckets.setdefault(j, []).append(pos)
    bounds = ctx.bounds_per_pair()
    series = []
    for j in sorted(buckets):
        pos = buckets[j]
        s = math.fsum(normalize(sbs_values[p], bounds[p]) for p in pos)
        v = math.fsum(normalize(vbs_values[p], bounds[p]) for p in pos)
        if s <= v:
            series.append((j, None, None))
            continue
        m = math.fsum(normalize(policy_values[p], bounds[p]) for p in pos)
        plain = (m - v) / (s - v)
        ov = None
        if overhead_values is not None:
            mo = math.fsum(normalize(overhead_values[p], bounds[p]) for p in pos)
            ov = (mo - v) / (s - v)
        series.append((j, plain, ov))
    return series


def evaluate_selector(
    model,
    ds: LabeledDataset,
    archive: RunArchive,
    overhead: bool = True,
    sbs: str = "auto",
) -> EvalReport:
    """Score a trained model's selections on the dataset's test split.

    The replayed policy chooses, for each test row, the model's predicted
    solver and reads that solver's recorded objective at the row's
    timestep.  Per-instance overhead is the dataset's recorded feature
    time plus one measured single prediction here.
    """
    if model.vocabulary != ds.vocabulary():
        raise ValueError("model vocabulary does not match the dataset portfolio")
    if model.schema != ds.schema or model.encoding != ds.encoding:
        raise ValueError("model schema/encoding does not match the dataset")
    if model.params.get("grid", ds.grid.params()) != ds.grid.params():
        raise ValueError("model was trained on a different timestep grid")

    ctx = build_context(ds, archive, TEST)
    test_rows = ds.rows_for(TEST)
    if not test_rows:
        raise ValueError("dataset has no test rows")

    # predictions for every test row; one timed single-row call per instance
    X = ds.feature_matrix(test_rows)
    predicted = model.predict_batch(X)
    vocab = ds.vocabulary()
    policy: dict[Pair, str] = {}
    predict_seconds: dict[str, float] = {}
    for row, cls in zip(test_rows, predicted):
        policy[(row.instance_id, row.timestep_index)] = vocab[cls]
        if overhead and row.instance_id not in predict_seconds:
            t0 = time.perf_counter()
            model.predict_values(row.features.full())
            predict_seconds[row.instance_id] = time.perf_counter() - t0

    truth = ds.label_indices(test_rows)
    k = len(vocab)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    accuracy = float((truth == predicted).sum() / len(truth))

    sbs_id, m_s = pick_sbs(ctx, sbs)
    sbs_values = ctx.solver_values(sbs_id)
    vbs_values = ctx.best_values()
    m_sbs = m_s[sbs_id]
    m_vbs = ctx.metric(vbs_values)

    policy_values = ctx.policy_values(policy)
    m_ms = ctx.metric(policy_values)
    gap = m_hat(m_ms, m_sbs, m_vbs)

    overhead_values = None
    m_ms_overhead = None
    gap_overhead = None
    if overhead:
        overheads = {
            iid: ds.feature_seconds.get(iid, 0.0) + predict_seconds.get(iid, 0.0)
            for iid in ctx.instance_ids
        }
        overhead_values = ctx.policy_values(policy, overheads)
        m_ms_overhead = ctx.metric(overhead_values)
        gap_overhead = m_hat(m_ms_overhead, m_sbs, m_vbs)

    best_values = ctx.best_values()
    breakdown = {
        f"sbs:{sbs_id}": sbs_breakdown(sbs_values, best_values),
        "selector": sbs_breakdown(policy_values, best_values),
    }

    return EvalReport(
        solver_order=ds.solver_order,
        vocabulary=vocab,
        n_pairs=len(ctx.pairs),
        n_rows=len(test_rows),
        m_s=m_s,
        sbs_id=sbs_id,
        m_sbs=m_sbs,
        m_vbs=m_vbs,
        m_ms=m_ms,
        m_ms_overhead=m_ms_overhead,
        m_hat=gap,
        m_hat_overhead=gap_overhead,
        accuracy=accuracy,
        confusion=confusion,
        breakdown=breakdown,
        per_timestep=_per_timestep_series(
            ctx, sbs_values, vbs_values, policy_values, overhead_values
        ),
    )
