"""Execution harness: run solver adapters, record incumbent trajectories.

Adapters are external executables that follow the competition output
convention: a line ``o <integer>`` on standard output announces a new
incumbent objective value; everything else is ignored.  The harness
timestamps each line against process spawn, terminates the child at the
budget (hard kill after a 1 s grace period), keeps strictly improving
events only, and samples them onto a :class:`~pbselect.grid.TimestepGrid`
as a step function (best value achieved at or before each grid point).

A run archive is a directory with one subdirectory per instance holding a
``<solver>.traj`` file (metadata line, event lines, sampled line) and the
raw timestamped stdout capture in ``<solver>.log``; parsing the raw log
reproduces the recorded events exactly.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .grid import TimestepGrid, make_grid

logger = logging.getLogger(__name__)

EVENT_STREAM = "event-stream"
FINAL_ONLY = "final-only"

_INT_RE = re.compile(r"[+-]?\d+\Z")
_UNSAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")


class AdapterError(RuntimeError):
    """Adapter could not be launched (missing executable, bad command)."""


@dataclass(frozen=True)
class SolverAdapter:
    """An external solver launched via a command template.

    The template may contain ``{instance}``, ``{budget}`` (seconds) and
    ``{log}`` (a scratch path the adapter may use) placeholders, either in
    a single shell-like string or a pre-split argument list.
    """

    solver_id: str
    command: str | tuple[str, ...]
    parse_mode: str = EVENT_STREAM

    def __post_init__(self):
        if self.parse_mode not in (EVENT_STREAM, FINAL_ONLY):
            raise ValueError(f"unknown parse mode {self.parse_mode!r}")

    def argv(self, instance: str, budget: float, log: str = "") -> list[str]:
        parts = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        subst = {"instance": str(instance), "budget": repr(float(budget)), "log": log}
        return [p.format_map(subst) for p in parts]


@dataclass
class PortfolioConfig:
    adapters: list[SolverAdapter]
    parallelism: int = 1

    def __post_init__(self):
        ids = [a.solver_id for a in self.adapters]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate solver ids in portfolio")

    @property
    def solver_ids(self) -> list[str]:
        return [a.solver_id for a in self.adapters]

    def by_id(self, solver_id: str) -> SolverAdapter:
        for a in self.adapters:
            if a.solver_id == solver_id:
                return a
        raise KeyError(f"solver {solver_id!r} not in portfolio")

    @classmethod
    def load(cls, path: str | Path) -> "PortfolioConfig":
        data = json.loads(Path(path).read_text())
        adapters = [
            SolverAdapter(
                solver_id=entry["id"],
                command=tuple(entry["command"]) if isinstance(entry["command"], list) else entry["command"],
                parse_mode=entry.get("parse_mode", EVENT_STREAM),
            )
            for entry in data["solvers"]
        ]
        return cls(adapters=adapters, parallelism=int(data.get("parallelism", 1)))


@dataclass(frozen=True)
class Trajectory:
    """One solver's incumbent history on one instance, plus grid samples.

    ``events`` are (seconds, objective) pairs, increasing in time and
    strictly decreasing in objective.  ``sampled[j]`` is the best objective
    achieved at or before grid point j, or None while no solution exists.
    """

    solver_id: str
    instance_id: str
    horizon: float
    events: tuple[tuple[float, int], ...]
    sampled: tuple[int | None, ...]
    status: str = "ok"

    def achievement_time(self, j: int, grid: TimestepGrid) -> float | None:
        """Time of the event that produced sampled[j]."""
        t_j = grid.points[j]
        best = None
        for t, _ in self.events:
            if t <= t_j:
                best = t
            else:
                break
        return best

    def achievement_times(self, grid: TimestepGrid) -> list[float | None]:
        out: list[float | None] = [None] * grid.count
        ei = 0
        last: float | None = None
        for j, t_j in enumerate(grid.points):
            while ei < len(self.events) and self.events[ei][0] <= t_j:
                last = self.events[ei][0]
                ei += 1
            out[j] = last
        return out


def parse_events(
    lines: list[tuple[float, str]], parse_mode: str, horizon: float
) -> tuple[tuple[float, int], ...]:
    """Extract incumbent events from timestamped output lines.

    Lines after the horizon are dropped; malformed ``o`` lines are skipped
    with a warning; in final-only mode just the last incumbent line counts.
    Non-improving values are discarded so the result strictly improves.
    """
    raw: list[tuple[float, int]] = []
    for t, line in lines:
        if t > horizon:
            continue
        parts = line.split()
        if not parts or parts[0] != "o":
            continue
        if len(parts) != 2 or not _INT_RE.match(parts[1]):
            logger.warning("skipping unparseable event line: %r", line)
            continue
        raw.append((t, int(parts[1])))
    if parse_mode == FINAL_ONLY:
        raw = raw[-1:]
    events: list[tuple[float, int]] = []
    for t, v in raw:
        if not events or v < events[-1][1]:
            events.append((t, v))
    return tuple(events)


def sample_events(
    events: tuple[tuple[float, int], ...], grid: TimestepGrid
) -> tuple[int | None, ...]:
    """Step-function sample: best value among events at time <= t_j."""
    sampled: list[int | None] = [None] * grid.count
    ei = 0
    best: int | None = None
    for j, t_j in enumerate(grid.points):
        while ei < len(events) and events[ei][0] <= t_j:
            best = events[ei][1]
            ei += 1
        sampled[j] = best
    return tuple(sampled)


def run_adapter(
    adapter: SolverAdapter, instance_path: str | Path, budget: float, log_path: str = ""
) -> tuple[list[tuple[float, str]], str]:
    """Launch the adapter and capture timestamped stdout lines.

    The child gets ``budget`` seconds from spawn, then SIGTERM, then
    SIGKILL one second later.  Returns the captured lines and a status:
    "ok" for a clean exit or a budget kill, "crashed" for a nonzero exit.
    """
    argv = adapter.argv(str(instance_path), budget, log_path)
    try:
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            errors="replace",
        )
    except (FileNotFoundError, PermissionError, OSError) as exc:
        raise AdapterError(f"cannot launch solver {adapter.solver_id!r}: {exc}") from exc

    start = time.monotonic()
    lines: list[tuple[float, str]] = []

    def _pump():
        assert proc.stdout is not None
        for raw in proc.stdout:
            lines.append((round(time.monotonic() - start, 6), raw.rstrip("\r\n")))

    reader = threading.Thread(target=_pump, daemon=True)
    reader.start()
    killed = False
    try:
        proc.wait(timeout=budget)
    except subprocess.TimeoutExpired:
        killed = True
        proc.terminate()
        try:
            proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
    reader.join()
    status = "ok" if killed or proc.returncode == 0 else "crashed"
    return lines, status


def run_solver(
    adapter: SolverAdapter, instance_path: str | Path, grid: TimestepGrid, instance_id: str = ""
) -> tuple[Trajectory, list[tuple[float, str]]]:
    """Run one adapter for the grid horizon; returns (trajectory, raw lines)."""
    lines, status = run_adapter(adapter, instance_path, grid.horizon)
    events = parse_events(lines, adapter.parse_mode, grid.horizon)
    traj = Trajectory(
        solver_id=adapter.solver_id,
        instance_id=instance_id or Path(instance_path).stem,
        horizon=grid.horizon,
        events=events,
        sampled=sample_events(events, grid),
        status=status,
    )
    return traj, lines


# ---------------------------------------------------------------------------
# archive serialization

_NA = "NA"


def trajectory_to_text(traj: Trajectory, grid: TimestepGrid) -> str:
    meta = {
        "solver": traj.solver_id,
        "instance": traj.instance_id,
        "horizon": grid.horizon,
        "count": grid.count,
        "t_min": grid.t_min,
        "status": traj.status,
    }
    lines = [json.dumps(meta)]
    lines.extend(f"{t!r} {v}" for t, v in traj.events)
    lines.append("sampled " + " ".join(_NA if v is None else str(v) for v in traj.sampled))
    return "\n".join(lines) + "\n"


def trajectory_from_text(text: str) -> tuple[Trajectory, dict]:
    lines = text.splitlines()
    meta = json.loads(lines[0])
    if not lines[-1].startswith("sampled"):
        raise ValueError("trajectory file missing sampled record")
    events = []
    for line in lines[1:-1]:
        t_str, v_str = line.split()
        events.append((float(t_str), int(v_str)))
    sampled = tuple(
        None if tok == _NA else int(tok) for tok in lines[-1].split()[1:]
    )
    traj = Trajectory(
        solver_id=meta["solver"],
        instance_id=meta["instance"],
        horizon=float(meta["horizon"]),
        events=tuple(events),
        sampled=sampled,
        status=meta.get("status", "ok"),
    )
    return traj, meta


def raw_log_to_text(lines: list[tuple[float, str]]) -> str:
    return "".join(f"[{t!r}] {line}\n" for t, line in lines)


def raw_log_from_text(text: str) -> list[tuple[float, str]]:
    out = []
    for raw in text.splitlines():
        if not raw.startswith("["):
            continue
        stamp, _, rest = raw.partition("] ")
        out.append((float(stamp[1:]), rest))
    return out


def instance_id_for(path: str | Path, benchmark_id: str) -> str:
    stem = Path(path).stem
    return _UNSAFE_RE.sub("_", f"{benchmark_id}__{stem}")


class RunArchive:
    """On-disk store of trajectories, resumable and safe for threaded writers."""

    def __init__(self, root: str | Path, grid: TimestepGrid | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        grid_file = self.root / "grid.json"
        if grid_file.exists():
            stored = json.loads(grid_file.read_text())
            on_disk = make_grid(stored["count"], stored["horizon"], stored["t_min"])
            if grid is not None and grid.params() != on_disk.params():
                raise ValueError("archive already uses a different timestep grid")
            self.grid = on_disk
        else:
            if grid is None:
                raise ValueError(f"no grid.json in {self.root} and no grid given")
            grid_file.write_text(json.dumps(grid.params()) + "\n")
            self.grid = grid
        self._lock = threading.Lock()
        self._manifest: dict[str, tuple[str, str]] = {}
        manifest = self.root / "instances.tsv"
        if manifest.exists():
            for line in manifest.read_text().splitlines():
                iid, bench, path = line.split("\t")
                self._manifest[iid] = (bench, path)

    def _pair_base(self, instance_id: str, solver_id: str) -> Path:
        return self.root / instance_id / _UNSAFE_RE.sub("_", solver_id)

    def register_instance(self, instance_id: str, benchmark_id: str, path: str) -> None:
        with self._lock:
            if instance_id in self._manifest:
                return
            self._manifest[instance_id] = (benchmark_id, path)
            with open(self.root / "instances.tsv", "a") as fh:
                fh.write(f"{instance_id}\t{benchmark_id}\t{path}\n")

    def instances(self) -> list[tuple[str, str, str]]:
        """(instance_id, benchmark_id, path) sorted by (benchmark, instance)."""
        rows = [(bench, iid, path) for iid, (bench, path) in self._manifest.items()]
        return [(iid, bench, path) for bench, iid, path in sorted(rows)]

    def has(self, instance_id: str, solver_id: str) -> bool:
        return self._pair_base(instance_id, solver_id).with_suffix(".traj").exists()

    def write_trajectory(self, traj: Trajectory, raw_lines: list[tuple[float, str]] | None = None) -> None:
        base = self._pair_base(traj.instance_id, traj.solver_id)
        with self._lock:
            base.parent.mkdir(parents=True, exist_ok=True)
            if raw_lines is not None:
                base.with_suffix(".log").write_text(raw_log_to_text(raw_lines))
            base.with_suffix(".traj").write_text(trajectory_to_text(traj, self.grid))

    def read_trajectory(self, instance_id: str, solver_id: str) -> Trajectory:
        text = self._pair_base(instance_id, solver_id).with_suffix(".traj").read_text()
        traj, meta = trajectory_from_text(text)
        if meta.get("count") != self.grid.count:
            raise ValueError(
                f"trajectory {instance_id}/{solver_id} was recorded on a different grid"
            )
        return traj

    def read_raw_log(self, instance_id: str, solver_id: str) -> list[tuple[float, str]]:
        return raw_log_from_text(
            self._pair_base(instance_id, solver_id).with_suffix(".log").read_text()
        )

    def record_failure(self, instance_id: str, solver_id: str, message: str) -> None:
        base = self._pair_base(instance_id, solver_id)
        with self._lock:
            base.parent.mkdir(parents=True, exist_ok=True)
            base.with_suffix(".error").write_text(message + "\n")

    def failures(self) -> list[tuple[str, str, str]]:
        out = []
        for err in sorted(self.root.glob("*/*.error")):
            out.append((err.parent.name, err.stem, err.read_text().strip()))
        return out


def run_portfolio(
    portfolio: PortfolioConfig,
    instance_paths: list[str | Path],
    grid: TimestepGrid,
    archive_root: str | Path,
    parallelism: int | None = None,
    benchmark_of=None,
) -> RunArchive:
    """Run every (solver, instance) pair that the archive does not hold yet.

    Failures are isolated per pair and recorded as ``.error`` files; those
    pairs are retried on the next invocation.  ``benchmark_of`` maps an
    instance path to its benchmark id (default: parent directory name).
    """
    archive = RunArchive(archive_root, grid)
    if benchmark_of is None:
        benchmark_of = lambda p: Path(p).parent.name or "default"

    jobs: list[tuple[SolverAdapter, str, str]] = []
    for path in sorted(str(p) for p in instance_paths):
        bench = benchmark_of(path)
        iid = instance_id_for(path, bench)
        archive.register_instance(iid, bench, path)
        for adapter in portfolio.adapters:
            if not archive.has(iid, adapter.solver_id):
                jobs.append((adapter, path, iid))

    def _work(job):
        adapter, path, iid = job
        try:
            traj, raw = run_solver(adapter, path, grid, instance_id=iid)
            archive.write_trajectory(traj, raw)
        except AdapterError as exc:
            logger.error("pair (%s, %s) failed: %s", iid, adapter.solver_id, exc)
            archive.record_failure(iid, adapter.solver_id, str(exc))

    workers = parallelism if parallelism is not None else portfolio.parallelism
    if workers <= 1:
        for job in jobs:
            _work(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_work, jobs))
    return archive
