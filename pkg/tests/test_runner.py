import random

import pytest

from pbselect.grid import make_grid
from pbselect.runner import (
    AdapterError,
    PortfolioConfig,
    RunArchive,
    SolverAdapter,
    Trajectory,
    instance_id_for,
    parse_events,
    raw_log_from_text,
    raw_log_to_text,
    run_portfolio,
    run_solver,
    sample_events,
    trajectory_from_text,
    trajectory_to_text,
)

from gen import random_events
from oracles import oracle_sample

GRID2 = make_grid(2, 10.0, 1.0)


def _traj(events, grid=GRID2, solver="s", instance="i"):
    return Trajectory(
        solver_id=solver,
        instance_id=instance,
        horizon=grid.horizon,
        events=tuple(events),
        sampled=sample_events(tuple(events), grid),
    )


# --- sampling ----------------------------------------------------------------


def test_sampling_definition():
    events = ((0.5, 12), (2.0, 7))
    assert sample_events(events, GRID2) == (12, 7)


def test_sampling_empty_events():
    assert sample_events((), GRID2) == (None, None)


def test_parse_events_discards_non_improving():
    lines = [(0.1, "o 5"), (0.2, "o 9"), (0.3, "o 4")]
    assert parse_events(lines, "event-stream", 10.0) == ((0.1, 5), (0.3, 4))


def test_parse_events_skips_malformed_and_ignores_chatter(caplog):
    lines = [
        (0.1, "c preprocessing"),
        (0.2, "o not-a-number"),
        (0.3, "o 5"),
        (0.4, "objective 3"),
        (0.5, "s SATISFIABLE"),
    ]
    with caplog.at_level("WARNING"):
        events = parse_events(lines, "event-stream", 10.0)
    assert events == ((0.3, 5),)
    assert any("unparseable" in r.message for r in caplog.records)


def test_parse_events_final_only_keeps_last():
    lines = [(0.1, "o 9"), (0.2, "o 7"), (0.3, "o 5")]
    assert parse_events(lines, "final-only", 10.0) == ((0.3, 5),)


def test_parse_events_drops_past_horizon():
    lines = [(0.1, "o 9"), (11.0, "o 1")]
    assert parse_events(lines, "event-stream", 10.0) == ((0.1, 9),)


def test_sampling_matches_bruteforce_on_random_events():
    rng = random.Random(9)
    grid = make_grid(8, 50.0, 0.5)
    for _ in range(300):
        events = random_events(rng, grid.horizon)
        sampled = sample_events(events, grid)
        for j, t in enumerate(grid.points):
            assert sampled[j] == oracle_sample(events, t)


def test_grid_refinement_preserves_shared_points():
    rng = random.Random(10)
    coarse = make_grid(3, 100.0, 1.0)
    fine = make_grid(5, 100.0, 1.0)
    shared = {t: (coarse.points.index(t), fine.points.index(t)) for t in coarse.points if t in fine.points}
    assert len(shared) == 3
    for _ in range(100):
        events = random_events(rng, 100.0)
        sc = sample_events(events, coarse)
        sf = sample_events(events, fine)
        for jc, jf in shared.values():
            assert sc[jc] == sf[jf]


def test_trajectory_monotone_and_defined_suffix():
    rng = random.Random(11)
    grid = make_grid(10, 50.0, 0.5)
    for _ in range(200):
        sampled = sample_events(random_events(rng, grid.horizon), grid)
        seen = False
        prev = None
        for v in sampled:
            if v is None:
                assert not seen  # once defined, stays defined
            else:
                if seen:
                    assert v <= prev
                seen, prev = True, v


def test_achievement_times():
    grid = make_grid(3, 100.0, 1.0)
    traj = _traj(((0.5, 12), (5.0, 7)), grid)
    assert traj.achievement_times(grid) == [0.5, 5.0, 5.0]
    assert traj.achievement_time(0, grid) == 0.5
    assert _traj((), grid).achievement_times(grid) == [None, None, None]


# --- trajectory and raw-log round-trips ---------------------------------------


def test_trajectory_text_roundtrip():
    grid = make_grid(4, 1000.0, 1.0)
    traj = _traj(((0.25, 10**40), (900.0, -3)), grid)
    again, meta = trajectory_from_text(trajectory_to_text(traj, grid))
    assert again == traj
    assert meta["count"] == 4


def test_raw_log_reproduces_events_exactly():
    rng = random.Random(13)
    grid = make_grid(5, 20.0, 0.1)
    for _ in range(50):
        lines = []
        t = 0.0
        for _ in range(rng.randint(0, 6)):
            t = round(t + rng.uniform(0, 5), 6)
            lines.append((t, rng.choice(["o " + str(rng.randint(-5, 30)), "c noise"])))
        text = raw_log_to_text(lines)
        assert raw_log_from_text(text) == lines
        direct = parse_events(lines, "event-stream", grid.horizon)
        replayed = parse_events(raw_log_from_text(text), "event-stream", grid.horizon)
        assert direct == replayed


# --- live subprocess runs ------------------------------------------------------


def test_run_solver_records_stream(stub_solver, opb_file):
    grid = make_grid(3, 4.0, 0.5)
    adapter = SolverAdapter("fast", stub_solver("0:o 12|0.05:o 7"))
    traj, raw = run_solver(adapter, opb_file, grid, instance_id="toy")
    assert [v for _, v in traj.events] == [12, 7]
    assert traj.sampled == (7, 7, 7)  # both events land before the 0.5 s point
    assert traj.status == "ok"
    assert parse_events(raw, "event-stream", grid.horizon) == traj.events


def test_run_solver_empty_output(stub_solver, opb_file):
    grid = make_grid(2, 2.0, 0.5)
    adapter = SolverAdapter("mute", stub_solver(""))
    traj, _ = run_solver(adapter, opb_file, grid)
    assert traj.sampled == (None, None)


def test_run_solver_crash_keeps_events(stub_solver, opb_file):
    grid = make_grid(2, 2.0, 0.5)
    adapter = SolverAdapter("crashy", stub_solver("0:o 11", exit_code=3))
    traj, _ = run_solver(adapter, opb_file, grid)
    assert traj.status == "crashed"
    assert [v for _, v in traj.events] == [11]


def test_run_solver_kills_at_horizon(stub_solver, opb_file):
    grid = make_grid(2, 1.0, 0.2)
    adapter = SolverAdapter("slow", stub_solver("0:o 9|30:o 1"))
    traj, _ = run_solver(adapter, opb_file, grid)
    assert [v for _, v in traj.events] == [9]
    assert traj.status == "ok"  # budget kill is not a crash


def test_missing_executable_is_hard_error(opb_file):
    adapter = SolverAdapter("ghost", ("/nonexistent/solver", "{instance}"))
    with pytest.raises(AdapterError):
        run_solver(adapter, opb_file, make_grid(2, 1.0, 0.2))


# --- archive and portfolio runs ------------------------------------------------


def _portfolio(stub_solver):
    return PortfolioConfig(
        adapters=[
            SolverAdapter("alpha", stub_solver("0:o 12|0.05:o 7")),
            SolverAdapter("beta", stub_solver("0:o 9")),
        ],
        parallelism=2,
    )


def _instances(tmp_path, n=3):
    paths = []
    for i in range(n):
        p = tmp_path / "benchX" / f"inst{i}.opb"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("* #variable= 1 #constraint= 1\nmin: +1 x1 ;\n+1 x1 >= 0 ;\n")
        paths.append(p)
    return paths


def test_run_portfolio_cardinality_and_resume(stub_solver, tmp_path):
    grid = make_grid(3, 2.0, 0.2)
    portfolio = _portfolio(stub_solver)
    paths = _instances(tmp_path)
    archive = run_portfolio(portfolio, paths, grid, tmp_path / "arch")
    pairs = [(iid, sid) for iid, _, _ in archive.instances() for sid in portfolio.solver_ids]
    assert len(pairs) == 6
    assert all(archive.has(iid, sid) for iid, sid in pairs)

    # resume: drop one pair, rerun, only that pair is filled back in
    victim = pairs[0]
    mtimes = {
        p: (archive._pair_base(*p).with_suffix(".traj")).stat().st_mtime_ns for p in pairs
    }
    archive._pair_base(*victim).with_suffix(".traj").unlink()
    archive2 = run_portfolio(portfolio, paths, grid, tmp_path / "arch")
    assert archive2.has(*victim)
    for p in pairs:
        if p != victim:
            assert archive2._pair_base(*p).with_suffix(".traj").stat().st_mtime_ns == mtimes[p]


def test_run_portfolio_parallel_matches_sequential(stub_solver, tmp_path):
    grid = make_grid(3, 2.0, 0.2)
    portfolio = _portfolio(stub_solver)
    paths = _instances(tmp_path)
    seq = run_portfolio(portfolio, paths, grid, tmp_path / "a1", parallelism=1)
    par = run_portfolio(portfolio, paths, grid, tmp_path / "a2", parallelism=4)
    assert seq.instances() == par.instances()
    for iid, _, _ in seq.instances():
        for sid in portfolio.solver_ids:
            a = seq.read_trajectory(iid, sid)
            b = par.read_trajectory(iid, sid)
            assert [v for _, v in a.events] == [v for _, v in b.events]
            assert a.sampled == b.sampled


def test_run_portfolio_isolates_failures(stub_solver, tmp_path):
    grid = make_grid(2, 1.0, 0.2)
    portfolio = PortfolioConfig(
        adapters=[
            SolverAdapter("ok", stub_solver("0:o 5")),
            SolverAdapter("ghost", ("/nonexistent/solver", "{instance}")),
        ]
    )
    paths = _instances(tmp_path, n=2)
    archive = run_portfolio(portfolio, paths, grid, tmp_path / "arch")
    assert len(archive.failures()) == 2
    for iid, _, _ in archive.instances():
        assert archive.has(iid, "ok")
        assert not archive.has(iid, "ghost")


def test_archive_rejects_mismatched_grid(tmp_path):
    RunArchive(tmp_path / "a", make_grid(3, 2.0, 0.2))
    with pytest.raises(ValueError):
        RunArchive(tmp_path / "a", make_grid(4, 2.0, 0.2))
    # reopening without a grid picks up the stored one
    assert RunArchive(tmp_path / "a").grid.count == 3


def test_portfolio_config_file(tmp_path):
    cfg = tmp_path / "portfolio.json"
    cfg.write_text(
        '{"parallelism": 3, "solvers": ['
        '{"id": "a", "command": "solver-a {instance} {budget}"},'
        '{"id": "b", "command": ["solver-b", "{instance}"], "parse_mode": "final-only"}]}'
    )
    portfolio = PortfolioConfig.load(cfg)
    assert portfolio.parallelism == 3
    assert portfolio.solver_ids == ["a", "b"]
    assert portfolio.by_id("b").parse_mode == "final-only"
    argv = portfolio.by_id("a").argv("inst.opb", 2.5)
    assert argv == ["solver-a", "inst.opb", "2.5"]
    with pytest.raises(KeyError):
        portfolio.by_id("zzz")


def test_duplicate_solver_ids_rejected():
    with pytest.raises(ValueError):
        PortfolioConfig(adapters=[SolverAdapter("x", "a"), SolverAdapter("x", "b")])


def test_instance_id_sanitized():
    assert instance_id_for("/data/set one/foo bar.opb", "set one") == "set_one__foo_bar"
