import sys
import textwrap
from pathlib import Path

import pytest

# A stub "solver" emitting scripted incumbent lines; arguments are the
# instance path, the budget, and a plan string like "0:o 12|0.05:o 7"
# of (delay seconds, line) steps relative to the previous line.
_STUB = textwrap.dedent(
    """\
    import sys, time
    plan = sys.argv[3] if len(sys.argv) > 3 else ""
    for step in [s for s in plan.split("|") if s]:
        delay, _, line = step.partition(":")
        time.sleep(float(delay))
        print(line, flush=True)
    sys.exit(int(sys.argv[4]) if len(sys.argv) > 4 else 0)
    """
)


@pytest.fixture(scope="session")
def stub_solver(tmp_path_factory):
    """Returns a function building a command template for a scripted solver."""
    script = tmp_path_factory.mktemp("stub") / "stub_solver.py"
    script.write_text(_STUB)

    def command(plan: str, exit_code: int = 0) -> tuple[str, ...]:
        return (sys.executable, str(script), "{instance}", "{budget}", plan, str(exit_code))

    return command


@pytest.fixture()
def opb_file(tmp_path):
    path = tmp_path / "bench_a" / "toy.opb"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "* #variable= 2 #constraint= 1\nmin: +1 x1 -2 x2 ;\n+1 x1 +1 x2 >= 1 ;\n"
    )
    return path
