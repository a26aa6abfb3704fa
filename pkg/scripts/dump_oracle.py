"""Dev aid: compare MFP solutions against path-tree oracle meets."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from fpmfp.frontend import parse_program
from fpmfp.lattice import make_analysis
from fpmfp.mfp import solve_mfp
from fpmfp.mips import detect_mips
from fpmfp.oracle import (
    contains_segment,
    execute_all,
    mips_free_meets,
    solution_semantics,
)

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

for path in sorted(FIXTURES.glob("*.mir")):
    name = path.stem
    program = parse_program(path.read_text())
    universe = detect_mips(program)
    for analysis_name in ("interval", "rd", "must-defined"):
        analysis = make_analysis(analysis_name, program)
        solution = solve_mfp(program, analysis)
        bad = []
        for proc in program.procedures:
            node_transfer, refine = solution_semantics(solution, proc)
            meets = mips_free_meets(
                proc.cfg, universe, proc.name,
                boundary=solution.boundaries[proc.name],
                top=analysis.top(),
                meet=analysis.meet,
                node_transfer=node_transfer,
                refine=refine,
            )
            for nid, oracle_val in meets.node_in.items():
                mfp_val = solution.node_in[nid]
                if not analysis.leq(mfp_val, oracle_val):
                    bad.append((proc.name, nid))
        status = "ok" if not bad else f"VIOLATION {bad}"
        print(f"{name:15s} {analysis_name:13s} {status}")
    # Concrete traces never contain a detected segment.
    runs = execute_all(program, run_limit=200_000)
    hits = 0
    for m in universe.all:
        for run in runs:
            for trace in run:
                if trace.proc == m.proc and contains_segment(
                        trace.edges, m.edges):
                    hits += 1
    print(f"{name:15s} executor: {len(runs)} runs, segment hits={hits}")
