"""Dev aid: folded FPMFP vs MFP on each fixture, plus per-edge pairs."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from fpmfp.frontend import parse_program
from fpmfp.lattice import make_analysis
from fpmfp.lifted import solve_fpmfp_interprocedural, sorted_keys
from fpmfp.mfp import solve_mfp
from fpmfp.mips import detect_mips

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def show(name: str, analysis_name: str, edges=(), nodes=()):
    program = parse_program((FIXTURES / f"{name}.mir").read_text())
    universe = detect_mips(program)
    analysis = make_analysis(analysis_name, program)
    mfp = solve_mfp(program, analysis)
    fp = solve_fpmfp_interprocedural(program, analysis, universe)
    print(f"== {name} / {analysis_name}  (|U|={len(universe)}) "
          f"max_pairs={fp.stats.max_pairs} blocked={fp.stats.blocked}")
    a2 = make_analysis(analysis_name, program)
    for nid in nodes:
        print(f"  In(n{nid}):  MFP={a2.format(mfp.node_in[nid])}   "
              f"FPMFP={a2.format(fp.folded_in[nid])}")
    for eid in edges:
        lifted = fp.edge_values.get(eid, {})
        pairs = ", ".join(
            f"<{sorted(k)}: {a2.format(lifted[k])}>"
            for k in sorted_keys(lifted))
        print(f"  e{eid}: MFP={a2.format(mfp.edge_values.get(eid, a2.top()))}"
              f"   FPMFP={a2.format(fp.folded_edges.get(eid, a2.top()))}"
              f"   pairs=[{pairs}]")


if __name__ == "__main__":
    show("fig2", "interval", edges=(3, 5, 6), nodes=(6,))
    show("fig3", "interval", edges=(3, 4))
    show("fig4", "interval", edges=(4, 5, 6, 7, 8))
    show("fig7", "interval", edges=(3, 4, 5, 8, 9), nodes=(5,))
    show("fig8", "interval", edges=(7, 9))
    show("fig10", "must-defined", edges=(5, 6, 7, 9, 10))
    show("fig11", "must-defined", edges=(4, 5, 6, 7, 8))
    show("fig12", "interval", edges=(3, 6, 7, 8), nodes=(6,))
    show("loop", "interval", nodes=(2,))
    show("summary_block", "rd", nodes=(3,))
    show("nlkain_like", "rd", nodes=(6,))
    show("stripcc_like", "must-defined", nodes=(5, 6))
    show("sphinx_like", "rd", nodes=(6,))
