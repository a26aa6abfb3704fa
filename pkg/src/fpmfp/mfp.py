"""Classic forward MFP solver, intra- and interprocedural.

The interprocedural model keeps one CFG per procedure and treats a call as a
single node.  Bit-vector analyses flow through calls via gen/kill summaries
computed bottom-up over call-graph SCCs; the interval analysis substitutes
the callee's exit intervals for the globals the callee may modify.  Callee
boundary values are the met call-site In values projected to globals (plus
parameters); the solver iterates whole-program rounds until nothing changes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

from .frontend import (
    CallGraph,
    Cfg,
    MiniIrProgram,
    Node,
    Procedure,
    StKind,
    build_call_graph,
)
from .lattice import Analysis, BitvectorAnalysis, WideningState


class NonTermination(RuntimeError):
    """The solver exceeded its step budget without stabilizing."""


MAX_ROUNDS = 10_000


def _intra_fixpoint(
    cfg: Cfg,
    *,
    boundary,
    top,
    meet: Callable,
    transfer: Callable[[Node], object],
    refine: Callable | None = None,
    widening: WideningState | None = None,
    max_steps: int,
) -> tuple[dict[int, object], dict[int, object], int]:
    """Worklist fixpoint over one CFG; returns (node In, edge values, steps).

    ``transfer(node, value)`` must be monotone; values only descend.
    """
    rpo = cfg.rpo()
    pos = {n: i for i, n in enumerate(rpo)}
    back = cfg.back_edges() if widening is not None else frozenset()
    node_in: dict[int, object] = {n: top for n in cfg.nodes}
    node_in[cfg.start] = boundary
    edge_vals: dict[int, object] = {}
    heap: list[tuple[int, int]] = [(pos[n], n) for n in rpo]
    queued = set(cfg.nodes)
    steps = 0
    while heap:
        _, n = heapq.heappop(heap)
        queued.discard(n)
        steps += 1
        if steps > max_steps:
            raise NonTermination(
                f"no fixpoint within {max_steps} steps in proc "
                f"'{cfg.proc_name}'"
            )
        node = cfg.nodes[n]
        out = transfer(node, node_in[n])
        for e in cfg.out_edges(n):
            v = refine(e, node, out) if refine is not None else out
            if widening is not None and e.id in back:
                widening.observe(e.id, v)
                v = widening.apply(e.id, v)
            edge_vals[e.id] = v
            new = meet(node_in[e.target], v)
            if new != node_in[e.target]:
                node_in[e.target] = new
                if e.target not in queued:
                    queued.add(e.target)
                    heapq.heappush(heap, (pos[e.target], e.target))
    return node_in, edge_vals, steps


# ---------------------------------------------------------------------------
# Bit-vector call summaries
# ---------------------------------------------------------------------------

@dataclass
class Summaries:
    """Per-procedure call-transfer masks, projected to globals.

    A call to ``p`` transforms a set as ``(X & ~ksum[p]) | gsum[p]``.
    """

    gsum: dict[str, int]
    ksum: dict[str, int]


def compute_summaries(program: MiniIrProgram, analysis: BitvectorAnalysis,
                      call_graph: CallGraph) -> Summaries:
    gmask = analysis.globals_mask
    gsum: dict[str, int] = {}
    ksum: dict[str, int] = {}
    for scc in call_graph.sccs:  # bottom-up: callees before callers
        for name in scc:
            gsum[name] = 0
            ksum[name] = 0
        while True:
            stable = True
            for name in scc:
                proc = program.by_name[name]
                cfg = proc.cfg
                budget = 200 * (len(cfg.nodes) + 1) + 10_000

                def kill_xfer(node: Node, value: int) -> int:
                    st = node.statement
                    if st.kind == StKind.CALL:
                        if st.callee in program.externs:
                            return value
                        return value | ksum[st.callee]
                    return value | analysis.kill_mask(node.id)

                k_in, _, _ = _intra_fixpoint(
                    cfg, boundary=0, top=analysis.full_mask,
                    meet=lambda a, b: a & b, transfer=kill_xfer,
                    max_steps=budget,
                )
                new_ksum = k_in[cfg.exit] & gmask

                def gen_xfer(node: Node, value: int) -> int:
                    st = node.statement
                    if st.kind == StKind.CALL:
                        if st.callee in program.externs:
                            return value
                        return (value & ~ksum[st.callee]) | gsum[st.callee]
                    return analysis.transfer(node, value)

                g_in, _, _ = _intra_fixpoint(
                    cfg, boundary=0, top=analysis.top(),
                    meet=analysis.meet, transfer=gen_xfer,
                    max_steps=budget,
                )
                new_gsum = g_in[cfg.exit] & gmask
                if (new_gsum, new_ksum) != (gsum[name], ksum[name]):
                    gsum[name] = new_gsum
                    ksum[name] = new_ksum
                    stable = False
            if stable:
                break
    return Summaries(gsum, ksum)


# ---------------------------------------------------------------------------
# Interprocedural driver
# ---------------------------------------------------------------------------

@dataclass
class MfpSolution:
    program: MiniIrProgram
    analysis: Analysis
    node_in: dict[int, object]
    edge_values: dict[int, object]
    boundaries: dict[str, object]
    exit_values: dict[str, object]
    call_graph: CallGraph
    summaries: Summaries | None
    widening: WideningState
    steps: int

    def call_transfer(self, node: Node, value):
        """The call transfer this solution was computed with."""
        return _make_call_transfer(
            self.program, self.analysis, self.call_graph, self.summaries,
            self.exit_values,
        )(node, value)

    def node_transfer(self, node: Node, value):
        if node.statement.kind == StKind.CALL:
            return self.call_transfer(node, value)
        return self.analysis.transfer(node, value)


def _make_call_transfer(program, analysis, call_graph, summaries, exit_values):
    def xfer(node: Node, value):
        callee = node.statement.callee
        if callee in program.externs:
            if analysis.kind == "interval":
                return analysis.havoc_globals(value)
            return value
        if summaries is not None:
            return (value & ~summaries.ksum[callee]) | summaries.gsum[callee]
        return analysis.apply_call(
            value, exit_values.get(callee, analysis.top()),
            call_graph.may_modify[callee],
        )
    return xfer


def _reachable_procs(program: MiniIrProgram, cg: CallGraph) -> frozenset[str]:
    seen = {program.entry}
    stack = [program.entry]
    while stack:
        for callee in sorted(cg.callees[stack.pop()]):
            if callee not in seen:
                seen.add(callee)
                stack.append(callee)
    return frozenset(seen)


def solve_mfp(program: MiniIrProgram, analysis: Analysis, *,
              widen: bool = True,
              call_graph: CallGraph | None = None) -> MfpSolution:
    """Whole-program MFP solution for one analysis."""
    cg = call_graph or build_call_graph(program)
    summaries = (
        compute_summaries(program, analysis, cg)
        if isinstance(analysis, BitvectorAnalysis) else None
    )
    widening = WideningState(widen and analysis.kind == "interval")
    reachable = _reachable_procs(program, cg)
    # Call sites per callee, in node-id order for deterministic meets.
    sites: dict[str, list[int]] = {p.name: [] for p in program.procedures}
    for proc in program.procedures:
        for nid in proc.cfg.node_ids():
            st = proc.cfg.nodes[nid].statement
            if st.kind == StKind.CALL and st.callee in sites:
                sites[st.callee].append(nid)

    exit_values: dict[str, object] = {}
    boundaries: dict[str, object] = {}
    node_in: dict[int, object] = {}
    edge_values: dict[int, object] = {}
    steps_total = 0

    for _ in range(MAX_ROUNDS):
        call_xfer = _make_call_transfer(
            program, analysis, cg, summaries, dict(exit_values))

        def node_transfer(node: Node, value):
            if node.statement.kind == StKind.CALL:
                return call_xfer(node, value)
            return analysis.transfer(node, value)

        changed = False
        for idx, proc in enumerate(program.procedures):
            bi = _boundary_for(
                program, analysis, proc, idx, sites, node_in, reachable,
                cg, widening,
            )
            budget = 2_000 * (len(proc.cfg.nodes) + 1) + 10_000
            p_in, p_edges, steps = _intra_fixpoint(
                proc.cfg, boundary=bi, top=analysis.top(),
                meet=analysis.meet, transfer=node_transfer,
                refine=analysis.refine, widening=widening,
                max_steps=budget,
            )
            steps_total += steps
            p_exit = p_in[proc.cfg.exit]
            if (boundaries.get(proc.name) != bi
                    or exit_values.get(proc.name) != p_exit
                    or any(node_in.get(n) != v for n, v in p_in.items())
                    or any(edge_values.get(e) != v
                           for e, v in p_edges.items())):
                changed = True
            boundaries[proc.name] = bi
            exit_values[proc.name] = p_exit
            node_in.update(p_in)
            edge_values.update(p_edges)
        if not changed:
            break
    else:
        raise NonTermination(
            f"interprocedural rounds exceeded {MAX_ROUNDS}")

    return MfpSolution(
        program=program, analysis=analysis, node_in=node_in,
        edge_values=edge_values, boundaries=boundaries,
        exit_values=exit_values, call_graph=cg, summaries=summaries,
        widening=widening, steps=steps_total,
    )


def _boundary_for(program, analysis, proc: Procedure, idx: int,
                  sites: dict[str, list[int]], node_in: dict[int, object],
                  reachable: frozenset[str], cg: CallGraph,
                  widening: WideningState):
    """Boundary value for one procedure in the current round."""
    is_entry = proc.name == program.entry
    if proc.name not in reachable:
        return analysis.entry_boundary(proc)
    live_sites = [
        nid for nid in sites[proc.name]
        if program.proc_of_node(nid).name in reachable
    ]
    if not live_sites and not is_entry:
        return analysis.entry_boundary(proc)
    if live_sites:
        met = analysis.top()
        for nid in live_sites:
            met = analysis.meet(met, node_in.get(nid, analysis.top()))
        bi = analysis.callee_boundary(proc, met)
        if is_entry:
            bi = analysis.meet(analysis.entry_boundary(proc), bi)
        if (analysis.kind == "interval" and proc.name in cg.recursive):
            # Boundary values of recursive procedures can descend through
            # call-graph cycles with no CFG back edge to widen on; use a
            # synthetic per-procedure key.
            key = -1 - idx
            widening.observe(key, bi)
            bi = widening.apply(key, bi)
        return bi
    return analysis.entry_boundary(proc)
