"""Dump node/edge tables for every fixture (development aid)."""
from __future__ import annotations

import sys
from pathlib import Path

from fpmfp.frontend import LabelKind, parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

names = sys.argv[1:] or sorted(p.name for p in FIXTURES.glob("*.mir"))
for name in names:
    text = (FIXTURES / name).read_text()
    program = parse_program(text)
    print(f"== {name} ==")
    for proc in program.procedures:
        cfg = proc.cfg
        print(f"  proc {proc.name} start=n{cfg.start} exit=n{cfg.exit}")
        for nid in cfg.node_ids():
            print(f"    n{nid}: {cfg.nodes[nid].statement.to_text()}")
        for eid in cfg.edge_ids():
            e = cfg.edges[eid]
            lab = "" if e.label.kind == LabelKind.NONE else f" [{e.label.to_text()}]"
            back = " (back)" if eid in cfg.back_edges() else ""
            print(f"    e{eid}: n{e.source} -> n{e.target}{lab}{back}")
