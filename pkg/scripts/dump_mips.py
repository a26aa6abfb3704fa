"""Dev aid: dump detected MIPS for every fixture."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from fpmfp.frontend import parse_program
from fpmfp.mips import detect_mips

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

for path in sorted(FIXTURES.glob("*.mir")):
    program = parse_program(path.read_text())
    universe = detect_mips(program)
    print(f"== {path.stem}: {len(universe)} MIPS")
    for m in universe.all:
        route = "->".join(f"e{e}" for e in m.edges)
        inner = ",".join(f"e{e}" for e in m.inner) or "-"
        print(f"   id={m.id} proc={m.proc} {route}  start=e{m.start} "
              f"inner={inner} end=e{m.end} P={m.satisfies_p}")
