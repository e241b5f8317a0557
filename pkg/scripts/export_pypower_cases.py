"""Write PYPOWER's bundled IEEE cases out as MATPOWER-format ``.m`` files.

    python3 scripts/export_pypower_cases.py cases/
"""

import importlib
import sys
from pathlib import Path

CASES = ("case14", "case30", "case57", "case118")


def to_matpower(name, ppc):
    out = [f"function mpc = {name}", "mpc.version = '2';", f"mpc.baseMVA = {ppc['baseMVA']:g};"]
    for table in ("bus", "gen", "branch", "gencost"):
        out.append(f"mpc.{table} = [")
        for row in ppc[table]:
            out.append("\t" + "\t".join(f"{v:.10g}" for v in row) + ";")
        out.append("];")
    return "\n".join(out) + "\n"


def main(dest):
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    for name in CASES:
        mod = importlib.import_module(f"pypower.{name}")
        ppc = getattr(mod, name)()
        (dest / f"{name}.m").write_text(to_matpower(name, ppc))
        print("wrote", dest / f"{name}.m")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "cases")
