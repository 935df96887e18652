"""The command-line tool on the shipped workflow documents.

Runs ``flowcycle validate``, ``graph`` and ``run`` the way a user would,
including a parameter flag generated from the document and the deadlock
exit code.

    python3 demos/cli_tour.py
"""

import subprocess
import sys
import tempfile
from pathlib import Path

DOCS = Path(__file__).resolve().parent / "workflows"


def flowcycle(*args: str) -> int:
    cmd = [sys.executable, "-m", "flowcycle", *args]
    print("$ flowcycle " + " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    text = (proc.stdout + proc.stderr).strip()
    lines = text.splitlines()
    print("\n".join(lines[:12] + (["..."] if len(lines) > 12 else [])))
    print(f"[exit {proc.returncode}]\n")
    return proc.returncode


def main() -> None:
    docking = str(DOCS / "docking.yaml")
    receptor = str(DOCS / "receptor.pdbqt")
    with tempfile.TemporaryDirectory() as tmp:
        flowcycle("validate", docking)
        flowcycle("validate", docking, "--receptor", receptor)
        flowcycle("graph", str(DOCS / "increment_loop.json"))
        flowcycle("run", docking, "--receptor", receptor, "--workdir", f"{tmp}/dock", "--log-level", "WARNING")
        flowcycle("run", str(DOCS / "increment_loop.json"), "--start", "3", "--workdir", f"{tmp}/loop")
        flowcycle("run", str(DOCS / "deadlock_cycle.json"), "--workdir", f"{tmp}/stuck", "--log-level", "ERROR")


if __name__ == "__main__":
    main()
