"""A full experiment through the command-line runner.

Runs a small two-algorithm plan on virtual time, post-processes the
results directory, and then replays the recorded manifest into a second
directory to show that the experiment is reproducible byte for byte.

Virtual time keeps this demo fast and deterministic. Drop the
--virtual-time flag (and give --cost-ms a real budget) for wall-clock
experiments; those reproduce best_f columns exactly, while timestamps
vary with the machine.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def cli(*args: str) -> None:
    cmd = [sys.executable, "-m", "ipopcma.cli", *args]
    print("$ ipopcma " + " ".join(args), flush=True)
    subprocess.run(cmd, check=True)


def main() -> None:
    root = Path(tempfile.mkdtemp(prefix="cli_demo_"))
    first = root / "first"

    cli(
        "run",
        "--algo", "seq-ipop,k-distributed",
        "--functions", "sphere,rastrigin",
        "--dim", "4",
        "--cost-ms", "0",
        "--runs", "3",
        "--lambda-start", "4",
        "--kmax", "2",
        "--workers", "12",
        "--eval-limit", "4000",
        "--virtual-time", "1.0",
        "--seed", "2026",
        "--out", str(first),
    )
    cli("analyze", "--out", str(first))

    print(flush=True)
    print(f"results in {first}:")
    for path in sorted(first.iterdir()):
        print(f"  {path.name}")

    speedup = next(first.glob("speedup__*.csv"))
    print()
    print(f"head of {speedup.name}:")
    for line in speedup.read_text().splitlines()[:4]:
        print(f"  {line}")

    second = root / "second"
    print(flush=True)
    cli("run", "--config", str(first / "manifest.txt"), "--out", str(second))
    cell = "k-distributed__rastrigin__d4__c0__r2.csv"
    same = (first / cell).read_bytes() == (second / cell).read_bytes()
    print(f"replayed {cell} is byte-identical: {same}")


if __name__ == "__main__":
    main()
