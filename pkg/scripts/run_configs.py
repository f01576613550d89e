"""Run every example configuration: python scripts/run_configs.py [--threads n]."""

import argparse
import sys
from pathlib import Path

from ineqlab.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
COMMAND = {
    "deficit_scan": "deficit-scan",
    "deficit_scan_critical": "deficit-scan",
    "flow_run": "flow-run",
    "improved_curve": "improved-curve",
    "be_quotient": "be-quotient",
    "lsi_quotient": "lsi-quotient",
    "competing_euclidean": "competing",
    "competing_gaussian": "competing",
    "lift": "lift",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", default="1")
    args = ap.parse_args()
    worst = 0
    for name, cmd in COMMAND.items():
        code = cli_main([cmd, "--config", str(ROOT / "configs" / f"{name}.yaml"),
                         "--threads", args.threads])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
