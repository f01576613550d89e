"""Plot an ineq-lab CSV: python scripts/plot_csv.py results/x.csv --x col --y col [--y col] [--group col]."""

import argparse
import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0][2:])
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    return header, list(csv.DictReader(body))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--x", required=True)
    ap.add_argument("--y", action="append", required=True)
    ap.add_argument("--group")
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("--out")
    args = ap.parse_args()
    header, rows = read(args.csv)
    groups = defaultdict(list)
    for r in rows:
        groups[r[args.group] if args.group else ""].append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rs in groups.items():
        x = [float(r[args.x]) for r in rs]
        for col in args.y:
            y = [abs(float(r[col])) if args.logy else float(r[col]) for r in rs]
            ax.plot(x, y, marker=".", label=f"{name} {col}".strip())
    if args.logy:
        ax.set_yscale("log")
    ax.set_xlabel(args.x)
    ax.set_title(f"{header['command']}: {header['experiment']}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = args.out or str(Path(args.csv).with_suffix(".png"))
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
