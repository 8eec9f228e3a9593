#!/usr/bin/env python3
"""ASCII chart of an erc-estimate CSV: estimate and bound against s."""

import argparse
import csv
import sys

WIDTH = 60


def load(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                bound = float(row["bound"])
            except ValueError:
                bound = None  # assumption-violated / unavailable
            rows.append((row["s"], float(row["estimate"]), bound))
    if not rows:
        sys.exit(f"{path}: no data rows")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="output of `mtsvm erc-estimate`")
    args = ap.parse_args()

    rows = load(args.csv)
    top = max(v for _, est, b in rows for v in ([est] + ([b] if b else [])))
    if top <= 0:
        sys.exit("nothing positive to plot")

    label_w = max(len(s) for s, _, _ in rows)
    print(f"{'s':>{label_w}}  {'estimate':<{WIDTH}}  value")
    for s, est, bound in rows:
        bar = ["-"] * WIDTH
        e = min(WIDTH - 1, int(round(est / top * (WIDTH - 1))))
        bar[e] = "*"
        if bound is not None:
            k = min(WIDTH - 1, int(round(bound / top * (WIDTH - 1))))
            bar[k] = "*" if k == e else "|"
        tail = f"{est:.5g}" + (f" (bound {bound:.5g})" if bound is not None else "")
        print(f"{s:>{label_w}}  {''.join(bar)}  {tail}")
    print(f"{'':>{label_w}}  scale: right edge = {top:.5g}   * estimate, | bound")


if __name__ == "__main__":
    main()
