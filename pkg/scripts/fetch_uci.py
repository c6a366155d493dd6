"""Download the UCI datasets used by the benchmark into data/uci/.

    python scripts/fetch_uci.py [wdbc ionosphere pima echo]

Each file is written as CSV with the class label in the last column, ready
for ``nmfimpute experiment --input data/uci/<name>.csv``. WDBC can also be
exported offline from the copy bundled with scikit-learn (``--sklearn``).
"""
import argparse
import csv
import io
import sys
import urllib.request
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "uci"
BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

SOURCES = {
    # name: (url, label column in the source file, columns to drop)
    "wdbc": (f"{BASE}/breast-cancer-wisconsin/wdbc.data", 1, [0]),
    "ionosphere": (f"{BASE}/ionosphere/ionosphere.data", -1, []),
    "pima": ("https://raw.githubusercontent.com/jbrownlee/Datasets/master/pima-indians-diabetes.data.csv", -1, []),
    "echo": (f"{BASE}/echocardiogram/echocardiogram.data", 1, [10, 11, 12]),
}


def _rewrite(rows, label_col, drop):
    out = []
    for row in rows:
        if not row or any(c.strip() in ("", "?") for c in row):
            continue  # incomplete records are skipped; training data must be complete
        lc = label_col % len(row)
        feats = [c.strip() for j, c in enumerate(row) if j != lc and j not in drop]
        out.append(feats + [row[lc].strip()])
    return out


def fetch(name):
    url, label_col, drop = SOURCES[name]
    with urllib.request.urlopen(url, timeout=60) as resp:
        text = resp.read().decode("utf-8", errors="replace")
    return _rewrite(csv.reader(io.StringIO(text)), label_col, drop)


def from_sklearn():
    from sklearn.datasets import load_breast_cancer

    b = load_breast_cancer()
    return [[repr(float(v)) for v in x] + [str(y)] for x, y in zip(b.data, b.target)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=list(SOURCES))
    ap.add_argument("--sklearn", action="store_true", help="export WDBC from scikit-learn instead")
    args = ap.parse_args(argv)
    OUT.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        rows = from_sklearn() if args.sklearn and name == "wdbc" else fetch(name)
        with (OUT / f"{name}.csv").open("w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        print(f"{name}: {len(rows)} rows -> {OUT / (name + '.csv')}", file=sys.stderr)


if __name__ == "__main__":
    main()
