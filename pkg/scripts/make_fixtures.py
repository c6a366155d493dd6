"""Regenerate the small synthetic fixtures under data/."""
from pathlib import Path

import numpy as np

from nmfimpute.cli import write_matrix
from nmfimpute.datasets import make_planted_classes, make_scurve

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    DATA.mkdir(exist_ok=True)
    write_matrix(DATA / "scurve.csv", make_scurve(300, seed=0))
    write_matrix(DATA / "rank1.csv", np.outer([1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]))
    (DATA / "rank1_dictionary").mkdir(exist_ok=True)
    write_matrix(DATA / "rank1_dictionary" / "W.csv", np.array([[1.0], [2.0], [3.0]]))
    (DATA / "rank1_masked.csv").write_text("a,b,c\n2,4,\n1,,3\n0.5,1,1.5\n")
    ds = make_planted_classes(seed=0)
    with (DATA / "planted_classes.csv").open("w") as fh:
        for x, y in zip(ds.features, ds.labels):
            fh.write(",".join(format(v, ".17g") for v in x) + f",{y}\n")


if __name__ == "__main__":
    main()
