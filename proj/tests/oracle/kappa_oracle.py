#!/usr/bin/env python3
"""Quadratic-weighted kappa reference values from scikit-learn.

usage: kappa_oracle.py OUT.json
"""
import json
import random
import sys

from sklearn.metrics import cohen_kappa_score


def main(path):
    rng = random.Random(4)
    cases = [
        {"a": [1, 2, 3, 4], "b": [1, 2, 3, 4]},
        {"a": [1, 1, 2, 2], "b": [2, 2, 1, 1]},
        {"a": [1, 2, 3, 4, 4], "b": [1, 2, 4, 4, 3]},
    ]
    for _ in range(40):
        n = rng.randint(2, 60)
        a = [rng.randint(1, 4) for _ in range(n)]
        # correlated second rater
        b = [min(4, max(1, x + rng.choice([-1, 0, 0, 0, 1]))) for x in a]
        if len(set(a)) == 1 and len(set(b)) == 1:
            continue
        cases.append({"a": a, "b": b})
    for c in cases:
        c["kappa"] = float(cohen_kappa_score(c["a"], c["b"], weights="quadratic", labels=[1, 2, 3, 4]))
    with open(path, "w") as f:
        json.dump(cases, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    main(sys.argv[1])
