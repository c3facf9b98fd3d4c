#!/usr/bin/env python3
"""Synthetic cohort-count fixture in the medfly layout: group,cohort,day1..day101.

Four groups of 33 cohorts with 3000-4000 insects each. Groups 1 and 2 share one
frailty distribution; group 4 has much more cohort-to-cohort spread than group 3,
so their survival-curve covariances differ. Run from the repository root.
"""
import numpy as np

DAYS = 101
COHORTS = 33


def main():
    rng = np.random.default_rng(19970101)
    # (baseline daily hazard, sd of log cohort frailty, hazard growth per day)
    groups = {
        "g1": (0.010, 0.15, 0.045),
        "g2": (0.010, 0.15, 0.045),
        "g3": (0.008, 0.10, 0.050),
        "g4": (0.008, 0.45, 0.050),
    }
    lines = ["group,cohort," + ",".join(f"day{d}" for d in range(1, DAYS + 1))]
    for label, (h0, spread, growth) in groups.items():
        for c in range(COHORTS):
            alive = int(rng.integers(3000, 4001))
            frailty = np.exp(spread * rng.standard_normal())
            row = [alive]
            for d in range(1, DAYS):
                hazard = min(0.95, h0 * frailty * np.exp(growth * d))
                alive -= int(rng.binomial(alive, hazard))
                row.append(alive)
            lines.append(f"{label},c{c + 1}," + ",".join(str(v) for v in row))
    with open("tests/data/synthetic_medfly_counts.csv", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
