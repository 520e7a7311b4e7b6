"""Pilot run that fixes the regression threshold for the finite-sample
acceptance check. Uses a seed disjoint from the acceptance run and writes
tests/golden/finite_sample.json.

    python3 benchmarks/pilot_golden.py
"""

import json
import math
from pathlib import Path

from igsp.bench import ExperimentPlan, run_experiment

PILOT_SEED = 2024
OUT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "finite_sample.json"


def main():
    plan = ExperimentPlan(p=10, n_per_block=10000, kind="perfect", family="all-singletons", replicates=100, seed=PILOT_SEED)
    res = run_experiment(plan)
    rate = res.summary["imec_rate"]
    # two binomial standard errors below the pilot rate, floored to 0.05
    se = math.sqrt(rate * (1 - rate) / plan.replicates)
    threshold = math.floor((rate - 2 * se) * 20) / 20
    golden = {
        "pilot_plan": plan.to_dict(),
        "pilot_imec_rate": rate,
        "pilot_median_hamming": res.summary["hamming"]["median"],
        "imec_rate_threshold": threshold,
    }
    OUT.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(json.dumps(golden, indent=2))


if __name__ == "__main__":
    main()
