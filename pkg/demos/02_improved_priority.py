"""Does scoring evictions by their effect on the raw track pay off?

BWC-STTrace ranks a queued point by its SED to its current neighbours.
BWC-STTrace-Imp instead sums, over the raw points the removal would affect,
how much further the reconstruction drifts from them.  On a mix of random
walks and square waves the second score should lose less accuracy.
"""
import numpy as np

from bwctraj import evaluation as ev
from bwctraj.ingest import mixed_dataset

SEEDS = range(5)


def run(delta):
    errs = {a: [] for a in ev.BWC}
    for seed in SEEDS:
        data = mixed_dataset(seed)
        for algo in ev.BWC:
            params = ev.derive_params(algo, data, 0.10, delta=delta)
            errs[algo].append(ev.accuracy(data, ev.run_algorithm(algo, data, params)).mean)
    return {a: float(np.mean(v)) for a, v in errs.items()}


if __name__ == "__main__":
    # points report every ~10 s, so 300 s windows hold ~30 per trajectory and
    # 5 s windows hold less than one
    for delta in (300.0, 60.0, 5.0):
        means = run(delta)
        print(f"delta = {delta:5.0f} s  " + "  ".join(f"{a} {m:6.1f} m" for a, m in means.items()))
