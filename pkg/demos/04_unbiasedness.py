#!/usr/bin/env python3
"""Monte-Carlo check that the mean estimation error follows ``(C F)^n E[e_1]``."""

import numpy as np

from disfilter import bias_propagation, build_stacked_system, reference_scenario
from disfilter.experiment import monte_carlo_mean_error
from disfilter.filters import converge_distributed_riccati, distributed_gains

RUNS = 1000


def main():
    scen = reference_scenario(seed=0)
    M, _, _, _ = converge_distributed_riccati(scen.model, scen.obs_models, scen.C)
    gains = distributed_gains(M, scen.obs_models)
    sys = build_stacked_system(scen.C, gains, scen.obs_models, scen.model)

    x1 = np.ones(4)
    E1 = np.tile(x1, scen.node_count)
    mean, se = monte_carlo_mean_error(scen, gains, x1, 501, RUNS, seed=3)
    for n in (10, 100, 500):
        z = np.abs(mean[n] - bias_propagation(sys, E1, n)) / se[n]
        print(f"n={n:4d}  |predicted bias|={np.linalg.norm(bias_propagation(sys, E1, n)):.4f}  max z-score={z.max():.2f}")
    for n in (1000, 2000, 5000):
        ratio = np.linalg.norm(bias_propagation(sys, E1, n)) / np.linalg.norm(E1)
        print(f"n={n:4d}  bias relative to start: {ratio:.2e}")


if __name__ == "__main__":
    main()
