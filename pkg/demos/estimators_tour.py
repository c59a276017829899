"""
Sparse diversity estimates on a small team
===========================================

Full SND averages a behavioral distance over every pair of agents. On a
graph we only look at the pairs that are edges. This script builds a small
Gaussian policy ensemble, measures it on several graphs and prints the
error bounds that come with each estimate.
"""

from math import comb

import numpy as np

from graphsnd import (
    CountingDistances,
    bound_report,
    build_bernoulli,
    build_complete,
    build_d_regular,
    build_distance_matrix,
    build_uniform_size,
    graph_snd,
    ht_estimate,
    random_gaussian_ensemble,
    random_observation_batch,
    snd_full,
    snd_uniform,
)

# Twelve agents with diagonal-Gaussian action heads, observed on a shared batch
# of 32 states. The distance between two agents is the Wasserstein-2 distance
# between their action distributions, averaged over the batch.
n = 12
ensemble = random_gaussian_ensemble(seed=0, n=n, d_obs=4, d_act=2)
batch = random_observation_batch(seed=1, T=32, n=n, d_obs=4)
dm = build_distance_matrix(ensemble, batch)
truth = snd_full(dm)
print(f"full SND over {comb(n, 2)} pairs: {truth:.5f}")

# On the complete graph Graph-SND is the full SND.
print(f"complete graph:                {graph_snd(dm, build_complete(n)).value:.5f}")

# A random 4-regular graph looks at 24 of the 66 pairs.
g = build_d_regular(seed=2, n=n, d=4)
print(f"4-regular ({g.num_edges} edges):          {snd_uniform(dm, g).value:.5f}")

# Bernoulli sampling with inverse-probability weights is unbiased on average.
draws = [ht_estimate(dm, build_bernoulli(seed=k, n=n, p=0.3, weight_mode="ht")).value for k in range(2000)]
print(f"HT mean over 2000 Bernoulli(0.3) draws: {np.mean(draws):.5f} +- {np.std(draws) / np.sqrt(2000):.5f}")

# A uniform sample of m pairs concentrates around the truth.
errors = [abs(snd_uniform(dm, build_uniform_size(seed=k, n=n, m=20)).value - truth) for k in range(2000)]
print(f"uniform m=20: 95th percentile error {np.percentile(errors, 95):.5f}")

# Every estimate can come with its bounds: concentration radii, the
# deterministic distortion sandwich and, for regular graphs, the spectral bound.
report = bound_report(dm, g, delta=0.1)
print(f"hoeffding radius {report.hoeffding_radius:.4f}, serfling {report.serfling_radius:.4f}")
print(f"distortion sandwich [{report.distortion_lower:.4f}, {report.distortion_upper:.4f}] contains {truth:.4f}")
print(f"spectral bound on |estimate - SND|: {report.spectral_abs:.4f}")

# The cost is the number of pairwise distance evaluations.
counter = CountingDistances(dm)
snd_full(counter)
full_cost = counter.evaluations
snd_uniform(counter, g)
print(f"evaluations: full {full_cost}, 4-regular {counter.evaluations - full_cost}")
