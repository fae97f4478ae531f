"""From client cloning to update weighting: three routes, one trajectory.

Starts from the observation that duplicating a client with a large
smoothness constant (and rescaling the losses to keep the objective
unchanged) shrinks the quadratic mean of the constants.  The ceil(L_i /
mean) rule lands within sqrt(2) of the best integer cloning, and for
deterministic compressors the cloned run collapses onto an equivalent
weighted run on the original clients, which needs no extra machines.

Run:  python demos/cloning_and_reweighting.py
"""

import numpy as np

from efsim import (
    ClientProblem,
    CompressorSpec,
    Dataset,
    WeightVector,
    build_cloned_problem,
    clone_counts,
    clone_objective,
    gamma_ef21_w,
    init_state,
    make_global_problem,
    smoothness_weights,
    step_ef21,
    step_ef21_w,
    summarize,
)
from efsim.algorithms import RunState
from efsim.weighting import exact_min_clone_objective

print("=" * 70)
print("One heavy client dominates the quadratic mean")
print("=" * 70)
l_list = np.array([1.0, 1.0, 1.0, 100.0])
s = summarize(l_list)
print(f"constants {l_list}:  L_AM = {s.L_AM},  L_QM = {s.L_QM:.4f}")
counts = clone_counts(l_list)
print(f"cloning counts ceil(L_i / L_AM) = {counts.counts} (total {counts.total})")
print(f"cloned quadratic mean M(N*) = {clone_objective(l_list, counts.counts):.4f}")
print(f"exact best integer cloning  = {exact_min_clone_objective(l_list):.4f}")
print(f"sandwich: {s.L_AM:.2f} <= best <= M(N*) <= sqrt(2) L_AM = {np.sqrt(2) * s.L_AM:.2f}")
print()

print("=" * 70)
print("Cloned run == weighted run, coordinate for coordinate")
print("=" * 70)
d = 6
rng = np.random.default_rng(0)


def client_with_smoothness(target, seed):
    gen = np.random.default_rng(seed)
    a = gen.standard_normal(d)
    a *= np.sqrt(target / 2.0) / np.linalg.norm(a)
    return ClientProblem("linreg_ncvx", Dataset(a[None, :], gen.standard_normal(1)), lam=0.0)


clients = [client_with_smoothness(t, 30 + i) for i, t in enumerate((1.0, 1.0, 2.0))]
problem = make_global_problem(clients)
counts = clone_counts(problem.smoothness_list())
cloned = build_cloned_problem(problem, counts)
weights = WeightVector(counts.counts / counts.total)
spec = CompressorSpec("topk", d, 1)
gamma = gamma_ef21_w(problem.L, float(problem.smoothness_list().mean()), spec.alpha)
x0 = rng.standard_normal(d) / np.sqrt(d)

weighted = init_state(problem, x0, weights)
g0 = np.repeat(weighted.g, counts.counts, axis=0)
plain = RunState(x=x0.copy(), g=g0, g_agg=g0.mean(axis=0), round=0)
worst = 0.0
for _ in range(200):
    weighted = step_ef21_w(weighted, problem, weights, spec, gamma)
    plain = step_ef21(plain, cloned, spec, gamma)
    worst = max(worst, float(np.max(np.abs(plain.x - weighted.x))))
print(f"{counts.total} cloned clients vs {problem.n} weighted clients, 200 rounds:")
print(f"max |x_cloned - x_weighted| = {worst:.2e}")
print()

print("=" * 70)
print("Weighted run == plain run on rescaled estimators (homogeneity)")
print("=" * 70)
weights = smoothness_weights(problem.smoothness_list())
weighted = init_state(problem, x0, weights)
h0 = (problem.n * weights.w)[:, None] * weighted.g
plain = RunState(x=x0.copy(), g=h0, g_agg=h0.mean(axis=0), round=0)
worst = 0.0
for _ in range(200):
    weighted = step_ef21_w(weighted, problem, weights, spec, gamma)
    plain = step_ef21(plain, problem, spec, gamma)
    worst = max(worst, float(np.max(np.abs(plain.x - weighted.x))))
print(f"substitution h_i = n w_i g_i, 200 rounds: max deviation = {worst:.2e}")
print("(TopK is positively homogeneous, so the two runs are the same method.)")
