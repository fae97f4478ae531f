"""Tour of the compression operators and their contraction algebra.

Shows how the compression penalty xi(alpha) explodes as Top1 is applied
in higher dimensions, why that penalty multiplies the smoothness term in
every step-size rule, and how the unbiased natural rounding becomes a
contractive operator after scaling.

Run:  python demos/compression_basics.py
"""

import numpy as np

from efsim import CompressorSpec, contraction_functions, natural_compress, top_k
from efsim.compressors import NATURAL_OMEGA, apply

print("=" * 70)
print("Contraction parameters of Top1 as the dimension grows")
print("=" * 70)
print(f"{'d':>6} {'alpha':>10} {'theta':>10} {'beta':>12} {'xi':>12}")
for d in (10, 62, 70, 114, 302, 1000):
    p = contraction_functions(1.0 / d)
    print(f"{d:>6} {p.alpha:>10.5f} {p.theta:>10.6f} {p.beta:>12.3f} {p.xi:>12.3f}")
print()
print("xi roughly doubles with d: compressing harder costs a proportionally")
print("smaller step size, since every rule divides by L + (mean L_i) * xi.")
print()

print("=" * 70)
print("TopK keeps the largest magnitudes, ties break to the left")
print("=" * 70)
v = np.array([1.0, -3.0, 2.0])
print(f"top_k({v}, 1)  -> {top_k(v, 1)}")
tie = np.array([2.0, -2.0, 1.0])
print(f"top_k({tie}, 1) -> {top_k(tie, 1)}   (|2| ties: smallest index wins)")
scaled = 3.7 * tie
print(f"top_k(3.7 * v, 1) == 3.7 * top_k(v, 1): "
      f"{np.array_equal(top_k(scaled, 1), 3.7 * top_k(tie, 1))}")
print()

print("=" * 70)
print("Natural compression: unbiased rounding to powers of two")
print("=" * 70)
rng = np.random.default_rng(0)
t = 3.0
draws = natural_compress(np.full((100_000, 1), t), rng).ravel()
print(f"t = {t}: outputs {sorted(set(draws.tolist()))}, "
      f"empirical mean {draws.mean():.4f} (unbiased)")
x = rng.standard_normal(64)
reps = np.tile(x, (50_000, 1))
err = np.sum((natural_compress(reps, rng) - reps) ** 2, axis=1)
print(f"E||C(x) - x||^2 / ||x||^2 = {err.mean() / (x @ x):.4f}  "
      f"(worst-case bound: omega = {NATURAL_OMEGA})")
spec = CompressorSpec("natural", 64)
scaled_err = np.sum((np.stack([apply(spec, x, rng) for _ in range(2_000)]) - x) ** 2, axis=1)
print(f"scaled variant: E||C(x)/(omega+1) - x||^2 / ||x||^2 = "
      f"{scaled_err.mean() / (x @ x):.4f}  (contractive, alpha = {spec.alpha:.4f})")
