# %% [markdown]
# # What inexact information costs
#
# When every evaluation of the right-hand side may be off by `delta (1 + |y|)`,
# no algorithm can beat an error of `(b - a) delta`.  Two problems
# `f = +delta e1` and `f = -delta e1` both look like `f = 0` through such
# noise, and their solutions drift apart at rate `2 delta`.

# %%
import numpy as np

from randeuler.analysis import noise_floor_sweep, path_suprema
from randeuler.core import compute_class_constants
from randeuler.noise import NoiseKind
from randeuler.problems import adversarial_pair, linear_autonomous

pair = adversarial_pair(0.1)
for p, cancel in ((pair.plus, pair.cancel_plus), (pair.minus, pair.cancel_minus)):
    sups = path_suprema(p, cancel, "explicit", 64, 5, seed=0)
    print(f"{p.name}: worst sup error {sups.max():.6f}   (b-a)delta = {0.1 * p.length}")

# %% [markdown]
# On a genuine problem the error settles onto a floor that grows linearly in
# `delta` once the step is fine enough.  The upper constant computed from
# `(a, b, K, L)` is a worst case and far from tight.

# %%
p = linear_autonomous()
C = compute_class_constants(p).explicit_noise_C
rows = noise_floor_sweep(p, NoiseKind.CONSTANT_DIRECTION, "explicit", 4096, [0.0, 0.01, 0.02, 0.04, 0.08], 20, seed=0)
for r in rows:
    ratio = "   -  " if np.isnan(r.error_over_delta) else f"{r.error_over_delta:6.3f}"
    print(f"delta={r.delta:<5} error={r.estimate.value:.5f} error/delta={ratio}  (upper constant {C:.1f})")
