"""Two-sample rank statistics and their saturation behavior.

The hard-rank statistics stop responding once two distributions separate
completely (the rank map only sees order, not distance), which starves a
generative model of gradients. Their soft variants keep responding when
the regularizer is large enough for the dimension and sample size.

Run:  python3 demos/02_rank_statistics.py   (about a minute)
"""

import numpy as np

import softknock as sk
from softknock.experiments import saturation_rows

rng = np.random.default_rng(1)

x = rng.random((128, 2))
y_near = rng.random((128, 2)) + 0.25
y_far = rng.random((128, 2)) + 4.0

print("Distances between U[0,1]^2 and shifted copies:")
for name, fn in (
    ("energy distance", lambda a, b: sk.energy_distance(a, b)),
    ("rank energy", lambda a, b: sk.rank_energy(a, b)),
    ("soft rank energy (eps=1)", lambda a, b: sk.soft_rank_energy(a, b, 1.0)),
):
    print(f"  {name}: shift 0.25 -> {fn(x, y_near):.4f}, shift 4.0 -> {fn(x, y_far):.4f}")
print("(energy keeps growing with the shift; rank statistics cannot)")

print("\nShift sweep of the soft rank MMD, mean +/- standard error over seeds:")
rows = saturation_rows(
    statistic="srmmd",
    shifts=(0.5, 1.5, 3.0, 6.0),
    sizes=(128,),
    dims=(2,),
    epsilons=(0.0, 10.0),
    repetitions=8,
    seed=7,
)
for row in rows:
    print(
        f"  eps={row['epsilon']:>4} s={row['s']:>3}: "
        f"{row['mean']:.5f} +/- {row['std_error']:.5f}"
    )
print("(the eps=0 column flattens out beyond s=1; eps=10 keeps rising)")
