"""Recover a known symmetry axis from two mirrored point clouds with the SVM."""
import math

import numpy as np

from fetalbiometry.msl import fit_linear_svm

rng = np.random.default_rng(7)

# a cloud right of the line through p0 along d, and its mirror image
p0 = np.array([12.0, -3.0])
ang = math.radians(25.0)
d = np.array([math.cos(ang), math.sin(ang)])
n = np.array([-d[1], d[0]])
along = rng.uniform(-30, 30, 80)
across = rng.uniform(2, 20, 80)
right = p0 + along[:, None] * d + across[:, None] * n
left = p0 + along[:, None] * d - across[:, None] * n
X = np.vstack([right, left])
y = np.r_[np.ones(80), -np.ones(80)]

res = fit_linear_svm(X, y, lam=10.0)
line = res.line()
print(f"iterations {res.iterations}, converged {res.converged}, objective {res.objective:.6f}")
print(f"axis angle {line.angle_deg():.3f} deg (true 25), offset of p0 {line.signed_distance(p0):.4f} mm")
