"""One eps: the Robin eigenproblem on the perforated square."""

import numpy as np

from specloc.asymptotics import localization_mass, solve_full
from specloc.fem import QField
from specloc.geometry import CellGeometry, DomainSpec

q = QField(1.0, ((2.0, 0.0), (0.0, 4.0)))
spec = DomainSpec(1 / 4, 1.0, CellGeometry())
res = solve_full(spec, None, q, k=6)

print(f"eps = 1/4, kappa0 / eps = {res.kappa0 / res.epsilon:.4f}")
print("lambda:", np.round(res.values, 4))
print("mu    :", np.round(res.mu, 4))
print("M-orthonormality error:", res.orthonormality_error())
print("mass outside |x| >= 0.5:", localization_mass(res, 1, 0.5))

# the Robin values sit between the two extreme hole conditions
for cond in ("neumann", "dirichlet"):
    other = solve_full(spec, None, q, k=3, hole_condition=cond)
    print(f"{cond:9s} lambda_1..3:", np.round(other.values, 3))
