"""Correctors and the homogenized tensor for three coefficient families."""

import numpy as np

from specloc.cell_problem import corrector_eval, homogenize
from specloc.fem import Checker, ConstantMatrix, Laminate
from specloc.geometry import CellGeometry, build_cell_mesh

plain = build_cell_mesh(CellGeometry(0.0, h=1 / 64))

lam = Laminate((1.0, 4.0), (0.5,))
corr, aeff = homogenize(plain, lam)
print("laminate a_eff:\n", aeff)
print("closed form:     harmonic", lam.harmonic_mean(), " arithmetic", lam.arithmetic_mean())

# the first corrector is the mean-zero sawtooth in y1
y = np.array([[0.1, 0.5], [0.4, 0.5], [0.8, 0.5]])
vals, _, _ = corrector_eval(corr, y)
print("N1 at y1 = 0.1, 0.4, 0.8:", vals[:, 0])

_, aeff = homogenize(plain, Checker((1.0, 4.0)))
print("checkerboard a_eff (geometric mean is 2):\n", aeff)

# a hole makes the medium less conductive; the square symmetry keeps it isotropic
for h in (1 / 16, 1 / 32, 1 / 64):
    _, aeff = homogenize(build_cell_mesh(CellGeometry(0.25, 64, h)), ConstantMatrix())
    print(f"hole r = 0.25, h = 1/{round(1 / h)}: a11 = {aeff[0, 0]:.6f}, a22 = {aeff[1, 1]:.6f}, a12 = {aeff[0, 1]:.1e}")
