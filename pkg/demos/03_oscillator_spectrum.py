"""The limiting harmonic oscillator: closed form versus finite differences."""

import numpy as np

from specloc.cell_problem import homogenize
from specloc.effective import OscillatorSpec, analytic_spectrum, build_oscillator, eigenfunction_eval, numeric_oscillator
from specloc.fem import ConstantMatrix, QField
from specloc.geometry import CellGeometry, build_cell_mesh

for A, Q in [(np.eye(2), np.eye(2)), (np.diag([4.0, 1.0]), np.diag([1.0, 9.0]))]:
    spec = OscillatorSpec(A, Q)
    exact = analytic_spectrum(spec, 6)
    num = numeric_oscillator(spec, box=8.0, h=1 / 16, k=6)
    print("A =", np.diag(A), "Q =", np.diag(Q))
    for mu, lab, m, nu in zip(exact.values, exact.labels, exact.multiplicity, num.values):
        print(f"   {mu:8.4f}  n = {lab}  cluster size {m}   numeric {nu:.6f}")

# the oscillator of the perforated medium with q = 1 + x1^2 + 2 x2^2
cell = build_cell_mesh(CellGeometry())
corr, aeff = homogenize(cell, ConstantMatrix())
osc = build_oscillator(aeff, corr.area, corr.perimeter, QField(1.0, ((2.0, 0.0), (0.0, 4.0))))
print("kappa0 =", osc.kappa0)
print("Q =", np.diag(osc.Q))
print("first values:", analytic_spectrum(osc, 4).values)

# ground state on a ray: Gaussian decay
t = np.linspace(0, 4, 9)
print("v1 along x1:", np.round(eigenfunction_eval(osc, (0, 0), np.column_stack([t, 0 * t])), 6))
