"""Sweep eps and watch the scaled eigenvalues approach the oscillator."""

from specloc.asymptotics import StudyConfig, convergence_study
from specloc.fem import QField

cfg = StudyConfig(q=QField(1.0, ((2.0, 0.0), (0.0, 4.0))))
report = convergence_study([1 / 2, 1 / 3, 1 / 4, 1 / 6, 1 / 8], cfg, j_list=(1, 2))

print(" eps      j   mu_eps    mu_eff    |err|    loc mass  ansatz")
for r in report.rows:
    print(f" {r.eps:.4f}  {r.j}  {r.mu_eps:8.4f}  {r.mu_eff:8.4f}  {r.abs_err:7.4f}  {r.loc_mass:7.4f}  {r.ansatz_err:7.4f}")
print(report.fits_json())
print("mu1 range over the sweep:", report.sandwich.c_min, report.sandwich.c_max)
report.to_csv("study.csv")
