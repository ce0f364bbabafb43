"""
   Echo Berry phase against the designed solid angle.

   Sweeps theta0 for each rotation time, prints the fitted slope k and the
   in-plane contrast, first without decoherence and then with phase-qubit
   T1/T2echo.  Run with ``python notebooks/berry_sweep.py``.
"""
import numpy as np

from staberry.experiments import berry_sweep
from staberry.process import PHASE_QUBIT

for label, dis in (("closed system", None), ("phase qubit", PHASE_QUBIT.dissipation)):
    res = berry_sweep(dis=dis, workers=4)
    print(f"\n{label}")
    print(" T_rot    k        intercept  contrast  spread")
    for tr, fit in res.fits.items():
        print(f" {tr:5.0f}  {fit.k:+.4f}  {fit.intercept:+.4f}    {res.contrast[tr]:.4f}    "
              f"{res.amplitude_spread(tr):.3f}")

# the phase of one row, point by point
row = [p for p in res.points if p.t_rot == 30.0]
print("\n S_design   gamma     -2 S")
for p in row:
    print(f" {p.s_design:7.4f}  {p.gamma:+8.4f}  {-2 * p.s_design:+8.4f}")
print("\nmax |gamma + 2S| =", np.max([abs(p.gamma + 2 * p.s_design) for p in row]))
