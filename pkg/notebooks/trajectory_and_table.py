"""
   Ground-state trajectory during an STA rotation, then the pi-gate fidelity table.
"""
import numpy as np

from staberry.experiments import trajectory_experiment
from staberry.process import format_table, table_s1_runner

for theta0 in (np.pi / 6, np.pi / 4):
    res = trajectory_experiment(theta0)
    rot = res.rotation
    print(f"theta0={theta0:.4f}: solid angle {res.solid_angle:.6f} (ideal {res.ideal_solid_angle:.6f}), "
          f"theta drift {np.max(np.abs(rot.theta - theta0)):.1e}")

print()
print(format_table(table_s1_runner()))
