"""Small-scale rerun of the WMSE comparison on the 6 x 4 grid.

Usage: python3 demos/simulation_table.py [reps]

Domain means follow a surface increasing in both covariates; samples of 480
are drawn by stratified SRSWOR with strata built from a variable correlated
with the domain index, so the design is informative.  The table compares the
Hajek means with estimates constrained to be monotone in x1 only and in
both covariates.
"""

import sys

from shapesurvey.simulation import StudyConfig, run_study

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 200

print(f"WMSE over {reps} replications (n = 480)")
print(f"{'sigma':>6}{'hajek':>10}{'x1 only':>10}{'double':>10}")
for sigma in (1.0, 2.0):
    rep = run_study(StudyConfig(sigma=sigma, reps=reps, seed=0, linearization=False))
    w = rep.wmse_table()
    print(f"{sigma:6.0f}{w['unconstrained']:10.4f}{w['x1']:10.4f}{w['double']:10.4f}")
