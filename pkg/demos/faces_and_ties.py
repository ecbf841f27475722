"""Why the face set is not unique, and how it is reduced.

With three domains ordered increasingly and the first two Hajek means tied,
the projection leaves the vector unchanged, yet both the empty face and the
face {1} carry it.  The active-set solver reports one of them; brute-force
enumeration lists both.  A second example shows redundant edges being
pruned to a linearly independent subset spanning the same space.
"""

import numpy as np

from shapesurvey import (
    DomainGrid,
    PolarEdgeSet,
    build_monotone,
    enumerate_valid_faces,
    project_polar,
    reduce_face,
    transform_by_weights,
)

A = build_monotone(DomainGrid((3,)), [0])
w = np.array([0.2, 0.5, 0.3])
_, edges = transform_by_weights(A, w)
z = np.sqrt(w) * np.array([1.0, 1.0, 2.0])

res = project_polar(z, edges)
print("active-set face:", [j + 1 for j in res.face], " rho:", res.rho)
print("all valid faces:", [[j + 1 for j in f] for f, _, _ in enumerate_valid_faces(z, edges)])

# three edges in the plane, one of them the sum of the other two
plane = PolarEdgeSet(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
z = np.array([2.0, 2.0])
print("\nface using all three edges is valid:", bool(enumerate_valid_faces(z, plane)))
print("reduced face:", [j + 1 for j in reduce_face((0, 1, 2), plane, z)])
