"""The flow of rho(x) d/dx with a flat bump rho supported on [-1, 1].

Inside the support the isotropy is 0, outside it is everything, and at the
edges both limits occur. The holonomy chart shows the same split: outside the
support the whole t-line maps to one point.
"""

import numpy as np

from foliation_blowup import blowup as bl
from foliation_blowup import holonomy as ho
from foliation_blowup.grassmann import Subspace
from foliation_blowup.scenarios import builtin


def main() -> None:
    F = builtin("bump").foliation
    for x in (0.0, 0.5, 1.0, 1.5):
        rep = bl.blowup_fiber(F, [x])
        print(f"x = {x:4.1f}: cluster dims {sorted(rep.dims)}")

    for y in (0.0, 1.5):
        tr = ho.leaf_trace(F, [y], np.zeros(1), Subspace.full(1), steps=5, step_size=0.2)
        print(f"leaf through (y={y}, t=0) with V = R: {len(tr.points)} points, "
              f"distribution dim {tr.distribution_dim}, max |r - r0| {tr.r_residual.max():.1e}")

    print("flow from 2.0 for time 3:", ho.flow(F, [2.0], [3.0]))
    print("flow from 0.0 for time 3:", ho.flow(F, [0.0], [3.0]))


if __name__ == "__main__":
    main()
