"""SL2 acting on the plane: the blow-up fiber over the origin and its groupoid.

Every direction v through 0 contributes the isotropy of the line through v, so
the fiber over 0 is a copy of the projective line inside Gr(1, sl2).
"""

import numpy as np

from foliation_blowup import grassmann as gr
from foliation_blowup import group_action as ga
from foliation_blowup import holonomy as ho
from foliation_blowup.blowup import BlowupPoint, FiberConfig
from foliation_blowup.scenarios import sl2_action


def main() -> None:
    act = sl2_action()
    rep = ga.blowup_fiber_action(act, [0.0, 0.0], FiberConfig(rays=16))
    print(f"fiber over 0: {len(rep.clusters)} clusters from {rep.rays_sampled} rays, dims {sorted(set(rep.dims))}")
    for c in rep.clusters[:4]:
        v = c.direction_tag
        print(f"  direction {np.round(v, 3)}  V = span{np.round(c.subspace.basis[:, 0], 3)}")

    # transport by a rotation moves the cluster of v to the cluster of g v
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    V = rep.clusters[0].subspace
    W = ga.adjoint_transport(act, rot, V)
    moved = rot @ rep.clusters[0].direction_tag
    print(f"Ad(rot) V vs isotropy at rot v: {gr.distance(W, ga.isotropy_subalgebra(act, moved)):.2e}")

    axioms = ga.groupoid_axiom_check(act, 200, seed=1)
    print(f"groupoid laws: {axioms.checks} checks, {axioms.failures} failures, "
          f"conclusive {axioms.conclusive_rate:.1%}")

    p = BlowupPoint(np.zeros(2), V)
    print(f"source fiber dimension at (V, 0): {ho.hblup_fiber_dim(act.foliation(), p)}")

    eta = ga.eta_estimate(act, ga.Annulus(0.5, 2.0))
    print(f"periodic bound: eta_hat = {eta.eta_hat:.6f} (rotation period {2 * np.pi * np.sqrt(2):.6f})")


if __name__ == "__main__":
    main()
