"""Independent derivations of the literal values frozen into the tests.

Run ``python3 -m tests.oracles.derive_frozen`` from the repository root.  Each value
comes from a route that avoids the library code path it later checks:

* conditioning numbers from dense Choi-state SVDs (the library uses boundary environments);
* multi-control-Z depths from a closed recurrence over site ranges (the library counts IR).
"""

import math

import numpy as np

from mpuforge import corpus


def dense_choi_q(u: np.ndarray, d: int, cut: int) -> float:
    """``sqrt(sum s^-2)`` over the Choi Schmidt values of ``u`` across ``cut`` sites."""
    n = round(math.log(u.shape[0], d))
    t = u.reshape([d] * (2 * n))
    order = [x for k in range(n) for x in (k, n + k)]
    psi = t.transpose(order).reshape(d ** (2 * cut), -1) / d ** (n / 2)
    s = np.linalg.svd(psi, compute_uv=False)
    s = s[s > 1e-12 * s[0]]
    return float(np.sqrt(np.sum(s**-2.0))), s


def mcz_depth(n_sites: int) -> int:
    """Depth of the uniform multi-control-Z tree with one rotation and no pads.

    A merge of sites ``j..l`` costs ``3 T_child + 11 + w_F`` where ``w_F`` counts the
    nontrivial fixed registers (bonds of dimension 2 and nested LCU ancillas) plus the
    merge's own ancilla.  Leaves cost 1.
    """

    def block(j, l):
        if j == l:
            return 1, 0
        size = l - j + 1
        half = 1 << (size - 1).bit_length() - 1
        tl, ml = block(j, j + half - 1)
        tr, mr = block(j + half, l)
        bonds = 2 * size - (j == 1) - (l == n_sites)
        w_f = bonds + ml + mr + 1
        return 3 * max(tl, tr) + 11 + w_f, ml + mr + 1

    return block(1, n_sites)[0]


if __name__ == "__main__":
    q, s = dense_choi_q(corpus.multicontrol_z_target(2), 2, 1)
    print("mcz N=2 q =", repr(q))
    _, s3 = dense_choi_q(corpus.multicontrol_z_target(3), 2, 1)
    print("mcz N=3 Schmidt cut 1 =", s3.tolist())
    ly = corpus.lee_yang_mpu(math.pi / 2, 0.0)
    q_ly, _ = dense_choi_q(ly.contract(4), 5, 2)
    print("lee-yang(pi/2, 0) N=4 middle-cut q =", repr(q_ly))
    print("mcz depths", {n: mcz_depth(n) for n in (2, 4, 8, 16, 32, 64)})
