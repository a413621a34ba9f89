"""Independent construction of the Lee-Yang MPO projectors from the algebra itself.

The algebra is M_2(C) + M_3(C) with matrix units ``(k, a, b)``.  ``O_x`` for an element
``x`` is ``phi^{(x)N}`` applied to the ``(N-1)``-fold coproduct of ``x``; no MPO tensors
are used, so this route shares nothing with the library's tensor tables.
"""

import itertools

import numpy as np

ZETA = np.sqrt((np.sqrt(5) - 1) / 2)
z = ZETA

BASIS = [(1, a, b) for a in (1, 2) for b in (1, 2)] + [(2, a, b) for a in (1, 2, 3) for b in (1, 2, 3)]
INDEX = {e: i for i, e in enumerate(BASIS)}
DIM = len(BASIS)

# coproduct of the matrix units; entries (coefficient, left factor, right factor)
_TABLE = {
    (1, 1, 1): [(1, (1, 1, 1), (1, 1, 1)), (1, (2, 1, 1), (2, 2, 2))],
    (1, 1, 2): [(1, (1, 1, 2), (1, 1, 2)), (z**2, (2, 1, 2), (2, 2, 1)), (z, (2, 1, 3), (2, 2, 3))],
    (1, 2, 2): [(1, (1, 2, 2), (1, 2, 2)), (z**4, (2, 2, 2), (2, 1, 1)), (z**3, (2, 2, 3), (2, 1, 3)),
                (z**3, (2, 3, 2), (2, 3, 1)), (z**2, (2, 3, 3), (2, 3, 3))],
    (2, 1, 1): [(1, (1, 1, 1), (2, 1, 1)), (1, (2, 1, 1), (1, 2, 2)), (1, (2, 1, 1), (2, 3, 3))],
    (2, 1, 2): [(1, (1, 1, 2), (2, 1, 2)), (1, (2, 1, 2), (1, 2, 1)), (1, (2, 1, 3), (2, 3, 2))],
    (2, 1, 3): [(1, (1, 1, 2), (2, 1, 3)), (1, (2, 1, 3), (1, 2, 2)), (z, (2, 1, 2), (2, 3, 1)),
                (-(z**2), (2, 1, 3), (2, 3, 3))],
    (2, 2, 2): [(1, (1, 2, 2), (2, 2, 2)), (1, (2, 2, 2), (1, 1, 1)), (1, (2, 3, 3), (2, 2, 2))],
    (2, 2, 3): [(1, (1, 2, 2), (2, 2, 3)), (1, (2, 2, 3), (1, 1, 2)), (z, (2, 3, 2), (2, 2, 1)),
                (-(z**2), (2, 3, 3), (2, 2, 3))],
    (2, 3, 3): [(1, (1, 2, 2), (2, 3, 3)), (1, (2, 3, 3), (1, 2, 2)), (z**2, (2, 2, 2), (2, 1, 1)),
                (-(z**3), (2, 2, 3), (2, 1, 3)), (-(z**3), (2, 3, 2), (2, 3, 1)), (z**4, (2, 3, 3), (2, 3, 3))],
}


def _star(e):
    return (e[0], e[2], e[1])


def coproduct() -> np.ndarray:
    """``Delta[x, g, h]``: coefficient of ``g (x) h`` in ``Delta(x)``."""
    table = dict(_TABLE)
    for x in list(table):
        if _star(x) not in table:
            table[_star(x)] = [(np.conj(c), _star(g), _star(h)) for c, g, h in table[x]]
    out = np.zeros((DIM, DIM, DIM))
    for x, terms in table.items():
        for c, g, h in terms:
            out[INDEX[x], INDEX[g], INDEX[h]] += c
    return out


def product() -> np.ndarray:
    """``P[i, j, k]``: coefficient of basis ``k`` in ``e_i e_j``."""
    out = np.zeros((DIM, DIM, DIM))
    for (i, e1), (j, e2) in itertools.product(enumerate(BASIS), repeat=2):
        if e1[0] == e2[0] and e1[2] == e2[1]:
            out[i, j, INDEX[(e1[0], e1[1], e2[2])]] = 1.0
    return out


def homomorphism_defect() -> float:
    """``max |Delta(xy) - Delta(x) Delta(y)|`` over basis pairs."""
    dm, p = coproduct(), product()
    worst = 0.0
    for i, j in itertools.product(range(DIM), repeat=2):
        lhs = np.einsum("k,kgh->gh", p[i, j], dm)
        rhs = np.einsum("gh,GH,gGa,hHb->ab", dm[i], dm[j], p, p)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def coassociativity_defect() -> float:
    dm = coproduct()
    left = np.einsum("xgh,gab->xabh", dm, dm)
    right = np.einsum("xgh,hab->xgab", dm, dm)
    return float(np.abs(left - right).max())


def phi(v) -> np.ndarray:
    """Block embedding of an algebra vector as a 5x5 matrix (levels 1-2, then 3-5)."""
    m = np.zeros((5, 5), dtype=complex)
    for i, (k, a, b) in enumerate(BASIS):
        off = 0 if k == 1 else 2
        m[off + a - 1, off + b - 1] += v[i]
    return m


def element(terms) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    for c, e in terms:
        v[INDEX[e]] += c
    return v


TAU_E = element([(1, (1, 1, 1)), (1, (1, 2, 2)), (1, (2, 3, 3))])
TAU_SIGMA = element([(1, (1, 1, 2)), (1, (1, 2, 1)), (1, (1, 2, 2)), (-(z**2), (2, 3, 3))])


def mpo(x, n_sites: int) -> np.ndarray:
    """Dense ``phi^{(x)N}(Delta^{N-1}(x))``."""
    dm = coproduct()
    t = np.asarray(x, dtype=complex)
    for _ in range(n_sites - 1):
        t = np.einsum("...g,gab->...ab", t, dm)
    mats = [phi(np.eye(DIM)[i]) for i in range(DIM)]
    out = np.zeros((5**n_sites, 5**n_sites), dtype=complex)
    for multi in np.ndindex(*([DIM] * n_sites)):
        c = t[multi]
        if c == 0:
            continue
        m = np.ones((1, 1))
        for i in multi:
            m = np.kron(m, mats[i])
        out += c * m
    return out
