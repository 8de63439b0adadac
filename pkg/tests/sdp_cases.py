"""Random SDP instances shared by the solver tests and the acceptance suite."""

import numpy as np
from oracles import random_feasible_sdp

from coposhier.sdp import SdpProblem

N_RANDOM = 50


def to_problem(d, fb=1.0, fc=1.0):
    """SdpProblem from the dense data of ``random_feasible_sdp``; b times ``fb``, c times ``fc``."""
    entries = []
    for a in d["mats"]:
        ent = []
        for row in range(a.shape[0]):
            for i in range(a.shape[1]):
                for j in range(i, a.shape[1]):
                    ent.append((row, i, j, a[row, i, j] if i == j else 2 * a[row, i, j]))
        entries.append(ent)
    m = len(d["b"])
    lp = [(r, c, d["a_lp"][r, c]) for r in range(m) for c in range(d["n_lp"])]
    return SdpProblem(
        d["dims"],
        fb * d["b"],
        entries,
        n_lp=d["n_lp"],
        lp_entries=lp,
        c_blocks=[fc * c for c in d["c_blocks"]],
        c_lp=fc * d["c_lp"],
    )


def random_instances(seed=2024, count=N_RANDOM):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        nb = int(rng.integers(1, 3))
        dims = [int(v) for v in rng.integers(1, 5, nb)]
        n_lp = int(rng.integers(0, 3))
        free = sum(k * (k + 1) // 2 for k in dims) + n_lp
        m = int(rng.integers(1, max(2, free)))
        out.append(random_feasible_sdp(rng, dims, m, n_lp))
    return out
