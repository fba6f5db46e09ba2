"""Tree sums against message passing on small random instances."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..amp_symmetric import AmpInstance, MessageState, mp_step
from ..ensembles import GAUSSIAN, Normalization, VarianceProfile, make_rng, sample_symmetric
from ..functions import CoordinatePolynomial
from ..tree_oracle import Family, tree_sum
from .config import TreeConfig

TREE_FIELDS = ("instance", "seed", "N", "q", "d", "t", "family", "i", "j", "r", "tree_value", "mp_value",
               "abs_diff")


def tree_instance_rows(N: int, q: int, d: int, t: int, seed: tuple, instance: int = 0) -> list[dict]:
    """Compare one random node value and one random message value after ``t`` steps."""
    rng = make_rng(seed)
    spec = replace(GAUSSIAN, normalization=Normalization.VAR_ONE_OVER_N)
    A = sample_symmetric(VarianceProfile.wigner(), spec, N, seed + (0,))
    coeffs = CoordinatePolynomial.random(N, q, d, t, rng)
    x0 = rng.standard_normal((N, q))
    inst = AmpInstance(A, coeffs, x0, check=False)
    state = MessageState.initial(inst)
    for _ in range(t):
        state = mp_step(inst, state)
    i, r = int(rng.integers(N)), int(rng.integers(q))
    j = int((i + 1 + rng.integers(N - 1)) % N)
    seed_txt = "-".join(map(str, seed))
    rows = []
    for family, jj, mp in ((Family.NODE, "", state.z_node[i, r]), (Family.MESSAGE, j, state.z[i, j, r])):
        val = tree_sum(A, coeffs, x0, t, family, i, r, None if jj == "" else jj)
        rows.append({"instance": instance, "seed": seed_txt, "N": N, "q": q, "d": d, "t": t,
                     "family": family.name.lower(), "i": i, "j": jj, "r": r, "tree_value": repr(float(val)),
                     "mp_value": repr(float(mp)), "abs_diff": repr(abs(float(val) - float(mp)))})
    return rows


def tree_check(cfg: TreeConfig, master: int = 0) -> list[dict]:
    rows = []
    for k in range(cfg.instances):
        rows += tree_instance_rows(cfg.N, cfg.q, cfg.d, cfg.t, (master, 2, k), k)
    return rows
