"""Random small instances for oracle cross-checks.

Construction guarantees: constant matrices with an identity block in
C_t (so x can always absorb the state equations inside its wide box),
box-bounded x and s inside X_t (almost-surely bounded stage sets),
affine rhs in the scalar stage observations, nonnegative recourse
costs, and a coefficient box as the feasibility region (bounded
decomposition masters).  beta = 0 is always feasible for the sampled
primal problem.
"""

import numpy as np

from ..model import AffineStageData, FeasibilityRegion, MSLPModel, StageData
from ..lp import GE, LE
from ..stochastic import Degenerate, ProcessSpec, StandardBasis, Uniform


def random_instance(seed, T=None, beta_box=5.0) -> MSLPModel:
    rng = np.random.default_rng((seed, 0xA11CE))
    T = int(T if T is not None else rng.integers(2, 5))
    stages = [[Degenerate(1.0)]]
    for t in range(2, T + 1):
        lo = float(rng.uniform(0.4, 0.9))
        stages.append([Uniform(lo, lo + float(rng.uniform(0.4, 1.2)))])
    proc = ProcessSpec(stages)
    basis = StandardBasis(proc)

    dims = []
    mats_list = []
    rhs_aff = []
    costs_list = []
    sbox = []
    X = 50.0
    SBX = 8.0
    for t in range(1, T + 1):
        q = int(rng.integers(1, 3))
        m = int(rng.integers(1, 3))
        p = m + int(rng.integers(0, 3))
        A = np.round(rng.uniform(-2, 2, (m, q)) * (rng.random((m, q)) < 0.8), 1)
        qprev = dims[-1][3] if t > 1 else 0
        B = (np.round(rng.uniform(-2, 2, (m, qprev))
                      * (rng.random((m, qprev)) < 0.8), 1)
             if t > 1 else np.zeros((m, 0)))
        C = np.hstack([np.eye(m), np.round(
            rng.uniform(-2, 2, (m, p - m)) * (rng.random((m, p - m)) < 0.7), 1)])
        # X_t rows: boxes on x and s
        n = 2 * (p + q)
        D = np.zeros((n, q))
        E = np.zeros((n, p))
        d0 = np.zeros(n)
        r = 0
        for i in range(p):
            E[r, i] = 1.0
            d0[r] = 0.0     # x >= 0 keeps stage values nonnegative
            r += 1
            E[r, i] = -1.0
            d0[r] = -X
            r += 1
        for i in range(q):
            D[r, i] = 1.0
            d0[r] = -SBX
            r += 1
            D[r, i] = -1.0
            d0[r] = -SBX
            r += 1
        b0 = np.round(rng.uniform(0.5, 5.0, m), 1)
        b1 = np.round(rng.uniform(0.0, 3.0, m), 1)
        if t == 1:
            b0 = b0 + b1  # xi_1 = 1 folded in
            b1 = np.zeros(m)
        c = np.round(rng.uniform(0.0, 4.0, p), 2)
        h = np.round(rng.uniform(-2.0, 2.0, q), 2)
        dims.append((m, n, p, q))
        mats_list.append((A, B, C, D, E))
        rhs_aff.append((b0, b1, d0))
        costs_list.append((c, h))
        sbox.append((np.full(q, -SBX), np.full(q, SBX)))

    def mats(t):
        return mats_list[t - 1]

    def rhs(t, history):
        b0, b1, d0 = rhs_aff[t - 1]
        xi = history[t - 1][0]
        return b0 + b1 * xi, d0.copy()

    def rhs_batch(t, batch):
        b0, b1, d0 = rhs_aff[t - 1]
        xi = batch.stage(t)[:, 0]
        return b0[None, :] + np.outer(xi, b1), np.tile(d0, (len(batch), 1))

    def costs(t):
        return costs_list[t - 1]

    def state_box(t):
        return sbox[t - 1]

    sd = StageData(dims=dims, mats=mats, rhs=rhs, costs=costs,
                   rhs_batch=rhs_batch, state_box=state_box)
    affine = []
    for t in range(1, T + 1):
        b0, b1, d0 = rhs_aff[t - 1]
        m, n = dims[t - 1][0], dims[t - 1][1]
        b_lin = np.zeros((m, t))
        if t > 1:
            b_lin[:, t - 1] = b1
        affine.append(AffineStageData(b0=b0, b_lin=b_lin, d0=d0,
                                      d_lin=np.zeros((n, t))))
    model = MSLPModel(
        name=f"random-{seed}", T=T, stage_data=sd, proc=proc, basis=basis,
        has_relatively_complete_recourse=False,
        static_ldr_reformulable=True, affine=affine)
    # coefficient box |beta| <= beta_box
    layout = model.beta_layout()
    trip, senses, rhs_rows = [], [], []
    for col in range(layout.dim):
        trip.append((len(rhs_rows), col, 1.0))
        senses.append(GE)
        rhs_rows.append(-beta_box)
        trip.append((len(rhs_rows), col, 1.0))
        senses.append(LE)
        rhs_rows.append(beta_box)
    model.feasibility_region = FeasibilityRegion(
        layout.dim, 0, trip, senses, rhs_rows)
    return model
