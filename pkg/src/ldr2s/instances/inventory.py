"""Multi-factory inventory planning instance.

Three factories serve a single product under seasonal uniform demand;
the inventory level is the single state variable.  Stage-1 data is
deterministic (xi_1 = 1, so the stage-1 demand is the unit constant),
demand at stage t >= 2 is Uniform((1-theta) xi* zeta_t,
(1+theta) xi* zeta_t) with seasonality zeta_t = 1 + sin(pi(t-1)/12)/2.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ModelError
from ..model import AffineStageData, MSLPModel, StageData
from ..static_rules import (AffineRowExpr, RegionSink, RobustSupport,
                            robust_counterpart_row)
from ..stochastic import Degenerate, ProcessSpec, StandardBasis, Uniform
from ..lp import GE, LE


@dataclass(frozen=True)
class InventoryData:
    n_factories: int = 3
    s_lo: float = 500.0
    s_hi: float = 2000.0
    x_bar: float = 567.0
    theta: float = 0.3
    xi_star: float = 1000.0
    alpha: tuple = (1.0, 1.5, 2.0)

    def seasonality(self, t):
        return 1.0 + 0.5 * np.sin(np.pi * (t - 1) / 12.0)

    def cost(self, t):
        return np.array([a * self.seasonality(t) for a in self.alpha])

    def demand_interval(self, t):
        z = self.seasonality(t)
        return ((1.0 - self.theta) * self.xi_star * z,
                (1.0 + self.theta) * self.xi_star * z)


DATA = InventoryData()


def inventory_process(T, data=DATA):
    stages = [[Degenerate(1.0)]]
    for t in range(2, T + 1):
        lo, hi = data.demand_interval(t)
        stages.append([Uniform(lo, hi)])
    return ProcessSpec(stages)


def inventory_model(T, data=DATA) -> MSLPModel:
    """Standard form: state equation -s_t + s_{t-1} + sum_i x_it = xi_t,
    recourse rows encode the inventory and production boxes."""
    if not 2 <= T <= 20:
        raise ModelError("inventory instance supports T in [2, 20]")
    proc = inventory_process(T, data)
    basis = StandardBasis(proc)
    I = data.n_factories
    A = np.array([[-1.0]])
    B = np.array([[1.0]])
    C = np.ones((1, I))
    D = np.zeros((2 + 2 * I, 1))
    D[0, 0] = 1.0
    D[1, 0] = -1.0
    E = np.zeros((2 + 2 * I, I))
    E[2:2 + I] = np.eye(I)
    E[2 + I:] = -np.eye(I)
    d_const = np.concatenate([[data.s_lo, -data.s_hi],
                              np.zeros(I), -data.x_bar * np.ones(I)])
    n_t = 2 + 2 * I

    def mats(t):
        return A, B, C, D, E

    def rhs(t, history):
        if t == 1:
            return np.zeros(1), d_const
        return np.array([history[t - 1][0]]), d_const

    def rhs_batch(t, batch):
        N = len(batch)
        if t == 1:
            return np.zeros((N, 1)), np.tile(d_const, (N, 1))
        return batch.stage(t)[:, :1].copy(), np.tile(d_const, (N, 1))

    def costs(t):
        return data.cost(t), np.zeros(1)

    dims = [(1, n_t, I, 1)] * T
    affine = []
    for t in range(1, T + 1):
        kt = t  # flat history length (one scalar per stage)
        b_lin = np.zeros((1, kt))
        if t > 1:      # stage 1 carries no demand
            b_lin[0, kt - 1] = 1.0
        affine.append(AffineStageData(
            b0=np.zeros(1), b_lin=b_lin,
            d0=d_const.copy(), d_lin=np.zeros((n_t, kt))))
    sd = StageData(dims=dims, mats=mats, rhs=rhs, costs=costs,
                   rhs_batch=rhs_batch)
    model = MSLPModel(
        name="inventory", T=T, stage_data=sd, proc=proc, basis=basis,
        has_relatively_complete_recourse=False,
        static_ldr_reformulable=True, affine=affine)
    model.feasibility_region = inventory_feasibility_set(T, model, data)
    return model


def inventory_feasibility_set(T, model=None, data=DATA):
    """Coefficient region guaranteeing almost-sure recourse feasibility:
    robustified inventory-box rows and balance-feasibility rows
    xi_t - sum_i xbar <= beta_{t-1} xi^{t-1} - beta_t xi^t <= xi_t."""
    if model is None:
        model = inventory_model(T, data)
    layout = model.beta_layout()
    support = RobustSupport.from_process(model.proc)
    sink = RegionSink(layout.dim)
    xbar_sum = data.n_factories * data.x_bar

    def state_terms(expr, t, sign):
        # sign * beta_t xi^t; Phi_tk is flat component k (component 0 is
        # the stage-1 point mass and folds to a constant)
        for k in range(t):
            expr.add_xi_lin(k, layout.index(t, 0, k), sign)

    for t in range(1, T + 1):
        lo = AffineRowExpr()
        state_terms(lo, t, 1.0)
        lo.add_const(-data.s_lo)
        robust_counterpart_row(lo, GE, support, sink)
        hi = AffineRowExpr()
        state_terms(hi, t, 1.0)
        hi.add_const(-data.s_hi)
        robust_counterpart_row(hi, LE, support, sink)
        # balance feasibility: beta_{t-1} xi^{t-1} - beta_t xi^t - demand_t
        bal = AffineRowExpr()
        if t > 1:
            state_terms(bal, t - 1, 1.0)
            bal.add_xi_const(t - 1, -1.0)  # flat component of xi_t
        state_terms(bal, t, -1.0)
        lo_row = AffineRowExpr()
        lo_row.const = bal.const + xbar_sum
        lo_row.lin = dict(bal.lin)
        lo_row.xi_const = dict(bal.xi_const)
        lo_row.xi_lin = dict(bal.xi_lin)
        robust_counterpart_row(lo_row, GE, support, sink)
        robust_counterpart_row(bal, LE, support, sink)
    return sink.region()
