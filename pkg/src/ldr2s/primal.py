"""Primal two-stage LDR sample-average approximation, solved by Benders
decomposition with one aggregated optimality cut per stage and Farkas
feasibility cuts, plus the explicit deterministic equivalent used as a
testing oracle.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (IterationLimit, MasterInfeasible, ModelError, SizeGuard)
from .lp import EQ, GE, LE, LPStatus, StandardLP, solve_lp
from .model import (CoeffLayout, LDRCoefficients, LPBuilder, MSLPModel,
                    append_region)
from .stage_lp import PrimalStageLP, basis_values
from .stochastic import PathBatch


def _hull_indices(points):
    """Indices of scenarios on the convex hull of a <=2-D point cloud
    (monotone chain); all indices when the cloud is higher-dimensional."""
    pts = np.asarray(points, dtype=float)
    N, d = pts.shape
    if N <= 4:
        return list(range(N))
    if d == 0:
        return [0]
    if d == 1:
        return sorted({int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))})
    if d > 2:
        return list(range(N))
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def half(indices):
        chain = []
        for i in indices:
            while len(chain) >= 2:
                o, a = pts[chain[-2]], pts[chain[-1]]
                if np.cross(a - o, pts[i] - o) <= 1e-14:
                    chain.pop()
                else:
                    break
            chain.append(i)
        return chain

    lower = half(order)
    upper = half(order[::-1])
    return sorted(set(lower[:-1] + upper[:-1]) or {int(order[0])})


@dataclass
class Cut:
    stage: int
    kind: str                      # "opt" | "feas"
    coefs: np.ndarray              # over the beta layout
    rhs: float
    # opt:  eta_t >= coefs . beta + rhs
    # feas: coefs . beta + rhs <= 0


@dataclass
class PrimalSAA:
    model: MSLPModel
    sample: PathBatch
    mode: str
    phis: dict
    templates: dict
    beta_layout: CoeffLayout
    mean_phi: dict                 # per stage: objective basis means
    eta_lb: float = 0.0

    @property
    def N(self):
        return len(self.sample)


def build_primal_saa(model: MSLPModel, sample: PathBatch, mode="analytic",
                     eta_lb=None) -> PrimalSAA:
    phis = basis_values(model, sample)
    templates = {t: PrimalStageLP(model, t) for t in range(2, model.T + 1)}
    mean_phi = {}
    for t in model.stages():
        mean_phi[t] = (model.basis.mean(t) if mode == "analytic"
                       else phis[t].mean(axis=0))
    neg_costs = any(
        np.min(model.stage_data.costs(t)[0]) < 0 for t in range(2, model.T + 1)
    )
    if eta_lb is None:
        if neg_costs:
            warnings.warn("negative recourse costs: using eta lower bound "
                          "-1e9; pass eta_lb to control it")
            eta_lb = -1e9
        else:
            eta_lb = 0.0
    return PrimalSAA(model=model, sample=sample, mode=mode, phis=phis,
                     templates=templates, beta_layout=model.beta_layout(),
                     mean_phi=mean_phi, eta_lb=eta_lb)


class _MasterLayout:
    def __init__(self, saa: PrimalSAA):
        sd = saa.model.stage_data
        self.p1 = sd.p(1)
        self.x1 = list(range(self.p1))
        self.beta0 = self.p1
        self.tau = saa.beta_layout.dim
        self.eta0 = self.p1 + self.tau
        self.n_eta = saa.model.T - 1

    def beta_var(self, idx):
        return self.beta0 + idx

    def eta_var(self, t):
        return self.eta0 + (t - 2)


def _master_base(saa: PrimalSAA):
    """Builder with first-stage rows, region rows, replicated state-box
    rows (dominance-pruned), and the objective (without cuts)."""
    model = saa.model
    sd = model.stage_data
    lay = _MasterLayout(saa)
    b = LPBuilder()
    c1, h1 = sd.costs(1)
    for i in range(lay.p1):
        b.add_var(float(c1[i]))
    blay = saa.beta_layout
    for col in range(blay.dim):
        b.add_var(0.0)
    for t in range(2, model.T + 1):
        b.add_var(1.0, lb=saa.eta_lb)
    # objective E[h_t' beta_t Phi_t]
    for t in model.stages():
        h = np.asarray(sd.costs(t)[1], dtype=float)
        mean = saa.mean_phi[t]
        for i in range(sd.q(t)):
            if h[i] == 0.0:
                continue
            for k in range(model.basis.K(t)):
                b.obj[lay.beta_var(blay.index(t, i, k))] += h[i] * mean[k]
    # stage-1 rows (beta_1 is s_1 since K_1 = 1)
    A, B_, C, D, E = sd.mats(1)
    b1, d1 = sd.rhs(1, [np.array([1.0])])
    for r in range(sd.m(1)):
        terms = [(lay.beta_var(blay.index(1, i, 0)), float(A[r, i]))
                 for i in range(sd.q(1))]
        terms += [(lay.x1[i], float(C[r, i])) for i in range(sd.p(1))]
        b.add_row(terms, EQ, float(b1[r]))
    for r in range(sd.n(1)):
        terms = [(lay.beta_var(blay.index(1, i, 0)), float(D[r, i]))
                 for i in range(sd.q(1))]
        terms += [(lay.x1[i], float(E[r, i])) for i in range(sd.p(1))]
        b.add_row(terms, GE, float(d1[r]), fold=True)
    # feasibility region for beta
    if model.feasibility_region is not None:
        var_map = {c: lay.beta_var(c) for c in range(blay.dim)}
        append_region(b, model.feasibility_region, var_map)
    # replicated state-box rows
    if sd.state_box is not None:
        for t in range(2, model.T + 1):
            lo, hi = sd.state_box(t)
            phi = saa.phis[t]
            keep = _hull_indices(phi[:, 1:]) if phi.shape[1] > 1 else [0]
            K = model.basis.K(t)
            for n in keep:
                for i in range(sd.q(t)):
                    terms = [(lay.beta_var(blay.index(t, i, k)),
                              float(phi[n, k])) for k in range(K)]
                    if np.isfinite(lo[i]):
                        b.add_row(terms, GE, float(lo[i]))
                    if np.isfinite(hi[i]):
                        b.add_row(list(terms), LE, float(hi[i]))
    return b, lay


@dataclass
class BendersLogEntry:
    iteration: int
    master_objective: float
    cuts_added: int
    max_violation: float


@dataclass
class BendersResult:
    x1: np.ndarray
    beta: LDRCoefficients
    objective: float
    master_objective: float
    log: list
    cuts: list
    stage_means: dict


def benders_solve(saa: PrimalSAA, tol_violation=1e-7, max_iters=200) -> BendersResult:
    """L-shaped loop: master, then all stage subproblems on the sample;
    one Farkas feasibility cut per stage with an infeasible scenario
    (first such scenario), otherwise one aggregated optimality cut per
    stage when violated.  Stops when nothing is violated."""
    model = saa.model
    base, lay = _master_base(saa)
    blay = saa.beta_layout
    cuts: list[Cut] = []
    log = []
    N = saa.N
    for it in range(1, max_iters + 1):
        b = LPBuilder()
        b.obj = list(base.obj)
        b.lb = list(base.lb)
        b.ub = list(base.ub)
        b.triplets = list(base.triplets)
        b.senses = list(base.senses)
        b.rhs = list(base.rhs)
        for cut in cuts:
            nz = np.nonzero(cut.coefs)[0]
            if cut.kind == "opt":
                terms = [(lay.eta_var(cut.stage), 1.0)]
                terms += [(lay.beta_var(int(c)), -float(cut.coefs[c])) for c in nz]
                b.add_row(terms, GE, cut.rhs)
            else:
                terms = [(lay.beta_var(int(c)), float(cut.coefs[c])) for c in nz]
                b.add_row(terms, LE, -cut.rhs)
        res = solve_lp(b.build())
        if res.status == LPStatus.INFEASIBLE:
            raise MasterInfeasible(
                "Benders master infeasible: coefficient region or state box "
                "inconsistent with the sample")
        if res.status == LPStatus.UNBOUNDED:
            raise ModelError("Benders master unbounded; the model needs a "
                             "coefficient region bounding beta")
        x1 = res.x[:lay.p1]
        beta_vec = res.x[lay.beta0:lay.beta0 + lay.tau]
        beta = LDRCoefficients("primal", blay.unpack(beta_vec))
        eta = {t: res.x[lay.eta_var(t)] for t in range(2, model.T + 1)}
        added = 0
        max_viol = 0.0
        stage_means = {}
        for t in range(2, model.T + 1):
            tmpl = saa.templates[t]
            out = tmpl.solve_batch(beta, saa.sample, saa.phis, want_duals=True)
            if not out.all_feasible:
                n_bad = int(np.nonzero(out.status != 0)[0][0])
                y_eq, mu = out.feas_cut_data[n_bad]
                bvec, dvec = model.stage_data.rhs(
                    t, saa.sample.path(n_bad).history(t))
                coefs = np.zeros(blay.dim)
                Wt = y_eq @ tmpl.A + mu @ tmpl.D
                Wp = y_eq @ tmpl.B
                off, q, K = blay.slice(t)
                coefs[off:off + q * K] = -np.outer(Wt, saa.phis[t][n_bad]).ravel()
                offp, qp, Kp = blay.slice(t - 1)
                coefs[offp:offp + qp * Kp] = -np.outer(
                    Wp, saa.phis[t - 1][n_bad]).ravel()
                rhs = float(y_eq @ bvec + mu @ dvec)
                cuts.append(Cut(t, "feas", coefs, rhs))
                added += 1
                max_viol = np.inf
                continue
            value = float(out.values.mean())
            if value < saa.eta_lb - 1e-9 * max(1.0, abs(value)):
                raise ModelError(
                    f"stage {t} sampled value {value:.6g} below the eta "
                    f"lower bound {saa.eta_lb:.6g}; pass a valid eta_lb")
            stage_means[t] = value
            viol = value - eta[t]
            max_viol = max(max_viol, viol / max(1.0, abs(value)))
            if viol > tol_violation * max(1.0, abs(value)):
                coefs = np.zeros(blay.dim)
                off, q, K = blay.slice(t)
                coefs[off:off + q * K] = out.grad_t.mean(axis=0).ravel()
                offp, qp, Kp = blay.slice(t - 1)
                coefs[offp:offp + qp * Kp] = out.grad_prev.mean(axis=0).ravel()
                rhs = value - float(coefs @ beta_vec)
                cuts.append(Cut(t, "opt", coefs, rhs))
                added += 1
        log.append(BendersLogEntry(it, float(res.objective), added,
                                   float(max_viol)))
        if added == 0:
            first_stage = float(res.objective) - sum(
                eta[t] for t in range(2, model.T + 1))
            objective = first_stage + sum(stage_means.values())
            return BendersResult(x1=x1, beta=beta, objective=objective,
                                 master_objective=float(res.objective),
                                 log=log, cuts=cuts, stage_means=stage_means)
    raise IterationLimit("Benders did not converge", best=log[-1])


def eval_Q(model: MSLPModel, t: int, beta: LDRCoefficients, path):
    """Stage value Q_t on one path: (value, subgrad_t, subgrad_prev) or
    (None, cut_multipliers) when infeasible."""
    batch = PathBatch(model.proc, [np.asarray([path.stage(r)])
                                   for r in range(1, model.T + 1)])
    phis = basis_values(model, batch)
    tmpl = PrimalStageLP(model, t)
    out = tmpl.solve_batch(beta, batch, phis, want_duals=True)
    if out.all_feasible:
        return (float(out.values[0]), out.grad_t[0], out.grad_prev[0])
    return (None, out.feas_cut_data[0])


def deterministic_equivalent(saa: PrimalSAA, size_guard=1_000_000):
    """One LP for the sampled two-stage problem: beta shared, recourse
    variables per scenario.  Oracle for benders_solve."""
    model = saa.model
    sd = model.stage_data
    N = saa.N
    total = N * model.T * (max(sd.p(t) for t in model.stages())
                           + max(sd.q(t) for t in model.stages()))
    if total > size_guard:
        raise SizeGuard(f"deterministic equivalent would need ~{total} vars")
    b, lay = _master_base(saa)
    blay = saa.beta_layout
    # drop the eta epigraph variables from the objective (recourse costs
    # enter explicitly); keep the variables pinned at their lower bound
    for t in range(2, model.T + 1):
        b.obj[lay.eta_var(t)] = 0.0
        b.ub[lay.eta_var(t)] = b.lb[lay.eta_var(t)]
    w = 1.0 / N
    for n in range(N):
        for t in range(2, model.T + 1):
            A, B_, C, D, E = sd.mats(t)
            bvec, dvec = sd.rhs(t, saa.sample.path(n).history(t))
            c_t = sd.costs(t)[0]
            xv = [b.add_var(w * float(c_t[i])) for i in range(sd.p(t))]
            phi = saa.phis[t][n]
            phip = saa.phis[t - 1][n]
            K, Kp = model.basis.K(t), model.basis.K(t - 1)
            for r in range(sd.m(t)):
                terms = [(xv[i], float(C[r, i])) for i in range(sd.p(t))]
                for i in range(sd.q(t)):
                    if A[r, i] != 0.0:
                        terms += [(lay.beta_var(blay.index(t, i, k)),
                                   float(A[r, i]) * float(phi[k]))
                                  for k in range(K)]
                for i in range(sd.q(t - 1)):
                    if B_[r, i] != 0.0:
                        terms += [(lay.beta_var(blay.index(t - 1, i, k)),
                                   float(B_[r, i]) * float(phip[k]))
                                  for k in range(Kp)]
                b.add_row(terms, EQ, float(bvec[r]))
            for r in range(sd.n(t)):
                terms = [(xv[i], float(E[r, i])) for i in range(sd.p(t))
                         if E[r, i] != 0.0]
                for i in range(sd.q(t)):
                    if D[r, i] != 0.0:
                        terms += [(lay.beta_var(blay.index(t, i, k)),
                                   float(D[r, i]) * float(phi[k]))
                                  for k in range(K)]
                b.add_row(terms, GE, float(dvec[r]), fold=True)
    lp = b.build()
    return lp, lay
