"""Feasible policies and statistical bounds from approximate two-stage
rule coefficients: rule-following policy simulation, the state-target
tracking policy with golden-section penalty tuning, dual lower-bound
evaluation, and the common-random-numbers gap estimator.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, StageInfeasible, TooFewSamples
from .lp import LPStatus, Workspace, solve_lp
from .lp import _simplex_core as S
from .model import LDRCoefficients, LPBuilder, MSLPModel
from .stage_lp import DualStageLP, PrimalStageLP, _csc_from_dense_rows, \
    _run_batch, basis_values
from .stochastic import ConfidenceInterval, PathBatch, confidence_interval


@dataclass
class PolicyRun:
    """Per-scenario outcome of a policy simulation."""

    costs: np.ndarray
    feasible: np.ndarray
    ci: ConfidenceInterval | None
    infeas_fraction: float
    kind: str
    traces: list | None = None

    @property
    def mean(self):
        return float(self.costs[self.feasible].mean())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "cost", "feasible"])
            for j, (c, f) in enumerate(zip(self.costs, self.feasible)):
                w.writerow([j, f"{c:.10g}" if f else "", int(f)])

    def summary(self):
        return {
            "kind": self.kind,
            "n_scenarios": int(len(self.costs)),
            "infeasible_fraction": self.infeas_fraction,
            "mean_feasible": self.mean if self.feasible.any() else None,
            "ci": None if self.ci is None else {
                "mean": self.ci.mean, "halfwidth": self.ci.halfwidth,
                "level": self.ci.level, "n": self.ci.sample_size,
            },
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _expected_state_cost(model: MSLPModel, beta: LDRCoefficients,
                         batch=None, phis=None):
    """Sum_t E[h_t' beta_t Phi_t]; closed form when the basis means are
    available, otherwise the sample mean over the given batch."""
    total = 0.0
    for t in model.stages():
        h = np.asarray(model.stage_data.costs(t)[1], dtype=float)
        if not np.any(h):
            continue
        mean = (model.basis.mean(t) if phis is None
                else phis[t].mean(axis=0))
        total += float(h @ beta.stage(t) @ mean)
    return total


def check_region_membership(model: MSLPModel, beta: LDRCoefficients):
    """True iff beta admits auxiliary values satisfying the model's
    coefficient feasibility region."""
    region = model.feasibility_region
    if region is None:
        return None
    layout = model.beta_layout()
    vec = layout.pack(beta.mats)
    b = LPBuilder()
    for v in vec:
        b.add_var(0.0, lb=float(v), ub=float(v))
    from .model import append_region
    append_region(b, region, {c: c for c in range(layout.dim)})
    res = solve_lp(b.build())
    return res.status == LPStatus.OPTIMAL


def simulate_ldr_policy(model: MSLPModel, x1, beta: LDRCoefficients,
                        batch: PathBatch, level=0.95,
                        store_traces=False) -> PolicyRun:
    """Follow the state rule exactly; per-scenario cost is the stage-1
    cost plus the expected state cost plus the recourse stage values.
    Scenarios with an infeasible stage problem are flagged (never
    silently dropped) and excluded from the confidence interval."""
    if len(batch) < 2:
        raise TooFewSamples("policy evaluation needs at least 2 scenarios")
    member = check_region_membership(model, beta)
    if member is False:
        warnings.warn("state-rule coefficients violate the declared "
                      "feasibility region; feasibility is now empirical")
    phis = basis_values(model, batch)
    c1 = np.asarray(model.stage_data.costs(1)[0], dtype=float)
    const = float(c1 @ np.asarray(x1, dtype=float))
    const += _expected_state_cost(model, beta)
    N = len(batch)
    costs = np.full(N, const)
    feasible = np.ones(N, dtype=bool)
    traces = [] if store_traces else None
    for t in range(2, model.T + 1):
        tmpl = PrimalStageLP(model, t)
        out = tmpl.solve_batch(beta, batch, phis, want_x=store_traces)
        ok = out.status == S.K_OPTIMAL
        feasible &= ok
        costs[ok] += out.values[ok]
        if store_traces:
            traces.append({"stage": t, "x": out.x,
                           "s": phis[t] @ beta.stage(t).T})
    ci = (confidence_interval(costs[feasible], level)
          if int(feasible.sum()) >= 2 else None)
    return PolicyRun(costs=costs, feasible=feasible, ci=ci,
                     infeas_fraction=float(1.0 - feasible.mean()),
                     kind="ldr", traces=traces)


class STTStageLP:
    """Stage problem of the tracking policy: state and recourse free,
    1-norm deviation of the state from its rule target penalized."""

    def __init__(self, model: MSLPModel, t: int):
        sd = model.stage_data
        A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
        self.model, self.t = model, t
        self.A, self.B = A, B
        m_t, n_t, p_t, q_t = sd.m(t), sd.n(t), sd.p(t), sd.q(t)
        self.dims = (m_t, n_t, p_t, q_t)
        nv = q_t + p_t + q_t          # s, x, dev
        self.nv = nv
        folds_lb, folds_ub, keep = [], [], []
        SE = np.hstack([D, E])
        for r in range(n_t):
            nz = np.nonzero(SE[r])[0]
            if len(nz) == 1:
                v, a = int(nz[0]), float(SE[r, nz[0]])
                (folds_lb if a > 0 else folds_ub).append((r, v, a))
            else:
                keep.append(r)
        self.keep = np.asarray(keep, dtype=np.int64)
        self.folds_lb, self.folds_ub = folds_lb, folds_ub
        rows = [np.hstack([A, C, np.zeros((m_t, q_t))])]
        if len(keep):
            rows.append(np.hstack([D[self.keep], E[self.keep],
                                   np.zeros((len(keep), q_t))]))
        dev = np.zeros((2 * q_t, nv))
        for i in range(q_t):
            dev[2 * i, i] = -1.0
            dev[2 * i, q_t + p_t + i] = 1.0     # dev_i - s_i >= -target
            dev[2 * i + 1, i] = 1.0
            dev[2 * i + 1, q_t + p_t + i] = 1.0  # dev_i + s_i >= target
        rows.append(dev)
        stacked = np.vstack(rows)
        self.kern_m = stacked.shape[0]
        self.csc = _csc_from_dense_rows(stacked)
        self.c_t = np.asarray(sd.costs(t)[0], dtype=float)
        self.h_t = np.asarray(sd.costs(t)[1], dtype=float)

    def solve_batch(self, s_prev, targets, batch, rho):
        m_t, n_t, p_t, q_t = self.dims
        sd = self.model.stage_data
        bmat, dmat = sd.rhs_for_batch(self.t, batch)
        N = len(batch)
        rhs_eq = bmat - s_prev @ self.B.T
        lb2 = np.full((N, self.nv), -np.inf)
        ub2 = np.full((N, self.nv), np.inf)
        lb2[:, q_t + p_t:] = 0.0
        for (r, v, a) in self.folds_lb:
            cand = dmat[:, r] / a
            better = cand > lb2[:, v]
            lb2[better, v] = cand[better]
        for (r, v, a) in self.folds_ub:
            cand = dmat[:, r] / a
            better = cand < ub2[:, v]
            ub2[better, v] = cand[better]
        nk = len(self.keep)
        rlo = np.empty((N, self.kern_m))
        rhi = np.full((N, self.kern_m), np.inf)
        rlo[:, :m_t] = rhs_eq
        rhi[:, :m_t] = rhs_eq
        if nk:
            rlo[:, m_t:m_t + nk] = dmat[:, self.keep]
        rlo[:, m_t + nk::2] = -targets
        rlo[:, m_t + nk + 1::2] = targets
        c = np.concatenate([self.h_t, self.c_t, np.full(q_t, rho)])
        status, vals, X, _, _, _ = _run_batch(
            self.nv, self.kern_m, self.csc, c, None, lb2, ub2, rlo, rhi,
            want_x=True)
        s_new = X[:, :q_t]
        cost = X[:, :q_t] @ self.h_t + X[:, q_t:q_t + p_t] @ self.c_t
        return status, cost, s_new, X[:, q_t:q_t + p_t]


def stt_step(model: MSLPModel, t, history, s_prev, beta: LDRCoefficients,
             rho):
    """One tracking-policy stage decision on one history; the reported
    stage cost excludes the penalty term."""
    batch = PathBatch(model.proc, [np.asarray([history[r - 1]])
                                   for r in range(1, len(history) + 1)]
                      + [np.zeros((1, model.proc.k(r)))
                         for r in range(len(history) + 1, model.T + 1)])
    phis = {t: model.basis.eval(t, history)[None, :]}
    tmpl = STTStageLP(model, t)
    target = (beta.stage(t) @ phis[t][0])[None, :]
    status, cost, s_new, x_new = tmpl.solve_batch(
        np.asarray(s_prev, dtype=float)[None, :], target, batch, rho)
    if status[0] != S.K_OPTIMAL:
        raise StageInfeasible(t)
    return x_new[0], s_new[0], float(cost[0])


def simulate_stt_policy(model: MSLPModel, x1, beta: LDRCoefficients, rho,
                        batch: PathBatch, level=0.95,
                        store_traces=False) -> PolicyRun:
    """Forward pass of the tracking policy; every scenario is feasible
    under relatively complete recourse, otherwise StageInfeasible."""
    if not model.has_relatively_complete_recourse:
        warnings.warn("model does not declare relatively complete recourse; "
                      "the tracking policy may abort")
    phis = basis_values(model, batch)
    sd = model.stage_data
    c1 = np.asarray(sd.costs(1)[0], dtype=float)
    h1 = np.asarray(sd.costs(1)[1], dtype=float)
    s1 = beta.stage(1)[:, 0]
    const = float(c1 @ np.asarray(x1, dtype=float)) + float(h1 @ s1)
    N = len(batch)
    costs = np.full(N, const)
    s_prev = np.tile(s1, (N, 1))
    traces = [] if store_traces else None
    for t in range(2, model.T + 1):
        tmpl = STTStageLP(model, t)
        targets = phis[t] @ beta.stage(t).T
        status, cost, s_new, x_new = tmpl.solve_batch(
            s_prev, targets, batch, rho)
        bad = np.nonzero(status != S.K_OPTIMAL)[0]
        if len(bad):
            raise StageInfeasible(t, int(bad[0]))
        costs += cost
        if store_traces:
            traces.append({"stage": t, "s": s_new.copy(), "x": x_new.copy()})
        s_prev = s_new
    ci = confidence_interval(costs, level) if N >= 2 else None
    return PolicyRun(costs=costs, feasible=np.ones(N, dtype=bool), ci=ci,
                     infeas_fraction=0.0, kind="stt", traces=traces)


def golden_section_search(costf, lo=0.0, hi=1000.0, xtol=1.0,
                          rel_obj_tol=1e-6, expand=4.0, max_restarts=8):
    """Golden-section minimization with the restart rule: when the
    bracket's upper estimate attains the minimum estimated cost (and
    the relative-objective criterion did not fire), restart with
    lower = old upper, upper = expand * old upper.

    Returns (argmin over all evaluations, evaluations dict)."""
    ratio = 0.618034
    cache = {}

    def f(r):
        r = float(r)
        if r not in cache:
            cache[r] = float(costf(r))
        return cache[r]

    for _ in range(max_restarts + 1):
        a, b = float(lo), float(hi)
        f(a)
        f(b)
        c1 = b - ratio * (b - a)
        c2 = a + ratio * (b - a)
        rel_stop = False
        while b - a >= xtol:
            if abs(f(b) - f(a)) < rel_obj_tol * abs(f(a) + f(b)):
                rel_stop = True
                break
            if f(c1) <= f(c2):
                b, c2 = c2, c1
                c1 = b - ratio * (b - a)
            else:
                a, c1 = c1, c2
                c2 = a + ratio * (b - a)
        best_rho = min(cache, key=lambda r: (cache[r], r))
        if not rel_stop and best_rho == hi:
            lo, hi = hi, expand * hi
            continue
        return best_rho, dict(cache)
    return best_rho, dict(cache)


def tune_rho(model: MSLPModel, x1, beta: LDRCoefficients,
             tune_batch: PathBatch, lo=0.0, hi=1000.0):
    """Penalty weight minimizing the mean tracking-policy cost on the
    fixed tuning sample (100 paths in the experiment protocol)."""

    def costf(rho):
        run = simulate_stt_policy(model, x1, beta, rho, tune_batch)
        return float(run.costs.mean())

    return golden_section_search(costf, lo=lo, hi=hi)


def evaluate_dual_bound(model: MSLPModel, gamma1, lam: LDRCoefficients,
                        batch: PathBatch, level=0.95,
                        mode="analytic") -> PolicyRun:
    """Statistical lower bound: first-stage dual value plus expected
    state-equation terms plus per-scenario stage dual values."""
    if len(batch) < 2:
        raise TooFewSamples("bound evaluation needs at least 2 scenarios")
    from .static_rules import DualSystem
    phis = basis_values(model, batch)
    sd = model.stage_data
    sys1 = DualSystem(model, 1)
    d1 = np.asarray(sd.rhs(1, [np.array([1.0])])[1], dtype=float)
    const = float(d1[sys1.kept] @ np.asarray(gamma1, dtype=float))
    N = len(batch)
    values = np.full(N, const)
    # E[b_t' Lambda_t Phi_t]: closed form when available, else the
    # per-scenario sample term (keeps the estimator unbiased)
    closed = (model.affine is not None
              and model.basis.xi_affine(1) is not None)
    for t in model.stages():
        bmat, _ = sd.rhs_for_batch(t, batch)
        if not np.any(bmat):
            continue
        if closed:
            from .static_rules import _cross_moment, _phi_affine
            aff = model.affine[t - 1]
            bphi = _cross_moment(aff.b0, aff.b_lin, _phi_affine(model, t),
                                 model.basis.second_moment(t),
                                 model.basis.mean(t), model)
            values += float(np.sum(bphi * lam.stage(t)))
        else:
            lamv = phis[t] @ lam.stage(t).T
            values += np.einsum("ni,ni->n", bmat, lamv)
    drop_fn = getattr(sd, "dual_drop_rows", None)
    for t in range(2, model.T + 1):
        split = sd.dual_split(t) if sd.dual_split is not None else None
        drops = list(drop_fn(t)) if drop_fn is not None else []
        if split is None:
            tmpls = [DualStageLP(model, t, block=None, drop_rows=drops)]
        else:
            tmpls = [DualStageLP(model, t, block=blk,
                                 drop_rows=[r for r in drops
                                            if r in set(blk.x_rows.tolist())])
                     for blk in split]
        for tmpl in tmpls:
            out = tmpl.solve_batch(lam, batch, phis, mode=mode)
            if not out.all_feasible:
                raise ModelError(f"dual stage subproblem infeasible at {t}")
            values += out.values
    ci = confidence_interval(values, level)
    return PolicyRun(costs=values, feasible=np.ones(N, dtype=bool), ci=ci,
                     infeas_fraction=0.0, kind="dual-bound")


@dataclass
class GapSample:
    gaps: np.ndarray
    used: np.ndarray
    ci: ConfidenceInterval | None
    dropped_fraction: float


def gap_estimate(model: MSLPModel, primal_solution, dual_solution,
                 batch: PathBatch, level=0.95, mode="analytic") -> GapSample:
    """Common-random-numbers gap: per-scenario upper-bound value minus
    lower-bound value on the identical path.  Scenarios where the rule
    policy is infeasible are dropped from the interval (their fraction
    is reported)."""
    x1, beta = primal_solution
    gamma1, lam = dual_solution
    ub_run = simulate_ldr_policy(model, x1, beta, batch, level=level)
    lb_run = evaluate_dual_bound(model, gamma1, lam, batch, level=level,
                                 mode=mode)
    used = ub_run.feasible
    gaps = ub_run.costs - lb_run.costs
    ci = (confidence_interval(gaps[used], level)
          if int(used.sum()) >= 2 else None)
    return GapSample(gaps=gaps, used=used, ci=ci,
                     dropped_fraction=float(1.0 - used.mean()))
