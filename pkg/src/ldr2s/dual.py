"""Dual two-stage LDR sample-average approximation, solved by the
bundle-level method: cutting-plane master, level set at
L = 0.3 UB + 0.7 LB, and a Frank-Wolfe (or exact infinity-norm)
projection of the previous iterate onto the level set.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (IterationLimit, LevelSetEmpty, ModelError,
                     NumericalFailure)
from .lp import EQ, GE, LE, LPStatus, StandardLP, Workspace, solve_lp
from .model import CoeffLayout, LDRCoefficients, LPBuilder, MSLPModel
from .stage_lp import DualStageLP, basis_values
from .static_rules import DualSystem
from .stochastic import PathBatch


@dataclass
class DualCut:
    stage: int
    block: int
    coefs: np.ndarray    # over the Lambda layout
    rhs: float
    # zeta_{t,block} <= coefs . Lambda + rhs


@dataclass
class DualSAA:
    model: MSLPModel
    sample: PathBatch
    mode: str
    phis: dict
    templates: dict          # (t, block_index) -> DualStageLP
    blocks: dict             # t -> list of block names
    zeta_ub: dict            # (t, block_index) -> float or +inf
    lam_layout: CoeffLayout
    sys1: DualSystem
    bphi: dict               # t -> (m_t, K_t) objective coefficients
    mean_phi2: np.ndarray    # expectation of Phi_2 used in stage-1 rows

    @property
    def N(self):
        return len(self.sample)


def build_dual_saa(model: MSLPModel, sample: PathBatch,
                   mode="analytic") -> DualSAA:
    phis = basis_values(model, sample)
    sd = model.stage_data
    drop_fn = getattr(sd, "dual_drop_rows", None)
    templates = {}
    blocks = {}
    zeta_ub = {}
    for t in range(2, model.T + 1):
        split = sd.dual_split(t) if sd.dual_split is not None else None
        drops = list(drop_fn(t)) if drop_fn is not None else []
        if split is None:
            templates[(t, 0)] = DualStageLP(model, t, block=None,
                                            drop_rows=drops)
            blocks[t] = ["all"]
            zeta_ub[(t, 0)] = np.inf
        else:
            blocks[t] = [blk.name for blk in split]
            for bi, blk in enumerate(split):
                blk_drops = [r for r in drops if r in set(blk.x_rows.tolist())]
                templates[(t, bi)] = DualStageLP(model, t, block=blk,
                                                 drop_rows=blk_drops)
                if blk.zeta_upper is not None:
                    zeta_ub[(t, bi)] = float(blk.zeta_upper(t, sample))
                else:
                    zeta_ub[(t, bi)] = np.inf
    # objective coefficients E[b_t' Lambda_t Phi_t]
    bphi = {}
    for t in model.stages():
        bmat, _ = sd.rhs_for_batch(t, sample)
        if not np.any(bmat):
            bphi[t] = np.zeros((sd.m(t), model.basis.K(t)))
            continue
        if mode == "analytic" and model.affine is not None \
                and model.basis.xi_affine(t) is not None:
            from .static_rules import _cross_moment, _phi_affine
            aff = model.affine[t - 1]
            bphi[t] = _cross_moment(aff.b0, aff.b_lin, _phi_affine(model, t),
                                    model.basis.second_moment(t),
                                    model.basis.mean(t), model)
        else:
            bphi[t] = (bmat[:, :, None] * phis[t][:, None, :]).mean(axis=0)
    if model.T >= 2:
        mean_phi2 = (model.basis.mean(2) if mode == "analytic"
                     else phis[2].mean(axis=0))
    else:
        mean_phi2 = np.array([1.0])
    return DualSAA(model=model, sample=sample, mode=mode, phis=phis,
                   templates=templates, blocks=blocks, zeta_ub=zeta_ub,
                   lam_layout=model.lambda_layout(),
                   sys1=DualSystem(model, 1), bphi=bphi,
                   mean_phi2=mean_phi2)


class _MPLayout:
    """Master variables: [gamma1_kept | Lambda | zeta blocks]."""

    def __init__(self, saa: DualSAA):
        self.nk1 = len(saa.sys1.kept)
        self.lam0 = self.nk1
        self.tau = saa.lam_layout.dim
        self.zeta = {}
        z = self.lam0 + self.tau
        for t in range(2, saa.model.T + 1):
            for bi in range(len(saa.blocks[t])):
                self.zeta[(t, bi)] = z
                z += 1
        self.n_vars = z

    def lam_var(self, idx):
        return self.lam0 + idx


def _mp_objective(saa: DualSAA, lay: _MPLayout):
    """Max-sense objective vector over the master variables."""
    model = saa.model
    sd = model.stage_data
    obj = np.zeros(lay.n_vars)
    d1 = np.asarray(sd.rhs(1, [np.array([1.0])])[1], dtype=float)
    obj[:lay.nk1] = d1[saa.sys1.kept]
    ll = saa.lam_layout
    for t in model.stages():
        off, mt, K = ll.slice(t)
        obj[lay.lam0 + off:lay.lam0 + off + mt * K] = saa.bphi[t].ravel()
    for key, z in lay.zeta.items():
        obj[z] = 1.0
    return obj


def _mp_base(saa: DualSAA, lay: _MPLayout, lam_box):
    """Builder with stage-1 rows and zeta bounds; max objective is
    stored negated (the solver minimizes)."""
    model = saa.model
    sd = model.stage_data
    sys1 = saa.sys1
    b = LPBuilder()
    obj = _mp_objective(saa, lay)
    for i in range(lay.nk1):
        b.add_var(-obj[i], lb=0.0)
    for c in range(lay.tau):
        b.add_var(-obj[lay.lam0 + c], lb=-lam_box, ub=lam_box)
    for key in sorted(lay.zeta):
        z = lay.zeta[key]
        b.add_var(-obj[z], ub=saa.zeta_ub[key])
    ll = saa.lam_layout
    B2 = np.asarray(sd.mats(2)[1], dtype=float) if model.T >= 2 else None
    K2 = model.basis.K(2) if model.T >= 2 else 0
    for qi in range(sd.q(1)):
        if sys1.row_free[qi]:
            continue
        terms = []
        for i in range(sd.m(1)):
            if sys1.A[i, qi] != 0.0:
                terms.append((lay.lam_var(ll.index(1, i, 0)),
                              float(sys1.A[i, qi])))
        if B2 is not None:
            for i in range(sd.m(2)):
                if B2[i, qi] != 0.0:
                    for k in range(K2):
                        terms.append((lay.lam_var(ll.index(2, i, k)),
                                      float(B2[i, qi]) * float(saa.mean_phi2[k])))
        for ridx in range(lay.nk1):
            if sys1.Gq[qi, ridx] != 0.0:
                terms.append((ridx, float(sys1.Gq[qi, ridx])))
        b.add_row(terms, int(sys1.sense_q[qi]), float(sys1.h_t[qi]))
    for pi in range(sd.p(1)):
        if sys1.row_free[sd.q(1) + pi]:
            continue
        terms = []
        for i in range(sd.m(1)):
            if sys1.C[i, pi] != 0.0:
                terms.append((lay.lam_var(ll.index(1, i, 0)),
                              float(sys1.C[i, pi])))
        for ridx in range(lay.nk1):
            if sys1.Gp[pi, ridx] != 0.0:
                terms.append((ridx, float(sys1.Gp[pi, ridx])))
        b.add_row(terms, int(sys1.sense_p[pi]), float(sys1.c_t[pi]))
    return b, obj


def _clone(b: LPBuilder) -> LPBuilder:
    out = LPBuilder()
    out.obj = list(b.obj)
    out.lb = list(b.lb)
    out.ub = list(b.ub)
    out.triplets = list(b.triplets)
    out.senses = list(b.senses)
    out.rhs = list(b.rhs)
    return out


def _completion_value(saa: DualSAA, lam: LDRCoefficients):
    """Best feasible first-stage completion given Lambda: max d1'gamma1
    over the reduced stage-1 rows.  Returns (value, gamma1_kept)."""
    model = saa.model
    sd = model.stage_data
    sys1 = saa.sys1
    nk = len(sys1.kept)
    lam1 = lam.stage(1)[:, 0]
    rhs_q = sys1.h_t - sys1.A.T @ lam1
    if model.T >= 2:
        B2 = np.asarray(sd.mats(2)[1], dtype=float)
        lam2bar = lam.stage(2) @ saa.mean_phi2
        rhs_q = rhs_q - B2.T @ lam2bar
    rhs_p = sys1.c_t - sys1.C.T @ lam1
    b = LPBuilder()
    d1 = np.asarray(sd.rhs(1, [np.array([1.0])])[1], dtype=float)
    for ridx in range(nk):
        b.add_var(-float(d1[sys1.kept[ridx]]), lb=0.0)
    for qi in range(sd.q(1)):
        if sys1.row_free[qi]:
            continue
        terms = [(ridx, float(sys1.Gq[qi, ridx])) for ridx in range(nk)]
        b.add_row(terms, int(sys1.sense_q[qi]), float(rhs_q[qi]))
    for pi in range(sd.p(1)):
        if sys1.row_free[sd.q(1) + pi]:
            continue
        terms = [(ridx, float(sys1.Gp[pi, ridx])) for ridx in range(nk)]
        b.add_row(terms, int(sys1.sense_p[pi]), float(rhs_p[pi]))
    res = solve_lp(b.build())
    if res.status != LPStatus.OPTIMAL:
        return None, None
    return -float(res.objective), res.x


def _lam_objective_term(saa: DualSAA, lam_vec):
    obj = 0.0
    ll = saa.lam_layout
    for t in saa.model.stages():
        off, mt, K = ll.slice(t)
        obj += float(saa.bphi[t].ravel() @ lam_vec[off:off + mt * K])
    return obj


def _subproblem_pass(saa: DualSAA, lam: LDRCoefficients, want_duals=True):
    """Mean stage values and aggregated supergradients per (t, block)."""
    out = {}
    for (t, bi), tmpl in sorted(saa.templates.items()):
        r = tmpl.solve_batch(lam, saa.sample, saa.phis, mode=saa.mode,
                             want_duals=want_duals)
        if not r.all_feasible:
            raise ModelError(
                f"dual stage subproblem infeasible at stage {t}; the model "
                "is dual-inconsistent")
        entry = {"value": float(r.values.mean())}
        if want_duals:
            ll = saa.lam_layout
            coefs = np.zeros(ll.dim)
            off, mt, K = ll.slice(t)
            coefs[off:off + mt * K] = r.grad_t.mean(axis=0).ravel()
            if r.grad_next is not None:
                off2, mt2, K2 = ll.slice(t + 1)
                coefs[off2:off2 + mt2 * K2] = r.grad_next.mean(axis=0).ravel()
            entry["coefs"] = coefs
        out[(t, bi)] = entry
    return out


def project_level(builder: LPBuilder, proj_vars, prev, mode="fw",
                  max_steps=50, x0=None, tol=1e-9):
    """Point in the polyhedron of ``builder`` approximately closest to
    ``prev`` on the coordinates ``proj_vars``.

    fw: Frank-Wolfe with exact line search, each step one LP solve of
    the region (warm-started); linf: exact Chebyshev projection as a
    single LP.  Raises LevelSetEmpty when the region is empty.
    """
    proj_vars = np.asarray(proj_vars, dtype=np.int64)
    prev = np.asarray(prev, dtype=float)
    lp = builder.build()
    rlo, rhi = lp.row_ranges()
    ws = Workspace.from_lp(lp)
    # fixed point shortcut: is prev itself in the region?
    xl = lp.var_lb.copy()
    xu = lp.var_ub.copy()
    xl[proj_vars] = np.maximum(xl[proj_vars], prev)
    xu[proj_vars] = np.minimum(xu[proj_vars], prev)
    if np.all(xl[proj_vars] <= xu[proj_vars] + 1e-15):
        r = ws.solve(np.zeros(lp.n_vars), xl, xu, rlo, rhi, warm=False)
        if r.status == LPStatus.OPTIMAL:
            return prev.copy()
    if mode == "linf":
        b2 = _clone(builder)
        tau = b2.add_var(0.0, lb=0.0)
        b2.obj = [0.0] * len(b2.obj)
        b2.obj[tau] = 1.0
        for v, pv in zip(proj_vars, prev):
            b2.add_row([(int(v), 1.0), (tau, -1.0)], LE, float(pv))
            b2.add_row([(int(v), 1.0), (tau, 1.0)], GE, float(pv))
        res = solve_lp(b2.build())
        if res.status == LPStatus.INFEASIBLE:
            raise LevelSetEmpty("projection region is empty")
        if res.status != LPStatus.OPTIMAL:
            raise NumericalFailure("linf projection failed")
        return res.x[proj_vars].copy()
    # Frank-Wolfe over a huge safety box (keeps the oracle bounded)
    BOX = 1e9
    xl = np.maximum(lp.var_lb, -BOX)
    xu = np.minimum(lp.var_ub, BOX)
    if x0 is None:
        r0 = ws.solve(np.zeros(lp.n_vars), xl, xu, rlo, rhi, warm=False)
        if r0.status == LPStatus.INFEASIBLE:
            raise LevelSetEmpty("projection region is empty")
        if r0.status != LPStatus.OPTIMAL:
            raise NumericalFailure("projection feasibility solve failed")
        x = r0.x.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_steps):
        g = np.zeros(lp.n_vars)
        diff = x[proj_vars] - prev
        f = float(diff @ diff)
        g[proj_vars] = 2.0 * diff
        r = ws.solve(g, xl, xu, rlo, rhi, warm=True)
        if r.status != LPStatus.OPTIMAL:
            raise NumericalFailure("FW oracle failed")
        d = r.x - x
        dp = d[proj_vars]
        gap = -float(g[proj_vars] @ dp)
        if gap <= tol * max(1.0, f):
            break
        denom = float(dp @ dp)
        if denom <= 1e-18:
            break
        step = min(1.0, max(0.0, -float(diff @ dp) / denom))
        if step <= 0.0:
            break
        x = x + step * d
    return x[proj_vars].copy()


@dataclass
class LevelState:
    LB: float
    UB: float
    level: float
    iteration: int


@dataclass
class LevelLogEntry:
    iteration: int
    LB: float
    UB: float
    level: float
    cuts_added: int


@dataclass
class LevelResult:
    gamma1: np.ndarray
    lam: LDRCoefficients
    LB: float
    UB: float
    log: list
    cuts: list
    converged: bool


def level_solve(saa: DualSAA, tol=1e-5, max_iters=300, projection="fw",
                fw_steps=50, lam_box=1e5, max_expansions=4) -> LevelResult:
    """Bundle-level method for the dual SAA: initialize at Lambda = 0,
    then master -> level -> projection -> subproblems -> cuts until
    |UB - LB| <= tol * max(|UB|, 1).

    A wide trust box on Lambda keeps the master bounded before the cut
    model does.  Master solves whose optimum touches the box still
    drive iterations (their value bounds the boxed problem), but a
    bracket influenced by the box is never returned: at convergence the
    box is enlarged tenfold, the upper bound reset, and the run
    continues with the accumulated cuts.
    """
    model = saa.model
    ll = saa.lam_layout
    lay = _MPLayout(saa)
    lam_hat = LDRCoefficients.zeros("dual", model)
    lam_vec = np.zeros(ll.dim)
    subs = _subproblem_pass(saa, lam_hat)
    cuts = []
    for (t, bi), entry in sorted(subs.items()):
        cuts.append(DualCut(t, bi, entry["coefs"],
                            entry["value"] - float(entry["coefs"] @ lam_vec)))
    comp, gamma1 = _completion_value(saa, lam_hat)
    if comp is None:
        raise ModelError("dual SAA infeasible at Lambda = 0")
    LB = comp + _lam_objective_term(saa, lam_vec) + sum(
        e["value"] for e in subs.values())
    UB = np.inf
    ub_boxed = False
    best = (LB, lam_vec.copy(), gamma1)
    log = []
    expansions = 0
    it = 0
    while it < max_iters:
        it += 1
        base, obj = _mp_base(saa, lay, lam_box)
        for cut in cuts:
            nz = np.nonzero(cut.coefs)[0]
            terms = [(lay.zeta[(cut.stage, cut.block)], 1.0)]
            terms += [(lay.lam_var(int(c)), -float(cut.coefs[c])) for c in nz]
            base.add_row(terms, LE, cut.rhs)
        lp = base.build()
        res = solve_lp(lp)
        if res.status == LPStatus.UNBOUNDED:
            raise NumericalFailure(
                "dual master unbounded despite the trust box")
        if res.status == LPStatus.INFEASIBLE:
            raise ModelError("dual master infeasible (stage-1 rows)")
        mp_lam = res.x[lay.lam0:lay.lam0 + lay.tau]
        binding = bool(np.any(np.abs(mp_lam) >= lam_box * (1 - 1e-9)))
        mp_val = -float(res.objective)
        if mp_val < UB:
            UB = mp_val
            ub_boxed = binding
        converged = abs(UB - LB) <= tol * max(abs(UB), 1.0)
        if converged:
            box_tainted = ub_boxed or bool(
                np.any(np.abs(best[1]) >= lam_box * (1 - 1e-9)))
            if box_tainted and expansions < max_expansions:
                lam_box *= 10.0
                expansions += 1
                UB = np.inf
                ub_boxed = False
                continue
            if box_tainted:
                raise NumericalFailure(
                    "Lambda trust box keeps binding; the dual may be "
                    "unbounded")
            log.append(LevelLogEntry(it, LB, UB, UB, 0))
            lam_best = LDRCoefficients("dual", ll.unpack(best[1]))
            return LevelResult(gamma1=best[2], lam=lam_best, LB=LB, UB=UB,
                               log=log, cuts=cuts, converged=True)
        L = 0.3 * UB + 0.7 * LB
        proj_builder = _clone(base)
        mx_terms = [(j, -base.obj[j]) for j in range(lay.n_vars)
                    if base.obj[j] != 0.0]
        proj_builder.add_row(mx_terms, GE, L)
        lam_idx = np.arange(lay.lam0, lay.lam0 + lay.tau)
        lam_vec = project_level(proj_builder, lam_idx, lam_vec,
                                mode=projection, max_steps=fw_steps,
                                x0=res.x)
        lam_hat = LDRCoefficients("dual", ll.unpack(lam_vec))
        subs = _subproblem_pass(saa, lam_hat)
        added = 0
        for (t, bi), entry in sorted(subs.items()):
            pool_val = min(
                (float(c.coefs @ lam_vec) + c.rhs for c in cuts
                 if (c.stage, c.block) == (t, bi)), default=np.inf)
            if pool_val > entry["value"] + 1e-9 * max(1.0, abs(entry["value"])):
                cuts.append(DualCut(
                    t, bi, entry["coefs"],
                    entry["value"] - float(entry["coefs"] @ lam_vec)))
                added += 1
        comp, gamma1 = _completion_value(saa, lam_hat)
        if comp is not None:
            val = comp + _lam_objective_term(saa, lam_vec) + sum(
                e["value"] for e in subs.values())
            if val > LB:
                LB = val
                best = (LB, lam_vec.copy(), gamma1)
        log.append(LevelLogEntry(it, LB, UB, L, added))
    lam_best = LDRCoefficients("dual", ll.unpack(best[1]))
    raise IterationLimit(
        f"level method did not reach tol={tol} in {max_iters} iterations",
        best=LevelResult(gamma1=best[2], lam=lam_best, LB=LB, UB=UB,
                         log=log, cuts=cuts, converged=False))


def eval_G(model: MSLPModel, t: int, lam: LDRCoefficients, path,
           mode="analytic", use_hints=True, want_duals=True):
    """Stage dual value G_t on one path; with use_hints=False the full
    unreduced stage LP is solved (the oracle form)."""
    batch = PathBatch(model.proc, [np.asarray([path.stage(r)])
                                   for r in range(1, model.T + 1)])
    phis = basis_values(model, batch)
    sd = model.stage_data
    drop_fn = getattr(sd, "dual_drop_rows", None)
    drops = list(drop_fn(t)) if (use_hints and drop_fn is not None) else []
    split = sd.dual_split(t) if (use_hints and sd.dual_split is not None) else None
    if split is None:
        tmpl = DualStageLP(model, t, block=None, drop_rows=drops)
        r = tmpl.solve_batch(lam, batch, phis, mode=mode, want_duals=want_duals)
        if not r.all_feasible:
            raise ModelError(f"dual stage subproblem infeasible at stage {t}")
        return {"value": float(r.values[0]),
                "grad_t": None if not want_duals else r.grad_t[0],
                "grad_next": None if (not want_duals or r.grad_next is None)
                else r.grad_next[0],
                "blocks": None}
    vals = []
    for blk in split:
        blk_drops = [r_ for r_ in drops if r_ in set(blk.x_rows.tolist())]
        tmpl = DualStageLP(model, t, block=blk, drop_rows=blk_drops)
        r = tmpl.solve_batch(lam, batch, phis, mode=mode, want_duals=want_duals)
        if not r.all_feasible:
            raise ModelError(f"dual stage block {blk.name} infeasible")
        vals.append((blk.name, float(r.values[0]),
                     None if not want_duals else r.grad_t[0]))
    return {"value": sum(v for _, v, _ in vals),
            "blocks": vals, "grad_t": None, "grad_next": None}


def dual_deterministic_equivalent(saa: DualSAA):
    """One LP for the sampled dual two-stage problem (max sense, built
    negated); the level-method oracle."""
    model = saa.model
    sd = model.stage_data
    lay = _MPLayout(saa)
    b, obj = _mp_base(saa, lay, lam_box=np.inf)
    # zeta variables are replaced by explicit per-scenario duals: pin them
    for key, z in lay.zeta.items():
        b.obj[z] = 0.0
        b.lb[z] = 0.0
        b.ub[z] = 0.0
    ll = saa.lam_layout
    N = saa.N
    w = 1.0 / N
    for t in range(2, model.T + 1):
        sys_t = DualSystem(model, t)
        nk = len(sys_t.kept)
        d_all = sd.rhs_for_batch(t, saa.sample)[1]
        phi = saa.phis[t]
        K = model.basis.K(t)
        if t < model.T:
            if saa.mode == "empirical":
                phinext = saa.phis[t + 1]
            else:
                Mc, m0 = model.basis.cond_mean_map(t)
                phinext = phi @ Mc.T + m0[None, :]
            B_next = np.asarray(sd.mats(t + 1)[1], dtype=float)
            Kn = model.basis.K(t + 1)
        for n in range(N):
            gv = [b.add_var(-w * float(d_all[n, r]), lb=0.0)
                  for r in sys_t.kept]
            for qi in range(sd.q(t)):
                if sys_t.row_free[qi]:
                    continue
                terms = [(gv[ridx], float(sys_t.Gq[qi, ridx]))
                         for ridx in range(nk) if sys_t.Gq[qi, ridx] != 0.0]
                for i in range(sd.m(t)):
                    if sys_t.A[i, qi] != 0.0:
                        terms += [(lay.lam_var(ll.index(t, i, k)),
                                   float(sys_t.A[i, qi]) * float(phi[n, k]))
                                  for k in range(K)]
                if t < model.T:
                    for i in range(sd.m(t + 1)):
                        if B_next[i, qi] != 0.0:
                            terms += [(lay.lam_var(ll.index(t + 1, i, k)),
                                       float(B_next[i, qi]) * float(phinext[n, k]))
                                      for k in range(Kn)]
                b.add_row(terms, int(sys_t.sense_q[qi]), float(sys_t.h_t[qi]))
            for pi in range(sd.p(t)):
                if sys_t.row_free[sd.q(t) + pi]:
                    continue
                terms = [(gv[ridx], float(sys_t.Gp[pi, ridx]))
                         for ridx in range(nk) if sys_t.Gp[pi, ridx] != 0.0]
                for i in range(sd.m(t)):
                    if sys_t.C[i, pi] != 0.0:
                        terms += [(lay.lam_var(ll.index(t, i, k)),
                                   float(sys_t.C[i, pi]) * float(phi[n, k]))
                                  for k in range(K)]
                b.add_row(terms, int(sys_t.sense_p[pi]), float(sys_t.c_t[pi]))
    lp = b.build()
    res = solve_lp(lp)
    if res.status != LPStatus.OPTIMAL:
        return res.status, None
    return res.status, -float(res.objective)
