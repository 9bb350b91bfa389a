"""Stage subproblem templates.

``PrimalStageLP`` solves, for fixed state-rule coefficients beta, the
stage-t recourse problem

    Q_t: min c_t'x  s.t.  C_t x = b_t - A_t s_t - B_t s_{t-1},
                          E_t x >= d_t - D_t s_t,

with s_t = beta_t Phi_t(xi^t).  ``DualStageLP`` solves the stage-t dual
subproblem

    G_t: max d_t'g  s.t.  D_t'g = h_t - A_t'(L_t Phi_t) - Bbar,
                          E_t'g = c_t - C_t'(L_t Phi_t),  g >= 0,

where Bbar is the (analytic or per-path empirical) conditional
expectation term B_{t+1}'(L_{t+1} E[Phi_{t+1}|xi^t]).

Both templates fold or eliminate single-variable structure exactly (the
fold plan maps multipliers back to original rows), batch over
scenarios through the kernel, and report values, multipliers in the
original row space, and subgradient/supergradient blocks.
"""

import numpy as np

from dataclasses import dataclass

from .errors import AssumptionViolation, ModelError, NumericalFailure
from .lp import _simplex_core as S
from .lp._batch_core import batch_ranged_solve
from .lp.core import DEFAULT_CONFIG
from .model import MSLPModel
from .stochastic import PathBatch

INF = np.inf
_EMPTY2 = np.zeros((1, 1))


def _csc_from_dense_rows(M):
    """CSC of a dense (m, n) stacked row matrix."""
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    ip = np.zeros(n + 1, dtype=np.int64)
    ix, val = [], []
    for j in range(n):
        nz = np.nonzero(M[:, j])[0]
        ip[j + 1] = ip[j] + len(nz)
        ix.extend(nz.tolist())
        val.extend(M[nz, j].tolist())
    return (ip,
            np.asarray(ix, dtype=np.int64),
            np.asarray(val, dtype=float))


def _run_batch(n, m, csc, c, cvar, lb2, ub2, rlo2, rhi2,
               want_x=False, want_y=False, want_rc=False):
    N = lb2.shape[0]
    cfg = DEFAULT_CONFIG
    status = np.zeros(N, dtype=np.int64)
    vals = np.zeros(N)
    X = np.zeros((N, n)) if want_x else np.zeros((1, max(n, 1)))
    Y = np.zeros((N, m)) if want_y else np.zeros((1, max(m, 1)))
    RC = np.zeros((N, n)) if want_rc else np.zeros((1, max(n, 1)))
    FK = np.zeros((N, m))
    has_cvar = cvar is not None
    batch_ranged_solve(
        n, m, csc[0], csc[1], csc[2],
        np.ascontiguousarray(c, dtype=float),
        np.ascontiguousarray(cvar, dtype=float) if has_cvar else _EMPTY2,
        has_cvar,
        np.ascontiguousarray(lb2), np.ascontiguousarray(ub2),
        np.ascontiguousarray(rlo2), np.ascontiguousarray(rhi2),
        cfg.tol_pivot, cfg.tol_feas, cfg.tol_dual, cfg.tol_infeas,
        cfg.bland_after, cfg.max_iter_base + 50 * (n + m), cfg.refactor_every,
        want_x, want_y, want_rc,
        status, vals, X, Y, RC, FK)
    if np.any(status >= S.K_ITERLIMIT):
        raise NumericalFailure(
            "stage subproblem batch hit an iteration/factorization failure")
    return status, vals, X, Y, RC, FK


@dataclass
class StageBatchResult:
    """Batch outcome; values are NaN on infeasible scenarios."""

    status: np.ndarray
    values: np.ndarray
    grad_t: np.ndarray | None = None      # (N, q_t or m_t, K_t)
    grad_prev: np.ndarray | None = None   # primal only
    grad_next: np.ndarray | None = None   # dual only
    x: np.ndarray | None = None
    feas_cut_data: dict | None = None     # scenario -> (y_eq, mu_ge)

    @property
    def all_feasible(self):
        return bool(np.all(self.status == S.K_OPTIMAL))


class PrimalStageLP:
    """Template for Q_t (constant-matrix models)."""

    def __init__(self, model: MSLPModel, t: int):
        if not model.stage_data.matrices_constant:
            raise ModelError("stage templates need constant matrices")
        if not 2 <= t <= model.T:
            raise ModelError(f"stage {t} out of range [2, {model.T}]")
        self.model = model
        self.t = t
        sd = model.stage_data
        A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
        self.A, self.B, self.C, self.D, self.E = A, B, C, D, E
        self.m_t, self.n_t, self.p_t, self.q_t = sd.m(t), sd.n(t), sd.p(t), sd.q(t)
        self.c = np.asarray(sd.costs(t)[0], dtype=float)
        folds_lb, folds_ub, keep, checks = [], [], [], []
        for r in range(self.n_t):
            nz = np.nonzero(E[r])[0]
            if len(nz) == 0:
                checks.append(r)
            elif len(nz) == 1:
                v, a = int(nz[0]), float(E[r, nz[0]])
                (folds_lb if a > 0 else folds_ub).append((r, v, a))
            else:
                keep.append(r)
        self.keep_ge = np.asarray(keep, dtype=np.int64)
        self.check_rows = np.asarray(checks, dtype=np.int64)
        self.folds_lb = folds_lb
        self.folds_ub = folds_ub
        stacked = np.vstack([
            C,
            E[self.keep_ge] if len(self.keep_ge) else np.zeros((0, self.p_t)),
            np.zeros((len(self.check_rows), self.p_t)),
        ])
        self.kern_m = stacked.shape[0]
        self.csc = _csc_from_dense_rows(stacked)

    def state_values(self, beta, phis):
        t = self.t
        s_t = phis[t] @ beta.stage(t).T
        s_prev = phis[t - 1] @ beta.stage(t - 1).T
        return s_t, s_prev

    def rhs_arrays(self, beta, batch: PathBatch, phis):
        t = self.t
        s_t, s_prev = self.state_values(beta, phis)
        bmat, dmat = self.model.stage_data.rhs_for_batch(t, batch)
        rhs_eq = bmat - s_t @ self.A.T - s_prev @ self.B.T
        rhs_ge = dmat - s_t @ self.D.T
        return rhs_eq, rhs_ge

    def _bounds(self, rhs_ge):
        N = rhs_ge.shape[0]
        lb2 = np.full((N, self.p_t), -INF)
        ub2 = np.full((N, self.p_t), INF)
        lbsrc = np.full((N, self.p_t), -1, dtype=np.int64)
        ubsrc = np.full((N, self.p_t), -1, dtype=np.int64)
        for (r, v, a) in self.folds_lb:
            cand = rhs_ge[:, r] / a
            better = cand > lb2[:, v]
            lb2[better, v] = cand[better]
            lbsrc[better, v] = r
        for (r, v, a) in self.folds_ub:
            cand = rhs_ge[:, r] / a
            better = cand < ub2[:, v]
            ub2[better, v] = cand[better]
            ubsrc[better, v] = r
        return lb2, ub2, lbsrc, ubsrc

    def _ranges(self, rhs_eq, rhs_ge):
        N = rhs_eq.shape[0]
        nk = len(self.keep_ge)
        rlo = np.empty((N, self.kern_m))
        rhi = np.full((N, self.kern_m), INF)
        rlo[:, :self.m_t] = rhs_eq
        rhi[:, :self.m_t] = rhs_eq
        if nk:
            rlo[:, self.m_t:self.m_t + nk] = rhs_ge[:, self.keep_ge]
        if len(self.check_rows):
            rlo[:, self.m_t + nk:] = rhs_ge[:, self.check_rows]
        return rlo, rhi

    def solve_batch(self, beta, batch, phis, want_duals=False, want_x=False):
        """Q_t on every path of the batch."""
        t = self.t
        rhs_eq, rhs_ge = self.rhs_arrays(beta, batch, phis)
        lb2, ub2, lbsrc, ubsrc = self._bounds(rhs_ge)
        rlo, rhi = self._ranges(rhs_eq, rhs_ge)
        status, vals, X, Y, RC, FK = _run_batch(
            self.p_t, self.kern_m, self.csc, self.c, None,
            lb2, ub2, rlo, rhi,
            want_x=want_x, want_y=want_duals, want_rc=want_duals)
        if np.any(status == S.K_UNBOUNDED):
            raise AssumptionViolation(
                "primal stage subproblem unbounded (negative recourse cost "
                "with unbounded recourse set)")
        res = StageBatchResult(status=status, values=vals)
        if want_x:
            res.x = X
        if not want_duals:
            return res
        N = len(batch)
        nk = len(self.keep_ge)
        y_eq = Y[:, :self.m_t].copy()
        mu = np.zeros((N, self.n_t))
        if nk:
            mu[:, self.keep_ge] = Y[:, self.m_t:self.m_t + nk]
        if len(self.check_rows):
            mu[:, self.check_rows] = Y[:, self.m_t + nk:]
        # bound multipliers of the folded rows, from reduced costs
        for v in range(self.p_t):
            rcv = RC[:, v]
            for s in np.nonzero(rcv > 1e-11)[0]:
                r = lbsrc[s, v]
                if r >= 0:
                    mu[s, r] += rcv[s] / self.E[r, v]
            for s in np.nonzero(rcv < -1e-11)[0]:
                r = ubsrc[s, v]
                if r >= 0:
                    mu[s, r] += rcv[s] / self.E[r, v]
        feas = status == S.K_OPTIMAL
        y_eq[~feas] = 0.0
        mu[~feas] = 0.0
        Wt = y_eq @ self.A + mu @ self.D
        Wp = y_eq @ self.B
        res.grad_t = -np.einsum("ni,nk->nik", Wt, phis[t])
        res.grad_prev = -np.einsum("ni,nk->nik", Wp, phis[t - 1])
        bad = np.nonzero(~feas)[0]
        if len(bad):
            res.feas_cut_data = {
                int(s): self._feas_multipliers(FK[s], lb2[s], ub2[s],
                                               lbsrc[s], ubsrc[s])
                for s in bad
            }
        return res

    def _feas_multipliers(self, fk, lb, ub, lbsrc, ubsrc):
        """(y_eq, mu_ge) proving Q_t = +inf at the current beta: the cut
        y_eq'rhs_eq(beta) + mu'rhs_ge(beta) <= 0 holds for every beta
        with a feasible subproblem and fails at the current one."""
        nk = len(self.keep_ge)
        y_eq = fk[:self.m_t].copy()
        mu = np.zeros(self.n_t)
        if nk:
            mu[self.keep_ge] = fk[self.m_t:self.m_t + nk]
        if len(self.check_rows):
            mu[self.check_rows] = fk[self.m_t + nk:]
        if np.any(fk != 0.0):
            z = y_eq @ self.C
            if nk:
                z = z + fk[self.m_t:self.m_t + nk] @ self.E[self.keep_ge]
            for v in range(self.p_t):
                zv = z[v]
                if zv > 1e-11:
                    r = ubsrc[v]
                    if r >= 0:
                        mu[r] -= zv / self.E[r, v]
                elif zv < -1e-11:
                    r = lbsrc[v]
                    if r >= 0:
                        mu[r] -= zv / self.E[r, v]
            return y_eq, mu
        # crossing folded bounds: lb_v(beta) > ub_v(beta)
        for v in range(self.p_t):
            if lb[v] - ub[v] > 1e-8 * max(1.0, abs(lb[v])):
                r_lb, r_ub = lbsrc[v], ubsrc[v]
                if r_lb >= 0:
                    mu[r_lb] += 1.0 / self.E[r_lb, v]
                if r_ub >= 0:
                    mu[r_ub] += -1.0 / self.E[r_ub, v]
                return np.zeros(self.m_t), mu
        raise NumericalFailure("infeasible stage LP without usable certificate")


class DualStageLP:
    """Template for G_t, optionally restricted to one separable block.

    Zero-objective dual variables whose column in [D'; E'] has a single
    entry are eliminated as row slacks (their rows become one-sided);
    the zero-objective property is asserted on every batch.  Rows in
    ``drop_rows`` (an instance hint for objective-dominated duals, e.g.
    redundant shortfall upper bounds) are removed with the freed row
    turned into a bound.
    """

    def __init__(self, model: MSLPModel, t: int, block=None, drop_rows=()):
        if not model.stage_data.matrices_constant:
            raise ModelError("stage templates need constant matrices")
        if not 2 <= t <= model.T:
            raise ModelError(f"stage {t} out of range [2, {model.T}]")
        self.model = model
        self.t = t
        sd = model.stage_data
        A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
        self.A, self.C = A, C
        self.B_next = (np.asarray(sd.mats(t + 1)[1], dtype=float)
                       if t < model.T else None)
        self.m_t, self.n_t, self.p_t, self.q_t = sd.m(t), sd.n(t), sd.p(t), sd.q(t)
        self.c_t = np.asarray(sd.costs(t)[0], dtype=float)
        self.h_t = np.asarray(sd.costs(t)[1], dtype=float)
        if block is None:
            gam = np.arange(self.n_t, dtype=np.int64)
            qrows = np.arange(self.q_t, dtype=np.int64)
            prows = np.arange(self.p_t, dtype=np.int64)
        else:
            gam = np.asarray(block.x_rows, dtype=np.int64)
            qrows = np.asarray(block.q_rows, dtype=np.int64)
            prows = np.asarray(block.p_rows, dtype=np.int64)
        self._drop = sorted(int(r) for r in drop_rows)
        gam = np.asarray([g for g in gam if g not in self._drop], dtype=np.int64)
        self.gam_all = gam
        self.q_rows = qrows
        self.p_rows = prows
        Dt = D.T[qrows][:, gam] if len(qrows) else np.zeros((0, len(gam)))
        Et = E.T[prows][:, gam] if len(prows) else np.zeros((0, len(gam)))
        self.G = np.vstack([Dt, Et])
        self._kernel_ready = False

    def _build_kernel(self, dmat):
        """Finish construction once a batch reveals the objective columns."""
        G = self.G
        n_rows = G.shape[0]
        relax_lo = np.zeros(n_rows, dtype=bool)
        relax_hi = np.zeros(n_rows, dtype=bool)
        keep_mask = np.ones(G.shape[1], dtype=bool)
        elim = []
        dcolmax = np.max(np.abs(dmat), axis=0)
        for ci in range(G.shape[1]):
            nz = np.nonzero(G[:, ci])[0]
            if len(nz) != 1:
                continue
            if dcolmax[ci] > 1e-12:
                continue
            row, a = int(nz[0]), float(G[nz[0], ci])
            if a > 0:
                if relax_lo[row]:
                    continue
                relax_lo[row] = True
            else:
                if relax_hi[row]:
                    continue
                relax_hi[row] = True
            keep_mask[ci] = False
            elim.append(ci)
        self._elim_cols = np.asarray(elim, dtype=np.int64)
        self.keep_mask = keep_mask
        self.gam = self.gam_all[keep_mask]
        row_keep = ~(relax_lo & relax_hi)
        self.row_map = np.nonzero(row_keep)[0]
        self.relax_lo = relax_lo[self.row_map]
        self.relax_hi = relax_hi[self.row_map]
        self.kern_rows = G[:, keep_mask][self.row_map]
        self.kern_m, self.kern_n = self.kern_rows.shape
        self.csc = _csc_from_dense_rows(self.kern_rows)
        self._kernel_ready = True

    def rhs_arrays(self, lam, batch, phis, mode):
        t = self.t
        lam_t = phis[t] @ lam.stage(t).T
        rhs_q = self.h_t[self.q_rows][None, :] - lam_t @ self.A[:, self.q_rows]
        phinext = None
        if self.B_next is not None:
            if mode == "empirical":
                phinext = phis[t + 1]
            else:
                M, m0 = self.model.basis.cond_mean_map(t)
                phinext = phis[t] @ M.T + m0[None, :]
            lam_next = phinext @ lam.stage(t + 1).T
            rhs_q = rhs_q - lam_next @ self.B_next[:, self.q_rows]
        rhs_p = self.c_t[self.p_rows][None, :] - lam_t @ self.C[:, self.p_rows]
        return rhs_q, rhs_p, phinext

    def solve_batch(self, lam, batch, phis, mode="analytic", want_duals=False):
        """G_t per path (max sense); grad_t / grad_next are valid
        supergradient blocks over Lambda_t / Lambda_{t+1}."""
        t = self.t
        _, dmat_full = self.model.stage_data.rhs_for_batch(t, batch)
        dsub = dmat_full[:, self.gam_all]
        if not self._kernel_ready:
            self._build_kernel(dsub)
        if self._drop and np.any(dmat_full[:, self._drop] > 1e-12):
            raise ModelError("dropped dual variable has positive objective")
        if len(self._elim_cols) and np.any(
                np.abs(dsub[:, self._elim_cols]) > 1e-12):
            raise ModelError("eliminated dual variable has nonzero objective")
        rhs_q, rhs_p, phinext = self.rhs_arrays(lam, batch, phis, mode)
        full = np.concatenate([rhs_q, rhs_p], axis=1)[:, self.row_map]
        rlo = full.copy()
        rhi = full.copy()
        rlo[:, self.relax_lo] = -INF
        rhi[:, self.relax_hi] = INF
        N = len(batch)
        lb2 = np.zeros((N, self.kern_n))
        ub2 = np.full((N, self.kern_n), INF)
        dker = dsub[:, self.keep_mask]
        const = bool(np.all(dker == dker[0]))
        status, vals, X, Y, RC, FK = _run_batch(
            self.kern_n, self.kern_m, self.csc,
            -dker[0] if const else np.zeros(self.kern_n),
            None if const else -dker,
            lb2, ub2, rlo, rhi,
            want_x=False, want_y=want_duals, want_rc=False)
        if np.any(status == S.K_UNBOUNDED):
            raise AssumptionViolation(
                "dual stage subproblem unbounded: stage feasible sets are "
                "not almost-surely bounded")
        res = StageBatchResult(status=status, values=-vals)
        if not want_duals:
            return res
        Yx = -Y  # max-sense multipliers
        w = np.zeros((N, self.q_t))
        v = np.zeros((N, self.p_t))
        nq = len(self.q_rows)
        for pos, row in enumerate(self.row_map):
            if row < nq:
                w[:, self.q_rows[row]] = Yx[:, pos]
            else:
                v[:, self.p_rows[row - nq]] = Yx[:, pos]
        feas = status == S.K_OPTIMAL
        w[~feas] = 0.0
        v[~feas] = 0.0
        Wi = w @ self.A.T + v @ self.C.T
        res.grad_t = -np.einsum("ni,nk->nik", Wi, phis[t])
        if self.B_next is not None:
            Wn = w @ self.B_next.T
            res.grad_next = -np.einsum("ni,nk->nik", Wn, phinext)
        return res


def basis_values(model: MSLPModel, batch: PathBatch):
    """phis[t] = (N, K_t) basis evaluations for every stage."""
    return {t: model.basis.eval_batch(t, batch) for t in model.stages()}
