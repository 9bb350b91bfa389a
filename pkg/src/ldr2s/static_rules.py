"""Static decision-rule baselines.

Rules are imposed on every variable: primal recourse x_t = Theta_t
Phi_t and state s_t = beta_t Phi_t; dual state-equation multipliers
lambda_t = Lambda_t Phi_t and (reduced) recourse multipliers gamma_t =
Pi_t Phi_t.  Almost-sure inequality rows become deterministic rows by
LP duality over the per-stage polyhedral support; almost-sure equality
rows vanish identically via coefficient matching.  When the support is
unbounded (so no exact reformulation exists), the almost-sure rows are
instead enforced on a finite sample, solved by scenario row generation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (AssumptionNotMet, DegenerateSupport, ModelError,
                     NonAffineDependence, SizeGuard)
from .lp import EQ, GE, LE, LPStatus, StandardLP, solve_lp
from .model import CoeffLayout, FeasibilityRegion, LPBuilder, MSLPModel
from .stochastic import (ConfidenceInterval, Degenerate, LogNormal, PathBatch,
                         Uniform, confidence_interval)

# ---------------------------------------------------------------------------
# affine-in-xi rows over a decision space


class AffineRowExpr:
    """(const + sum_v lin_v x_v) + sum_e xi_e (c_e + sum_v a_ev x_v)."""

    __slots__ = ("const", "lin", "xi_const", "xi_lin")

    def __init__(self):
        self.const = 0.0
        self.lin = {}
        self.xi_const = {}
        self.xi_lin = {}

    def add_const(self, c):
        self.const += c

    def add_lin(self, var, coef):
        if coef != 0.0:
            self.lin[var] = self.lin.get(var, 0.0) + coef

    def add_xi_const(self, comp, coef):
        if coef != 0.0:
            self.xi_const[comp] = self.xi_const.get(comp, 0.0) + coef

    def add_xi_lin(self, comp, var, coef):
        if coef != 0.0:
            key = (comp, var)
            self.xi_lin[key] = self.xi_lin.get(key, 0.0) + coef

    def add_rule_term(self, var, coef, phi_affine):
        """Add coef * x_var * Phi where Phi is ({comp: a}, offset)."""
        comps, offset = phi_affine
        self.add_lin(var, coef * offset)
        for comp, a in comps.items():
            self.add_xi_lin(comp, var, coef * a)

    def negated(self):
        out = AffineRowExpr()
        out.const = -self.const
        out.lin = {v: -c for v, c in self.lin.items()}
        out.xi_const = {e: -c for e, c in self.xi_const.items()}
        out.xi_lin = {k: -c for k, c in self.xi_lin.items()}
        return out

    def involved_comps(self):
        comps = set(self.xi_const)
        comps.update(e for (e, _) in self.xi_lin)
        return comps


@dataclass(frozen=True)
class CompPoint:
    value: float


@dataclass(frozen=True)
class CompBox:
    lo: float
    hi: float


class RobustSupport:
    """Product of per-stage supports over the flat history components.

    Component 0 is the stage-1 constant 1.  Scalar components carry a
    point or an interval; a stage may instead declare a joint
    polyhedron {W xi_stage <= w} over its components.
    """

    def __init__(self, comps, stage_of, stage_polys=None):
        self.comps = comps                    # CompPoint | CompBox | None
        self.stage_of = stage_of              # comp -> stage
        self.stage_polys = stage_polys or {}  # stage -> (W, w, comp ids)

    @staticmethod
    def from_process(proc):
        comps, stage_of = [], []
        for t in range(1, proc.T + 1):
            for d in proc.stages[t - 1]:
                if isinstance(d, Degenerate):
                    comps.append(CompPoint(d.value))
                elif isinstance(d, Uniform):
                    comps.append(CompBox(d.lo, d.hi))
                elif isinstance(d, LogNormal):
                    raise AssumptionNotMet(
                        "support is unbounded (lognormal component); no "
                        "exact robust counterpart exists")
                else:
                    raise AssumptionNotMet(f"unsupported distribution {d}")
                stage_of.append(t)
        return RobustSupport(comps, stage_of)

    def poly_for(self, comp_ids):
        """(W, w, cols) of the joint polyhedron covering the given
        components, grouping by stage; point components excluded."""
        groups = {}
        for e in comp_ids:
            groups.setdefault(self.stage_of[e], []).append(e)
        blocks = []
        for stage, es in sorted(groups.items()):
            if stage in self.stage_polys:
                W, w, cols = self.stage_polys[stage]
                blocks.append((np.asarray(W, dtype=float),
                               np.asarray(w, dtype=float), list(cols)))
            else:
                for e in sorted(es):
                    box = self.comps[e]
                    W = np.array([[1.0], [-1.0]])
                    w = np.array([box.hi, -box.lo])
                    blocks.append((W, w, [e]))
        return blocks


class RegionSink:
    """Row sink accumulating a FeasibilityRegion over a coefficient
    space of the given dimension (aux variables appended)."""

    def __init__(self, dim):
        self.dim = dim
        self.n_aux = 0
        self.triplets = []
        self.senses = []
        self.rhs = []
        self.aux_bounds = []

    def new_aux(self, lb=0.0):
        self.n_aux += 1
        self.aux_bounds.append(lb)
        return self.dim + self.n_aux - 1

    def emit(self, terms, sense, rhs):
        r = len(self.rhs)
        for (v, c) in terms:
            if c != 0.0:
                self.triplets.append((r, v, float(c)))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return r

    def region(self):
        # aux >= 0 encoded as explicit rows (regions carry rows only)
        for i, lb in enumerate(self.aux_bounds):
            if lb is not None and lb != -np.inf:
                self.emit([(self.dim + i, 1.0)], GE, lb)
        return FeasibilityRegion(self.dim, self.n_aux, self.triplets,
                                 self.senses, self.rhs)


class BuilderSink:
    """Row sink writing into an LPBuilder through a variable map."""

    def __init__(self, builder: LPBuilder, var_map):
        self.builder = builder
        self.var_map = var_map

    def new_aux(self, lb=0.0):
        v = self.builder.add_var(0.0, lb if lb is not None else -np.inf, np.inf)
        self.var_map[("aux", v)] = v
        return ("aux", v)

    def emit(self, terms, sense, rhs):
        self.builder.add_row(
            [(self.var_map[v], c) for (v, c) in terms], sense, rhs, fold=False)


def _fold_points(expr: AffineRowExpr, support: RobustSupport):
    out = AffineRowExpr()
    out.const = expr.const
    out.lin = dict(expr.lin)
    for e, c in expr.xi_const.items():
        comp = support.comps[e]
        if isinstance(comp, CompPoint):
            out.const += c * comp.value
        else:
            out.add_xi_const(e, c)
    for (e, v), c in expr.xi_lin.items():
        comp = support.comps[e]
        if isinstance(comp, CompPoint):
            out.add_lin(v, c * comp.value)
        else:
            out.add_xi_lin(e, v, c)
    return out


def robust_counterpart_row(expr: AffineRowExpr, sense, support: RobustSupport,
                           sink):
    """Emit a deterministic system satisfiable iff the affine-in-xi row
    holds for every xi in the support.

    The inner worst case over each stage polyhedron {W xi <= w} is
    dualized: multipliers y >= 0 with W'y = -g(x) and
    const + lin'x - w'y >= 0.
    """
    if sense == EQ:
        raise ModelError("equality rows go through coeff_match_equality")
    if sense == LE:
        expr = expr.negated()
    expr = _fold_points(expr, support)
    comps = sorted(expr.involved_comps())
    final_terms = [(v, c) for v, c in sorted(expr.lin.items())]
    rhs_final = -expr.const
    for (W, w, cols) in support.poly_for(comps):
        ys = [sink.new_aux(0.0) for _ in range(W.shape[0])]
        for local, e in enumerate(cols):
            terms = [(ys[r], float(W[r, local]))
                     for r in range(W.shape[0]) if W[r, local] != 0.0]
            for (ee, v), c in sorted(expr.xi_lin.items()):
                if ee == e:
                    terms.append((v, c))
            rhs_e = -expr.xi_const.get(e, 0.0)
            sink.emit(terms, EQ, rhs_e)
        for r in range(W.shape[0]):
            if w[r] != 0.0:
                final_terms.append((ys[r], -float(w[r])))
    sink.emit(final_terms, GE, rhs_final)


def coeff_match_equality(expr: AffineRowExpr, support: RobustSupport, sink):
    """Emit one equation per monomial: an affine function vanishing on a
    full-dimensional product support vanishes identically."""
    expr = _fold_points(expr, support)
    for e in sorted(expr.involved_comps()):
        if support.stage_of[e] in support.stage_polys:
            raise DegenerateSupport(
                f"component {e} lives in a joint polyhedron; "
                "full-dimensionality not verifiable")
        terms = [(v, c) for (ee, v), c in sorted(expr.xi_lin.items()) if ee == e]
        sink.emit(terms, EQ, -expr.xi_const.get(e, 0.0))
    sink.emit(sorted(expr.lin.items()), EQ, -expr.const)


# ---------------------------------------------------------------------------
# reduced dual row system

def dual_reduction(G, d_zero_cols):
    """Slack elimination for the stacked dual rows G = [D'; E'].

    Columns listed in ``d_zero_cols`` (zero objective) that touch a
    single row are removed and their row relaxed on the matching side.
    Returns (keep_mask, relax_lo, relax_hi).
    """
    n_rows, n_cols = G.shape
    relax_lo = np.zeros(n_rows, dtype=bool)
    relax_hi = np.zeros(n_rows, dtype=bool)
    keep = np.ones(n_cols, dtype=bool)
    for ci in d_zero_cols:
        nz = np.nonzero(G[:, ci])[0]
        if len(nz) != 1:
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
        keep[ci] = False
    return keep, relax_lo, relax_hi


class DualSystem:
    """Reduced dual feasibility system of one stage: kept multipliers,
    per-row senses, and the coefficient blocks to assemble rows."""

    def __init__(self, model, t):
        sd = model.stage_data
        A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
        self.t = t
        self.A, self.C = A, C
        self.B_next = (np.asarray(sd.mats(t + 1)[1], dtype=float)
                       if t < model.T else None)
        self.c_t = np.asarray(sd.costs(t)[0], dtype=float)
        self.h_t = np.asarray(sd.costs(t)[1], dtype=float)
        q_t, p_t, n_t = sd.q(t), sd.p(t), sd.n(t)
        G = np.vstack([D.T, E.T])
        if model.affine is not None:
            aff = model.affine[t - 1]
            dzero = [r for r in range(n_t)
                     if aff.d0[r] == 0.0 and not np.any(aff.d_lin[r])]
        else:
            dzero = []
        keep, relax_lo, relax_hi = dual_reduction(G, dzero)
        self.kept = np.nonzero(keep)[0]
        self.Gq = D.T[:, self.kept]          # (q_t, nk)
        self.Gp = E.T[:, self.kept]          # (p_t, nk)
        sq = np.full(q_t, EQ, dtype=np.int8)
        sp = np.full(p_t, EQ, dtype=np.int8)
        senses = np.concatenate([sq, sp])
        senses[relax_lo & ~relax_hi] = LE
        senses[relax_hi & ~relax_lo] = GE
        self.row_free = relax_lo & relax_hi
        self.sense_q = senses[:q_t]
        self.sense_p = senses[q_t:]
        self.q_t, self.p_t, self.n_t = q_t, p_t, n_t


# ---------------------------------------------------------------------------
# exact reformulations

@dataclass
class StaticCoefficients:
    """Static rule parameters: primal (Theta, beta) or dual (Lambda, Pi
    over the kept dual rows)."""

    side: str
    first: list      # Theta_t (p_t x K_t) or Lambda_t (m_t x K_t)
    second: list     # beta_t (q_t x K_t) or Pi_t (nk_t x K_t)
    kept_rows: list | None = None   # dual only: kept X-row ids per stage


@dataclass
class StaticBuildResult:
    lp: StandardLP
    layout_first: CoeffLayout
    layout_second: CoeffLayout
    side: str
    sign: float                     # +1 min (primal), -1 max (dual)
    kept_rows: list | None = None

    def extract(self, res) -> tuple:
        first = self.layout_first.unpack(res.x[:self.layout_first.dim])
        off = self.layout_first.dim
        second = self.layout_second.unpack(
            res.x[off:off + self.layout_second.dim])
        value = self.sign * res.objective
        coeffs = StaticCoefficients(self.side, first, second, self.kept_rows)
        return value, coeffs


def _phi_affine(model, t):
    aff = model.basis.xi_affine(t)
    if aff is None:
        raise AssumptionNotMet("basis is not affine in xi (A1 fails)")
    out = []
    for k, item in enumerate(aff):
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], dict):
            comps, off = item
        else:
            # StandardBasis form: (offset, comp) with comp -1 = constant
            off_val, comp = item
            comps = {} if comp < 0 else {comp: 1.0}
            off = off_val
        out.append((comps, off))
    return out


def _rule_state_expr(expr, coef, var_ids, phi_aff, K):
    """expr += coef * sum_k rule[var_ids[k]] Phi_k."""
    for k in range(K):
        expr.add_rule_term(var_ids[k], coef, phi_aff[k])


def build_static(model: MSLPModel, side: str, method: str = "exact",
                 sample: PathBatch | None = None,
                 row_guard: int = 200_000) -> StaticBuildResult:
    """Deterministic LP whose optimum is the static-rule bound.

    method='exact' needs the model flag ``static_ldr_reformulable``
    (bounded polyhedral support, constant matrices, affine rhs,
    xi-affine basis); method='sampled' enforces the almost-sure rows on
    the given sample only (use ``solve_static_sampled`` for samples too
    large to instantiate).
    """
    if side not in ("primal", "dual"):
        raise ModelError("side must be 'primal' or 'dual'")
    if method == "exact":
        if not model.static_ldr_reformulable or model.affine is None:
            raise AssumptionNotMet(
                "exact static reformulation unavailable for this model")
        return _build_static_exact(model, side)
    if method != "sampled":
        raise ModelError("method must be 'exact' or 'sampled'")
    if sample is None:
        raise ModelError("sampled method needs a sample")
    return _build_static_sampled(model, side, sample, row_guard)


def _static_layouts(model, side):
    sd = model.stage_data
    K = model.basis.K
    if side == "primal":
        lay1 = CoeffLayout([(sd.p(t), K(t)) for t in model.stages()])
        lay2 = CoeffLayout([(sd.q(t), K(t)) for t in model.stages()])
        kept = None
    else:
        systems = [DualSystem(model, t) for t in model.stages()]
        lay1 = CoeffLayout([(sd.m(t), K(t)) for t in model.stages()])
        lay2 = CoeffLayout([(len(s.kept), K(t))
                            for t, s in zip(model.stages(), systems)])
        kept = [s.kept for s in systems]
        return lay1, lay2, kept, systems
    return lay1, lay2, kept, None


def _affine_rhs_expr(expr, aff_vec0, aff_lin_row, sign=1.0):
    expr.add_const(sign * aff_vec0)
    for e in np.nonzero(aff_lin_row)[0]:
        expr.add_xi_const(int(e), sign * float(aff_lin_row[e]))


def _build_static_exact(model, side):
    support = RobustSupport.from_process(model.proc)
    sd = model.stage_data
    K = model.basis.K
    if side == "primal":
        lay1, lay2, kept, _ = _static_layouts(model, side)
    else:
        lay1, lay2, kept, systems = _static_layouts(model, side)
    b = LPBuilder()
    nvars = lay1.dim + lay2.dim
    for _ in range(nvars):
        b.add_var(0.0)
    var_map = {i: i for i in range(nvars)}
    sink = BuilderSink(b, var_map)

    def v1(t, i, k):
        return lay1.index(t, i, k)

    if side == "primal":
        for t in model.stages():
            phi_aff = _phi_affine(model, t)
            phi_prev = _phi_affine(model, t - 1) if t > 1 else None
            A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
            aff = model.affine[t - 1]
            c_t, h_t = sd.costs(t)
            mean = model.basis.mean(t)
            for i in range(sd.p(t)):
                for k in range(K(t)):
                    b.obj[v1(t, i, k)] += float(c_t[i]) * mean[k]
            for i in range(sd.q(t)):
                for k in range(K(t)):
                    b.obj[lay1.dim + lay2.index(t, i, k)] += float(h_t[i]) * mean[k]
            for r in range(sd.m(t)):
                expr = AffineRowExpr()
                for i in range(sd.q(t)):
                    if A[r, i] != 0.0:
                        _rule_state_expr(expr, A[r, i],
                                         [lay1.dim + lay2.index(t, i, k)
                                          for k in range(K(t))], phi_aff, K(t))
                if t > 1:
                    for i in range(sd.q(t - 1)):
                        if B[r, i] != 0.0:
                            _rule_state_expr(
                                expr, B[r, i],
                                [lay1.dim + lay2.index(t - 1, i, k)
                                 for k in range(K(t - 1))], phi_prev, K(t - 1))
                for i in range(sd.p(t)):
                    if C[r, i] != 0.0:
                        _rule_state_expr(expr, C[r, i],
                                         [v1(t, i, k) for k in range(K(t))],
                                         phi_aff, K(t))
                _affine_rhs_expr(expr, -float(aff.b0[r]), -aff.b_lin[r])
                coeff_match_equality(expr, support, sink)
            for r in range(sd.n(t)):
                expr = AffineRowExpr()
                for i in range(sd.q(t)):
                    if D[r, i] != 0.0:
                        _rule_state_expr(expr, D[r, i],
                                         [lay1.dim + lay2.index(t, i, k)
                                          for k in range(K(t))], phi_aff, K(t))
                for i in range(sd.p(t)):
                    if E[r, i] != 0.0:
                        _rule_state_expr(expr, E[r, i],
                                         [v1(t, i, k) for k in range(K(t))],
                                         phi_aff, K(t))
                _affine_rhs_expr(expr, -float(aff.d0[r]), -aff.d_lin[r])
                robust_counterpart_row(expr, GE, support, sink)
        return StaticBuildResult(b.build(), lay1, lay2, "primal", 1.0)

    # dual side (maximization; minimize the negated objective)
    second_moms = {t: model.basis.second_moment(t) for t in model.stages()}
    phi_comp = {}
    for t in model.stages():
        comps = []
        for (cmap, off) in _phi_affine(model, t):
            if not cmap and off == 1.0:
                comps.append(-1)
            elif len(cmap) == 1 and off == 0.0:
                (e, a), = cmap.items()
                if a != 1.0:
                    raise AssumptionNotMet("dual exact needs unit basis comps")
                comps.append(e)
            else:
                raise AssumptionNotMet(
                    "dual exact reformulation needs component basis")
        phi_comp[t] = comps

    for t in model.stages():
        phi_aff = _phi_affine(model, t)
        sy = systems[t - 1]
        aff = model.affine[t - 1]
        mean = model.basis.mean(t)
        S = second_moms[t]
        # objective: E[b'(Lambda Phi)] + E[d_kept'(Pi Phi)]  (maximize)
        for i in range(sd.m(t)):
            for k in range(K(t)):
                coef = float(aff.b0[i]) * mean[k]
                for e in np.nonzero(aff.b_lin[i])[0]:
                    ke = phi_comp[t][k]
                    if ke == -1:
                        coef += float(aff.b_lin[i, e]) * _flat_mean(model, int(e))
                    else:
                        coef += float(aff.b_lin[i, e]) * S[ke, int(e)]
                b.obj[v1(t, i, k)] -= coef   # minimize negative
        for ridx, r in enumerate(sy.kept):
            for k in range(K(t)):
                coef = float(aff.d0[r]) * mean[k]
                for e in np.nonzero(aff.d_lin[r])[0]:
                    ke = phi_comp[t][k]
                    if ke == -1:
                        coef += float(aff.d_lin[r, e]) * _flat_mean(model, int(e))
                    else:
                        coef += float(aff.d_lin[r, e]) * S[ke, int(e)]
                b.obj[lay1.dim + lay2.index(t, ridx, k)] -= coef
        # q rows
        Mc = m0 = None
        if t < model.T:
            Mc, m0 = model.basis.cond_mean_map(t)
            B_next = np.asarray(sd.mats(t + 1)[1], dtype=float)
        for qi in range(sd.q(t)):
            if sy.row_free[qi]:
                continue
            expr = AffineRowExpr()
            for i in range(sd.m(t)):
                if sy.A[i, qi] != 0.0:
                    _rule_state_expr(expr, sy.A[i, qi],
                                     [v1(t, i, k) for k in range(K(t))],
                                     phi_aff, K(t))
            if t < model.T:
                # B'_{t+1} Lambda_{t+1} (Mc Phi_t + m0)
                for i in range(sd.m(t + 1)):
                    if B_next[i, qi] == 0.0:
                        continue
                    for kk in range(K(t + 1)):
                        var = v1(t + 1, i, kk)
                        coef = float(B_next[i, qi])
                        expr.add_lin(var, coef * float(m0[kk]))
                        for k in range(K(t)):
                            if Mc[kk, k] != 0.0:
                                expr.add_rule_term(
                                    var, coef * float(Mc[kk, k]), phi_aff[k])
            for ridx, r in enumerate(sy.kept):
                if sy.Gq[qi, ridx] != 0.0:
                    _rule_state_expr(expr, sy.Gq[qi, ridx],
                                     [lay1.dim + lay2.index(t, ridx, k)
                                      for k in range(K(t))], phi_aff, K(t))
            expr.add_const(-float(sy.h_t[qi]))
            sense = int(sy.sense_q[qi])
            if sense == EQ:
                coeff_match_equality(expr, support, sink)
            else:
                robust_counterpart_row(expr, sense, support, sink)
        # p rows
        for pi in range(sd.p(t)):
            if sy.row_free[sd.q(t) + pi]:
                continue
            expr = AffineRowExpr()
            for i in range(sd.m(t)):
                if sy.C[i, pi] != 0.0:
                    _rule_state_expr(expr, sy.C[i, pi],
                                     [v1(t, i, k) for k in range(K(t))],
                                     phi_aff, K(t))
            for ridx, r in enumerate(sy.kept):
                if sy.Gp[pi, ridx] != 0.0:
                    _rule_state_expr(expr, sy.Gp[pi, ridx],
                                     [lay1.dim + lay2.index(t, ridx, k)
                                      for k in range(K(t))], phi_aff, K(t))
            expr.add_const(-float(sy.c_t[pi]))
            sense = int(sy.sense_p[pi])
            if sense == EQ:
                coeff_match_equality(expr, support, sink)
            else:
                robust_counterpart_row(expr, sense, support, sink)
        # gamma >= 0 almost surely
        for ridx in range(len(sy.kept)):
            expr = AffineRowExpr()
            _rule_state_expr(expr, 1.0,
                             [lay1.dim + lay2.index(t, ridx, k)
                              for k in range(K(t))], phi_aff, K(t))
            robust_counterpart_row(expr, GE, support, sink)
    return StaticBuildResult(b.build(), lay1, lay2, "dual", -1.0,
                             kept_rows=kept)


def _flat_mean(model, e):
    """E[flat history component e]."""
    idx = 0
    for t in range(1, model.proc.T + 1):
        for d in model.proc.stages[t - 1]:
            if idx == e:
                return d.mean()
            idx += 1
    raise ModelError(f"component {e} out of range")


# ---------------------------------------------------------------------------
# sampled static problems and policy evaluation


class StaticStageRows:
    """Numeric stage rows of the static problem on a sample: residual
    computation (vectorized over scenarios) and single-row emission."""

    def __init__(self, model, t, side, batch, phis, mode="analytic"):
        sd = model.stage_data
        self.model, self.t, self.side = model, t, side
        A, B, C, D, E = (np.asarray(M, dtype=float) for M in sd.mats(t))
        self.A, self.B, self.C, self.D, self.E = A, B, C, D, E
        self.bmat, self.dmat = sd.rhs_for_batch(t, batch)
        self.phi = phis[t]
        self.phi_prev = phis[t - 1] if t > 1 else None
        self.c_t = np.asarray(sd.costs(t)[0], dtype=float)
        self.h_t = np.asarray(sd.costs(t)[1], dtype=float)
        if side == "dual":
            self.sys = DualSystem(model, t)
            if t < model.T:
                if mode == "empirical":
                    self.phinext = phis[t + 1]
                else:
                    M_, m0 = model.basis.cond_mean_map(t)
                    self.phinext = phis[t] @ M_.T + m0[None, :]
            else:
                self.phinext = None

    # ---- primal ----
    def primal_residuals(self, theta, beta, beta_prev, theta_stage_prev=None):
        x = self.phi @ theta.T
        s = self.phi @ beta.T
        sp = (self.phi_prev @ beta_prev.T) if self.t > 1 else 0.0
        eq = s @ self.A.T + x @ self.C.T - self.bmat
        if self.t > 1:
            eq = eq + sp @ self.B.T
        ge = s @ self.D.T + x @ self.E.T - self.dmat
        cost = x @ self.c_t + s @ self.h_t
        return eq, ge, cost

    def primal_row(self, kind, r, n, var_theta, var_beta, var_beta_prev):
        """terms, sense, rhs of one instantiated row."""
        phi = self.phi[n]
        phip = self.phi_prev[n] if self.t > 1 else None
        terms = []
        if kind == "eq":
            Arow, Crow = self.A[r], self.C[r]
            Brow = self.B[r] if self.t > 1 else None
            rhs = float(self.bmat[n, r])
            sense = EQ
        else:
            Arow, Crow = self.D[r], self.E[r]
            Brow = None
            rhs = float(self.dmat[n, r])
            sense = GE
        for i in np.nonzero(Arow)[0]:
            for k in range(len(phi)):
                terms.append((var_beta(self.t, int(i), k),
                              float(Arow[i]) * float(phi[k])))
        if Brow is not None:
            for i in np.nonzero(Brow)[0]:
                for k in range(len(phip)):
                    terms.append((var_beta_prev(self.t - 1, int(i), k),
                                  float(Brow[i]) * float(phip[k])))
        for i in np.nonzero(Crow)[0]:
            for k in range(len(phi)):
                terms.append((var_theta(self.t, int(i), k),
                              float(Crow[i]) * float(phi[k])))
        return terms, sense, rhs

    # ---- dual (reduced system) ----
    def dual_residuals(self, lam, pi, lam_next):
        sy = self.sys
        lamv = self.phi @ lam.T                     # (N, m_t)
        gam = self.phi @ pi.T                       # (N, nk)
        rq = lamv @ sy.A[:, :] + gam @ sy.Gq.T - sy.h_t[None, :]
        if self.phinext is not None:
            rq = rq + (self.phinext @ lam_next.T) @ sy.B_next
        rp = lamv @ sy.C + gam @ sy.Gp.T - sy.c_t[None, :]
        value = np.einsum("ni,ni->n", self.bmat, lamv)
        value = value + np.einsum("ni,ni->n", self.dmat[:, sy.kept], gam)
        return rq, rp, gam, value

    def dual_row(self, kind, r, n, var_lam, var_pi, var_lam_next):
        sy = self.sys
        phi = self.phi[n]
        terms = []
        if kind == "q":
            sense = int(sy.sense_q[r])
            rhs = float(sy.h_t[r])
            for i in np.nonzero(sy.A[:, r])[0]:
                for k in range(len(phi)):
                    terms.append((var_lam(self.t, int(i), k),
                                  float(sy.A[i, r]) * float(phi[k])))
            if self.phinext is not None:
                pn = self.phinext[n]
                for i in np.nonzero(sy.B_next[:, r])[0]:
                    for k in range(len(pn)):
                        terms.append((var_lam_next(self.t + 1, int(i), k),
                                      float(sy.B_next[i, r]) * float(pn[k])))
            grow = sy.Gq[r]
        elif kind == "p":
            sense = int(sy.sense_p[r])
            rhs = float(sy.c_t[r])
            for i in np.nonzero(sy.C[:, r])[0]:
                for k in range(len(phi)):
                    terms.append((var_lam(self.t, int(i), k),
                                  float(sy.C[i, r]) * float(phi[k])))
            grow = sy.Gp[r]
        else:  # gamma >= 0
            sense = GE
            rhs = 0.0
            grow = None
            for k in range(len(phi)):
                terms.append((var_pi(self.t, int(r), k), float(phi[k])))
        if grow is not None:
            for ridx in np.nonzero(grow)[0]:
                for k in range(len(phi)):
                    terms.append((var_pi(self.t, int(ridx), k),
                                  float(grow[ridx]) * float(phi[k])))
        return terms, sense, rhs


class StaticSampledProblem:
    """Shared state for building/evaluating a sampled static problem."""

    def __init__(self, model: MSLPModel, side, batch, mode="analytic"):
        self.model = model
        self.side = side
        self.batch = batch
        self.mode = mode
        self.phis = {t: model.basis.eval_batch(t, batch)
                     for t in model.stages()}
        self.rows = {t: StaticStageRows(model, t, side, batch, self.phis, mode)
                     for t in model.stages()}
        sd = model.stage_data
        K = model.basis.K
        if side == "primal":
            self.lay1 = CoeffLayout([(sd.p(t), K(t)) for t in model.stages()])
            self.lay2 = CoeffLayout([(sd.q(t), K(t)) for t in model.stages()])
            self.kept = None
        else:
            self.lay1 = CoeffLayout([(sd.m(t), K(t)) for t in model.stages()])
            self.lay2 = CoeffLayout(
                [(len(self.rows[t].sys.kept), K(t)) for t in model.stages()])
            self.kept = [self.rows[t].sys.kept for t in model.stages()]

    # variable helpers over the combined space [first | second]
    def vfirst(self, t, i, k):
        return self.lay1.index(t, i, k)

    def vsecond(self, t, i, k):
        return self.lay1.dim + self.lay2.index(t, i, k)

    def objective(self):
        """Objective vector over [first | second]; minimization sign
        applied for the dual side."""
        model, sd = self.model, self.model.stage_data
        obj = np.zeros(self.lay1.dim + self.lay2.dim)
        N = len(self.batch)
        for t in model.stages():
            K = model.basis.K(t)
            if self.mode == "analytic":
                mean_phi = model.basis.mean(t)
            else:
                mean_phi = self.phis[t].mean(axis=0)
            sr = self.rows[t]
            if self.side == "primal":
                for i in range(sd.p(t)):
                    for k in range(K):
                        obj[self.vfirst(t, i, k)] += sr.c_t[i] * mean_phi[k]
                for i in range(sd.q(t)):
                    for k in range(K):
                        obj[self.vsecond(t, i, k)] += sr.h_t[i] * mean_phi[k]
            else:
                bphi = sr.bmat[:, :, None] * self.phis[t][:, None, :]
                bphi = bphi.mean(axis=0)      # E-hat[b_i Phi_k]
                dphi = (sr.dmat[:, sr.sys.kept][:, :, None]
                        * self.phis[t][:, None, :]).mean(axis=0)
                if self.mode == "analytic" and model.affine is not None:
                    aff = model.affine[t - 1]
                    S = model.basis.second_moment(t)
                    meanj = model.basis.mean(t)
                    comps = _phi_affine(model, t)
                    bphi = _cross_moment(aff.b0, aff.b_lin, comps, S, meanj, model)
                    dphi = _cross_moment(aff.d0[sr.sys.kept],
                                         aff.d_lin[sr.sys.kept], comps, S,
                                         meanj, model)
                for i in range(sd.m(t)):
                    for k in range(K):
                        obj[self.vfirst(t, i, k)] -= bphi[i, k]
                for ridx in range(len(sr.sys.kept)):
                    for k in range(K):
                        obj[self.vsecond(t, ridx, k)] -= dphi[ridx, k]
        return obj

    def unpack(self, xvec):
        first = self.lay1.unpack(xvec[:self.lay1.dim])
        second = self.lay2.unpack(xvec[self.lay1.dim:self.lay1.dim + self.lay2.dim])
        return StaticCoefficients(self.side, first, second, self.kept)

    def residuals(self, coeffs: StaticCoefficients):
        """Per-(t, kind) residual arrays and per-scenario value."""
        out = {}
        model = self.model
        N = len(self.batch)
        value = np.zeros(N)
        for t in model.stages():
            sr = self.rows[t]
            if self.side == "primal":
                eq, ge, cost = sr.primal_residuals(
                    coeffs.first[t - 1], coeffs.second[t - 1],
                    coeffs.second[t - 2] if t > 1 else None)
                out[(t, "eq")] = eq
                out[(t, "ge")] = ge
                value += cost
            else:
                lam_next = coeffs.first[t] if t < model.T else None
                rq, rp, gam, val = sr.dual_residuals(
                    coeffs.first[t - 1], coeffs.second[t - 1], lam_next)
                out[(t, "q")] = rq
                out[(t, "p")] = rp
                out[(t, "g")] = gam
                value += val
        return out, value

    def violations(self, resid):
        """Max violation per (t, kind, row) as arrays shaped like the
        residuals; positive means violated."""
        out = {}
        for (t, kind), R in resid.items():
            if kind == "eq":
                out[(t, kind)] = np.abs(R)
            elif kind in ("ge",):
                out[(t, kind)] = -R
            elif kind == "g":
                out[(t, kind)] = -R
            else:  # dual q/p rows with senses
                sy = self.rows[t].sys
                senses = sy.sense_q if kind == "q" else sy.sense_p
                V = np.empty_like(R)
                for r in range(R.shape[1]):
                    if senses[r] == EQ:
                        V[:, r] = np.abs(R[:, r])
                    elif senses[r] == LE:
                        V[:, r] = R[:, r]
                    else:
                        V[:, r] = -R[:, r]
                free = sy.row_free
                nq = sy.q_t
                if kind == "q":
                    V[:, free[:nq]] = -np.inf
                else:
                    V[:, free[nq:]] = -np.inf
                out[(t, kind)] = V
        return out

    def emit_row(self, builder_vars, t, kind, r, n, sink_builder):
        sr = self.rows[t]
        if self.side == "primal":
            terms, sense, rhs = sr.primal_row(
                "eq" if kind == "eq" else "ge", r, n,
                self.vfirst, self.vsecond, self.vsecond)
        else:
            terms, sense, rhs = sr.dual_row(
                kind, r, n, self.vfirst, self.vsecond, self.vfirst)
        sink_builder.add_row(terms, sense, rhs, fold=False)


def _cross_moment(vec0, lin, comps, S, mean, model):
    """E[(vec0 + lin flat)_i Phi_tk] via closed-form second moments."""
    m, K = len(vec0), len(comps)
    out = np.zeros((m, K))
    for i in range(m):
        for k in range(K):
            cmap, off = comps[k]
            val = float(vec0[i]) * (off + sum(
                a * _flat_mean(model, e) for e, a in cmap.items()))
            for e in np.nonzero(lin[i])[0]:
                le = float(lin[i, e])
                val += le * off * _flat_mean(model, int(e))
                for ee, a in cmap.items():
                    val += le * a * S[ee, int(e)]
            out[i, k] = val
    return out


def _build_static_sampled(model, side, sample, row_guard):
    prob = StaticSampledProblem(model, side, sample, mode="analytic")
    sd = model.stage_data
    total = 0
    for t in model.stages():
        if side == "primal":
            total += len(sample) * (sd.m(t) + sd.n(t))
        else:
            sy = prob.rows[t].sys
            total += len(sample) * (sy.q_t + sy.p_t + len(sy.kept))
    if total > row_guard:
        raise SizeGuard(
            f"sampled static LP would need {total} rows; "
            "use solve_static_sampled (row generation) instead")
    b = LPBuilder()
    obj = prob.objective()
    for c in obj:
        b.add_var(float(c))
    for t in model.stages():
        for n in range(len(sample)):
            if side == "primal":
                for r in range(sd.m(t)):
                    prob.emit_row(None, t, "eq", r, n, b)
                for r in range(sd.n(t)):
                    prob.emit_row(None, t, "ge", r, n, b)
            else:
                sy = prob.rows[t].sys
                for r in range(sy.q_t):
                    if not sy.row_free[r]:
                        prob.emit_row(None, t, "q", r, n, b)
                for r in range(sy.p_t):
                    if not sy.row_free[sy.q_t + r]:
                        prob.emit_row(None, t, "p", r, n, b)
                for r in range(len(sy.kept)):
                    prob.emit_row(None, t, "g", r, n, b)
    sign = 1.0 if side == "primal" else -1.0
    return StaticBuildResult(b.build(), prob.lay1, prob.lay2, side, sign,
                             kept_rows=prob.kept)


def _rank_select(F, tol=1e-9):
    """Deterministic spanning subset of the rows of F (Gram-Schmidt)."""
    basis = []
    idx = []
    for n in range(F.shape[0]):
        v = np.asarray(F[n], dtype=float)
        nrm0 = np.linalg.norm(v)
        if nrm0 == 0.0:
            continue
        w = v.copy()
        for bv in basis:
            w = w - (w @ bv) * bv
        nrm = np.linalg.norm(w)
        if nrm > tol * max(1.0, nrm0):
            basis.append(w / nrm)
            idx.append(n)
    return idx


@dataclass
class StaticEvalReport:
    """Static-policy evaluation: mean over feasible scenarios only (an
    optimistically biased estimate whenever any scenario is infeasible)."""

    values: np.ndarray
    feasible: np.ndarray
    infeas_fraction: float
    ci: ConfidenceInterval | None
    worst_violation: float

    @property
    def mean_feasible(self):
        return float(self.values[self.feasible].mean())


def evaluate_static(model: MSLPModel, coeffs: StaticCoefficients,
                    batch: PathBatch, tol=1e-6, level=0.95,
                    mode="analytic") -> StaticEvalReport:
    """Instantiate every constraint on every scenario; a scenario is
    infeasible when any row is violated beyond ``tol`` (absolute)."""
    prob = StaticSampledProblem(model, coeffs.side, batch, mode)
    resid, value = prob.residuals(coeffs)
    viol = prob.violations(resid)
    N = len(batch)
    worst = np.zeros(N)
    for V in viol.values():
        if V.size:
            vmax = np.max(np.where(np.isfinite(V), V, -np.inf), axis=1)
            worst = np.maximum(worst, vmax)
    feasible = worst <= tol
    ci = (confidence_interval(value[feasible], level)
          if int(feasible.sum()) >= 2 else None)
    return StaticEvalReport(values=value, feasible=feasible,
                            infeas_fraction=float(1.0 - feasible.mean()),
                            ci=ci, worst_violation=float(worst.max()))


@dataclass
class StaticSolveInfo:
    rounds: int
    rows: int
    max_violation: float
    status: str


def solve_static_sampled(model: MSLPModel, side: str, sample: PathBatch,
                         mode="analytic", viol_tol=1e-9, max_rounds=80,
                         add_cap=600, seed_scenarios=1):
    """Solve the sampled static problem exactly by scenario row
    generation: equality families are covered by a rank-revealing
    scenario subset, inequality families add their most-violated
    scenario rows per round until none is violated beyond viol_tol.

    Returns (value, StaticCoefficients, StaticSolveInfo); value is None
    when the sampled problem is infeasible.
    """
    prob = StaticSampledProblem(model, side, sample, mode)
    obj = prob.objective()
    b = LPBuilder()
    for c in obj:
        b.add_var(float(c))
    N = len(sample)
    sd = model.stage_data

    def emit_all_for_scenario(n):
        for t in model.stages():
            if side == "primal":
                for r in range(sd.m(t)):
                    prob.emit_row(None, t, "eq", r, n, b)
                for r in range(sd.n(t)):
                    prob.emit_row(None, t, "ge", r, n, b)
            else:
                sy = prob.rows[t].sys
                for r in range(sy.q_t):
                    if not sy.row_free[r]:
                        prob.emit_row(None, t, "q", r, n, b)
                for r in range(sy.p_t):
                    if not sy.row_free[sy.q_t + r]:
                        prob.emit_row(None, t, "p", r, n, b)
                for r in range(len(sy.kept)):
                    prob.emit_row(None, t, "g", r, n, b)

    # equality families: spanning representatives
    for t in model.stages():
        sr = prob.rows[t]
        if side == "primal":
            feats = [prob.phis[t]]
            if t > 1:
                feats.append(prob.phis[t - 1])
            feats.append(sr.bmat)
            reps = _rank_select(np.hstack(feats))
            for n in reps:
                for r in range(sd.m(t)):
                    prob.emit_row(None, t, "eq", r, n, b)
        else:
            sy = sr.sys
            feats = [prob.phis[t]]
            if sr.phinext is not None:
                feats.append(sr.phinext)
            reps = _rank_select(np.hstack(feats))
            for n in reps:
                for r in range(sy.q_t):
                    if sy.sense_q[r] == EQ and not sy.row_free[r]:
                        prob.emit_row(None, t, "q", r, n, b)
                for r in range(sy.p_t):
                    if sy.sense_p[r] == EQ and not sy.row_free[sy.q_t + r]:
                        prob.emit_row(None, t, "p", r, n, b)
    for n in range(min(seed_scenarios, N)):
        emit_all_for_scenario(n)

    zero = prob.unpack(np.zeros(len(obj)))
    resid_zero, _ = prob.residuals(zero)
    last_res = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        lp = b.build()
        res = solve_lp(lp)
        if res.status == LPStatus.INFEASIBLE:
            return None, None, StaticSolveInfo(rounds, lp.n_rows, np.inf,
                                               "infeasible")
        if res.status == LPStatus.UNBOUNDED:
            ray = prob.unpack(res.ray)
            resid_ray, _ = prob.residuals(ray)
            cands = []
            for key, R in resid_ray.items():
                t, kind = key
                slope = R - resid_zero[key]
                if kind in ("ge", "g"):
                    V = -slope
                elif kind in ("q", "p"):
                    sy = prob.rows[t].sys
                    senses = sy.sense_q if kind == "q" else sy.sense_p
                    V = np.where(senses[None, :] == LE, slope,
                                 np.where(senses[None, :] == GE, -slope, 0.0))
                else:
                    continue
                for r in range(V.shape[1]):
                    n = int(np.argmax(V[:, r]))
                    if V[n, r] > 1e-10:
                        cands.append((float(V[n, r]), t, kind, r, n))
            if not cands:
                raise ModelError("sampled static problem is unbounded")
            cands.sort(key=lambda c: (-c[0], c[1], c[2], c[3], c[4]))
            for (_, t, kind, r, n) in cands[:add_cap]:
                prob.emit_row(None, t, kind, r, n, b)
            continue
        coeffs = prob.unpack(res.x)
        resid, _ = prob.residuals(coeffs)
        viol = prob.violations(resid)
        cands = []
        for (t, kind), V in viol.items():
            Vf = np.where(np.isfinite(V), V, -np.inf)
            for r in range(Vf.shape[1]):
                n = int(np.argmax(Vf[:, r]))
                if Vf[n, r] > viol_tol:
                    cands.append((float(Vf[n, r]), t, kind, r, n))
        if not cands:
            sign = 1.0 if side == "primal" else -1.0
            return (sign * res.objective, coeffs,
                    StaticSolveInfo(rounds, lp.n_rows, 0.0, "optimal"))
        cands.sort(key=lambda c: (-c[0], c[1], c[2], c[3], c[4]))
        for (_, t, kind, r, n) in cands[:add_cap]:
            prob.emit_row(None, t, kind, r, n, b)
        last_res = res
    raise ModelError("row generation did not converge within max_rounds")
