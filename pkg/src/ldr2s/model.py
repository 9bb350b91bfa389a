"""Standard-form multistage model abstraction.

Stage t data: state equations A_t s_t + B_t s_{t-1} + C_t x_t = b_t and
recourse rows D_t s_t + E_t x_t >= d_t, with costs c_t (recourse) and
h_t (state).  s_0 = 0 by convention; B_1 is never used.  Generators are
pure functions of the observed history xi^t.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MalformedLP, ModelError, SizeGuard
from .lp import EQ, GE, LE, StandardLP
from .stochastic import BasisSpec, PathBatch, ProcessSpec, ScenarioPath


@dataclass
class DualSplitBlock:
    """One separable block of the stage-t dual subproblem: the dual
    variables (indices into the X_t rows) plus the state-equation (q)
    and recourse-variable (p) rows assigned to it."""

    name: str
    x_rows: np.ndarray
    q_rows: np.ndarray
    p_rows: np.ndarray
    zeta_upper: object = None  # callable(t, sample)->float or None


@dataclass
class StageData:
    """Per-stage dimensions and data generators.

    dims[t-1] = (m_t, n_t, p_t, q_t).  ``mats(t)`` must be independent
    of the history when ``matrices_constant`` (all built-in instances);
    ``rhs(t, history)`` returns (b_t, d_t) and ``rhs_batch`` its
    vectorized form over a PathBatch.
    """

    dims: list
    mats: object                       # (t) -> (A, B, C, D, E)
    rhs: object                        # (t, history) -> (b, d)
    costs: object                      # (t) -> (c, h)
    rhs_batch: object = None           # (t, PathBatch) -> (N x m, N x n)
    matrices_constant: bool = True
    costs_constant: bool = True
    state_box: object = None           # (t) -> (lo, hi) arrays, or None
    dual_split: object = None          # (t) -> list[DualSplitBlock] or None
    extra_checks: list = field(default_factory=list)

    def m(self, t):
        return self.dims[t - 1][0]

    def n(self, t):
        return self.dims[t - 1][1]

    def p(self, t):
        return self.dims[t - 1][2]

    def q(self, t):
        return self.dims[t - 1][3]

    def rhs_for_batch(self, t, batch: PathBatch):
        if self.rhs_batch is not None:
            return self.rhs_batch(t, batch)
        bs = np.empty((len(batch), self.m(t)))
        ds = np.empty((len(batch), self.n(t)))
        for j in range(len(batch)):
            b, d = self.rhs(t, batch.path(j).history(t))
            bs[j] = b
            ds[j] = d
        return bs, ds


@dataclass
class AffineStageData:
    """Constant matrices plus affine rhs in the flat history vector,
    b_t(xi^t) = b0 + b_lin @ flat(xi^t); enables exact static LDR."""

    b0: np.ndarray
    b_lin: np.ndarray   # (m_t, k^t)
    d0: np.ndarray
    d_lin: np.ndarray   # (n_t, k^t)


@dataclass
class FeasibilityRegion:
    """Linear constraints over the vectorized coefficient space (plus
    trailing auxiliary variables from robust counterparts)."""

    dim: int
    n_aux: int
    triplets: list      # (row, col, coef) with col < dim + n_aux
    senses: list
    rhs: list

    @property
    def n_rows(self):
        return len(self.rhs)

    def validate(self):
        for (r, c, v) in self.triplets:
            if not (0 <= c < self.dim + self.n_aux):
                raise MalformedLP("feasibility region column out of range")
            if not np.isfinite(v):
                raise MalformedLP("feasibility region coefficient not finite")


class CoeffLayout:
    """Vectorization of per-stage coefficient matrices (row-major)."""

    def __init__(self, shapes):
        self.shapes = list(shapes)          # (rows_t, K_t) per stage
        self.offsets = []
        off = 0
        for (r, k) in self.shapes:
            self.offsets.append(off)
            off += r * k
        self.dim = off

    def slice(self, t):
        r, k = self.shapes[t - 1]
        off = self.offsets[t - 1]
        return off, r, k

    def pack(self, mats):
        out = np.zeros(self.dim)
        for t, m in enumerate(mats, start=1):
            off, r, k = self.slice(t)
            out[off:off + r * k] = np.asarray(m, dtype=float).ravel()
        return out

    def unpack(self, vec):
        mats = []
        for t in range(1, len(self.shapes) + 1):
            off, r, k = self.slice(t)
            mats.append(np.asarray(vec[off:off + r * k], dtype=float).reshape(r, k))
        return mats

    def index(self, t, i, k):
        off, _, K = self.slice(t)
        return off + i * K + k


@dataclass
class LDRCoefficients:
    """Decision-rule parameters: per-stage q_t x K_t (primal state rule)
    or m_t x K_t (dual state-equation rule)."""

    kind: str  # "primal" | "dual"
    mats: list

    def __post_init__(self):
        for m in self.mats:
            if not np.all(np.isfinite(m)):
                raise ModelError("decision-rule coefficients must be finite")

    def stage(self, t):
        return self.mats[t - 1]

    @staticmethod
    def zeros(kind, model):
        if kind == "primal":
            shapes = [(model.stage_data.q(t), model.basis.K(t)) for t in model.stages()]
        else:
            shapes = [(model.stage_data.m(t), model.basis.K(t)) for t in model.stages()]
        return LDRCoefficients(kind, [np.zeros(s) for s in shapes])


@dataclass
class MSLPModel:
    name: str
    T: int
    stage_data: StageData
    proc: ProcessSpec
    basis: BasisSpec
    feasibility_region: FeasibilityRegion | None = None
    has_relatively_complete_recourse: bool = False
    static_ldr_reformulable: bool = False
    affine: list | None = None   # AffineStageData per stage, when available

    def stages(self):
        return range(1, self.T + 1)

    def beta_layout(self):
        return CoeffLayout(
            [(self.stage_data.q(t), self.basis.K(t)) for t in self.stages()]
        )

    def lambda_layout(self):
        return CoeffLayout(
            [(self.stage_data.m(t), self.basis.K(t)) for t in self.stages()]
        )

    def check_shapes(self, t, A, B, C, D, E, b, d, c, h):
        sd = self.stage_data
        m, n, p, q = sd.m(t), sd.n(t), sd.p(t), sd.q(t)
        qprev = sd.q(t - 1) if t > 1 else 0
        want = {
            "A": (m, q), "C": (m, p), "D": (n, q), "E": (n, p),
            "b": (m,), "d": (n,), "c": (p,), "h": (q,),
        }
        got = {"A": A.shape, "C": C.shape, "D": D.shape, "E": E.shape,
               "b": b.shape, "d": d.shape, "c": c.shape, "h": h.shape}
        if t > 1:
            want["B"] = (m, qprev)
            got["B"] = B.shape
        for key, w in want.items():
            if got[key] != w:
                raise DimensionMismatch(t, key, w, got[key])


def validate_model(model: MSLPModel, probe_paths) -> dict:
    """Dimension-check every generator on every probe path; run any
    instance-declared extra checks.  Returns a small report dict."""
    if isinstance(probe_paths, PathBatch):
        probe_paths = [probe_paths.path(j) for j in range(len(probe_paths))]
    if not probe_paths:
        raise ModelError("need at least one probe path")
    sd = model.stage_data
    n_checked = 0
    for path in probe_paths:
        for t in model.stages():
            A, B, C, D, E = sd.mats(t)
            b, d = sd.rhs(t, path.history(t))
            c, h = sd.costs(t)
            model.check_shapes(t, np.asarray(A), np.asarray(B) if t > 1 else None,
                               np.asarray(C), np.asarray(D), np.asarray(E),
                               np.asarray(b), np.asarray(d), np.asarray(c),
                               np.asarray(h))
            phi = model.basis.eval(t, path.history(t))
            if len(phi) != model.basis.K(t):
                raise DimensionMismatch(t, "Phi", (model.basis.K(t),), (len(phi),))
            if abs(phi[0] - 1.0) > 1e-12:
                raise ModelError(f"basis first component != 1 at stage {t}")
            n_checked += 1
    extra = [chk(model) for chk in sd.extra_checks]
    return {"stage_evaluations": n_checked, "extra_checks": extra}


class LPBuilder:
    """Incremental StandardLP builder that folds single-variable rows
    into variable bounds (keeping the row instead whenever the fold
    would cross existing bounds, so infeasibility stays certifiable)."""

    def __init__(self):
        self.obj = []
        self.lb = []
        self.ub = []
        self.triplets = []
        self.senses = []
        self.rhs = []

    def add_var(self, cost=0.0, lb=-np.inf, ub=np.inf):
        self.obj.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return len(self.obj) - 1

    def add_vars(self, costs, lb=-np.inf, ub=np.inf):
        return [self.add_var(c, lb, ub) for c in np.atleast_1d(costs)]

    def add_row(self, terms, sense, rhs, fold=False):
        terms = [(v, c) for (v, c) in terms if c != 0.0]
        if fold and len(terms) == 1 and sense != EQ:
            v, a = terms[0]
            bound = rhs / a
            if (sense == GE) == (a > 0):      # lower bound on v
                if bound <= self.ub[v] + 1e-15:
                    self.lb[v] = max(self.lb[v], bound)
                    return None
            else:                              # upper bound on v
                if bound >= self.lb[v] - 1e-15:
                    self.ub[v] = min(self.ub[v], bound)
                    return None
        if not terms:
            # empty row: keep it so the solver can certify inconsistency
            terms = []
        r = len(self.rhs)
        for (v, c) in terms:
            self.triplets.append((r, v, float(c)))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return r

    def build(self) -> StandardLP:
        return StandardLP.from_triplets(
            len(self.obj), self.obj, self.triplets, self.senses, self.rhs,
            list(zip(self.lb, self.ub)),
        )


def append_region(builder: LPBuilder, region: FeasibilityRegion, var_map):
    """Append feasibility-region rows; var_map maps coefficient-space
    indices to builder variables.  Aux variables are created here."""
    region.validate()
    aux = [builder.add_var(0.0) for _ in range(region.n_aux)]

    def col(cidx):
        return var_map[cidx] if cidx < region.dim else aux[cidx - region.dim]

    rows = {}
    for (r, cidx, v) in region.triplets:
        rows.setdefault(r, []).append((col(cidx), v))
    for r in range(region.n_rows):
        builder.add_row(rows.get(r, []), region.senses[r], region.rhs[r])


def extensive_form(model: MSLPModel, sample: PathBatch, size_guard=1_000_000):
    """Scenario-fan LP: stage-1 decisions shared, later decisions per
    path; objective is stage-1 cost plus the sample-average path cost.
    A testing oracle (lower-bounds the primal two-stage SAA optimum and
    upper-bounds the dual one in empirical-expectation mode)."""
    sd = model.stage_data
    N = len(sample)
    total_vars = N * sum(sd.p(t) + sd.q(t) for t in model.stages())
    if total_vars > size_guard:
        raise SizeGuard(f"extensive form would need {total_vars} variables")
    b = LPBuilder()
    layout = {}

    def add_stage_block(t, path_j, weight, s_vars, sprev_vars):
        A, B, C, D, E = sd.mats(t)
        history = sample.path(path_j).history(t) if path_j is not None else [
            np.array([1.0])
        ]
        bvec, dvec = sd.rhs(t, history)
        c, h = sd.costs(t)
        x_vars = [b.add_var(weight * c[i]) for i in range(sd.p(t))]
        for r in range(sd.m(t)):
            terms = [(s_vars[i], A[r, i]) for i in range(sd.q(t))]
            if t > 1:
                terms += [(sprev_vars[i], B[r, i]) for i in range(sd.q(t - 1))]
            terms += [(x_vars[i], C[r, i]) for i in range(sd.p(t))]
            b.add_row(terms, EQ, bvec[r])
        for r in range(sd.n(t)):
            terms = [(s_vars[i], D[r, i]) for i in range(sd.q(t))]
            terms += [(x_vars[i], E[r, i]) for i in range(sd.p(t))]
            b.add_row(terms, GE, dvec[r], fold=True)
        return x_vars

    # shared stage 1
    s1 = [b.add_var(sd.costs(1)[1][i]) for i in range(sd.q(1))]
    x1 = add_stage_block(1, None, 1.0, s1, None)
    layout["s1"] = s1
    layout["x1"] = x1
    w = 1.0 / N
    for j in range(N):
        sprev = s1
        for t in range(2, model.T + 1):
            h = sd.costs(t)[1]
            s_t = [b.add_var(w * h[i]) for i in range(sd.q(t))]
            add_stage_block(t, j, w, s_t, sprev)
            sprev = s_t
    return b.build(), layout
