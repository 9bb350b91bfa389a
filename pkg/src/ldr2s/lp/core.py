"""Self-contained LP solver: bounded-variable two-phase primal simplex
with dual values and Farkas infeasibility certificates.

Rows are ``a.x <sense> rhs`` with senses LE/EQ/GE; variables carry
``[lower, upper]`` bounds with either side possibly infinite.  Under
minimization, optimal duals satisfy: GE rows nonnegative, LE rows
nonpositive, EQ rows free.  For an infeasible problem the ``farkas``
vector ``y`` is sign-consistent and proves emptiness:
``max over the bound box of (y'A)x  <  y'rhs``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import MalformedLP, NumericalFailure
from . import _simplex_core as K

LE, EQ, GE = 0, 1, 2
_SENSE_CHARS = {LE: "<=", EQ: "==", GE: ">="}


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class StandardLP:
    """A standard-form LP in sparse row-triplet form (minimization)."""

    n_vars: int
    objective: np.ndarray            # (n,)
    row_starts: np.ndarray           # triplets, CSR-ish: see from_triplets
    col_index: np.ndarray
    coef: np.ndarray
    row_sense: np.ndarray            # int8, LE/EQ/GE per row
    rhs: np.ndarray
    var_lb: np.ndarray
    var_ub: np.ndarray

    @property
    def n_rows(self):
        return len(self.rhs)

    @staticmethod
    def from_triplets(n_vars, objective, triplets, senses, rhs, bounds):
        """Build from (row, col, coef) triplets.

        bounds: sequence of (lb, ub) per variable, None meaning +-inf.
        """
        objective = np.asarray(objective, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        m = len(rhs)
        sense_arr = np.asarray(
            [s if isinstance(s, (int, np.integer)) else {"<=": LE, "==": EQ, ">=": GE}[s]
             for s in senses],
            dtype=np.int8,
        )
        rows = np.asarray([t[0] for t in triplets], dtype=np.int64)
        cols = np.asarray([t[1] for t in triplets], dtype=np.int64)
        vals = np.asarray([t[2] for t in triplets], dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        starts = np.zeros(m + 1, dtype=np.int64)
        np.add.at(starts[1:], rows, 1)
        starts = np.cumsum(starts)
        lb = np.empty(n_vars)
        ub = np.empty(n_vars)
        for j, b in enumerate(bounds):
            lo, hi = b
            lb[j] = -np.inf if lo is None else lo
            ub[j] = np.inf if hi is None else hi
        lp = StandardLP(n_vars, objective, starts, cols, vals, sense_arr, rhs, lb, ub)
        lp.validate()
        return lp

    def validate(self):
        n, m = self.n_vars, self.n_rows
        if len(self.objective) != n:
            raise MalformedLP("objective length mismatch")
        if not np.all(np.isfinite(self.objective)):
            raise MalformedLP("objective has non-finite entries")
        if len(self.coef) and (self.col_index.min() < 0 or self.col_index.max() >= n):
            raise MalformedLP("column index out of range")
        if not np.all(np.isfinite(self.coef)):
            raise MalformedLP("row coefficient not finite")
        if not np.all(np.isfinite(self.rhs)):
            raise MalformedLP("rhs not finite")
        if np.any(self.var_lb > self.var_ub):
            raise MalformedLP("variable with lower bound above upper bound")
        if len(self.row_starts) != m + 1 or self.row_starts[-1] != len(self.coef):
            raise MalformedLP("row pointer structure broken")

    def to_csc(self):
        """(indptr, indices, data) of the column-major constraint matrix."""
        m = self.n_rows
        nnz = len(self.coef)
        rows = np.repeat(np.arange(m, dtype=np.int64), np.diff(self.row_starts))
        order = np.lexsort((rows, self.col_index))
        csc_rows = rows[order]
        csc_data = self.coef[order]
        indptr = np.zeros(self.n_vars + 1, dtype=np.int64)
        np.add.at(indptr[1:], self.col_index[order], 1)
        return np.cumsum(indptr), csc_rows, csc_data, nnz

    def row_ranges(self):
        """Slack bounds [rlo, rhi] encoding the senses."""
        rlo = np.where(self.row_sense == LE, -np.inf, self.rhs)
        rhi = np.where(self.row_sense == GE, np.inf, self.rhs)
        return rlo.astype(float), rhi.astype(float)


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    row_duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None
    farkas_gap: float | None = None
    ray: np.ndarray | None = None
    pivots: int = 0


@dataclass
class SolverConfig:
    tol_pivot: float = 1e-9
    tol_feas: float = 1e-9
    tol_dual: float = 1e-9
    tol_infeas: float = 1e-7
    bland_after: int = 50
    refactor_every: int = 64
    max_iter_base: int = 20000
    scale: bool = False


DEFAULT_CONFIG = SolverConfig()


def _equilibrate(csc_ip, csc_ix, csc_val, n, m):
    """One-pass geometric-mean row/col scaling factors."""
    rmax = np.full(m, 0.0)
    rmin = np.full(m, np.inf)
    for j in range(n):
        for k in range(csc_ip[j], csc_ip[j + 1]):
            a = abs(csc_val[k])
            if a > 0:
                r = csc_ix[k]
                rmax[r] = max(rmax[r], a)
                rmin[r] = min(rmin[r], a)
    rscale = np.ones(m)
    nz = rmax > 0
    rscale[nz] = 1.0 / np.sqrt(rmax[nz] * rmin[nz])
    cscale = np.ones(n)
    for j in range(n):
        lo, hi = np.inf, 0.0
        for k in range(csc_ip[j], csc_ip[j + 1]):
            a = abs(csc_val[k]) * rscale[csc_ix[k]]
            if a > 0:
                lo = min(lo, a)
                hi = max(hi, a)
        if hi > 0:
            cscale[j] = 1.0 / np.sqrt(lo * hi)
    return rscale, cscale


def certificate_gap(lp: StandardLP, y: np.ndarray) -> float:
    """y'rhs - sup_box (y'A)x; positive proves emptiness.

    Entries of y and z = y'A below 1e-9 relative are treated as exact
    zeros (they are cancellation dust from the phase-1 duals); the gap
    threshold of 1e-8 dominates that fuzz at desk scale.
    """
    m = lp.n_rows
    ynorm = max(1.0, float(np.max(np.abs(y))) if m else 0.0)
    ytol = 1e-12 * ynorm
    z = np.zeros(lp.n_vars)
    val = 0.0
    for r in range(m):
        yr = y[r]
        if abs(yr) <= ytol:
            continue
        sense = int(lp.row_sense[r])
        if (sense == GE and yr < 0) or (sense == LE and yr > 0):
            return -np.inf  # wrong sign on a one-sided row
        val += yr * lp.rhs[r]
        s = slice(lp.row_starts[r], lp.row_starts[r + 1])
        np.add.at(z, lp.col_index[s], yr * lp.coef[s])
    amax = max(1.0, float(np.max(np.abs(lp.coef))) if len(lp.coef) else 0.0)
    ztol = 1e-9 * ynorm * amax
    sup = 0.0
    for j in range(lp.n_vars):
        zj = z[j]
        if abs(zj) <= ztol:
            continue
        if zj > 0:
            if lp.var_ub[j] == np.inf:
                return -np.inf
            sup += zj * lp.var_ub[j]
        else:
            if lp.var_lb[j] == -np.inf:
                return -np.inf
            sup += zj * lp.var_lb[j]
    return float(val - sup)


class Workspace:
    """Reusable kernel state for one constraint matrix.

    Solve once cold, then re-solve with modified costs / bounds / rhs
    ranges; the previous basis warm-starts the next solve (dual simplex
    when bounds moved, primal clean-up otherwise).
    """

    def __init__(self, n, m, csc_ip, csc_ix, csc_val, config=None):
        self.n = n
        self.m = m
        self.ip = np.ascontiguousarray(csc_ip, dtype=np.int64)
        self.ix = np.ascontiguousarray(csc_ix, dtype=np.int64)
        self.val = np.ascontiguousarray(csc_val, dtype=float)
        self.cfg = config or DEFAULT_CONFIG
        nv = n + 2 * m
        self.head = np.zeros(m, dtype=np.int64)
        self.vstat = np.zeros(nv, dtype=np.int8)
        self.xval = np.zeros(nv)
        self.binv = np.zeros((m, m))
        self.asign = np.ones(m)
        self.lb = np.zeros(nv)
        self.ub = np.zeros(nv)
        self._x = np.zeros(n)
        self._y = np.zeros(m)
        self._rc = np.zeros(n)
        self._farkas = np.zeros(m)
        self._ray = np.zeros(nv)
        self._have_basis = False

    @staticmethod
    def from_lp(lp: StandardLP, config=None):
        ip, ix, val, _ = lp.to_csc()
        return Workspace(lp.n_vars, lp.n_rows, ip, ix, val, config)

    def solve(self, c, xl, xu, rlo, rhi, warm=True) -> LPResult:
        cfg = self.cfg
        max_iter = cfg.max_iter_base + 50 * (self.n + self.m)
        status, obj, pivots = K.solve_canonical(
            self.n, self.m, self.ip, self.ix, self.val,
            np.ascontiguousarray(c, dtype=float),
            np.ascontiguousarray(xl, dtype=float),
            np.ascontiguousarray(xu, dtype=float),
            np.ascontiguousarray(rlo, dtype=float),
            np.ascontiguousarray(rhi, dtype=float),
            1 if (warm and self._have_basis) else 0,
            self.head, self.vstat, self.xval, self.binv, self.asign,
            self.lb, self.ub,
            cfg.tol_pivot, cfg.tol_feas, cfg.tol_dual, cfg.tol_infeas,
            cfg.bland_after, max_iter, cfg.refactor_every,
            self._x, self._y, self._rc, self._farkas, self._ray,
        )
        if status == K.K_ITERLIMIT:
            raise NumericalFailure("simplex iteration limit exceeded")
        if status == K.K_SINGULAR:
            raise NumericalFailure("basis became numerically singular")
        self._have_basis = status == K.K_OPTIMAL
        if status == K.K_OPTIMAL:
            return LPResult(
                LPStatus.OPTIMAL,
                x=self._x.copy(),
                objective=float(obj),
                row_duals=self._y.copy(),
                reduced_costs=self._rc.copy(),
                pivots=int(pivots),
            )
        if status == K.K_UNBOUNDED:
            return LPResult(
                LPStatus.UNBOUNDED, ray=self._ray[: self.n].copy(), pivots=int(pivots)
            )
        return LPResult(
            LPStatus.INFEASIBLE, farkas=self._farkas.copy(), pivots=int(pivots)
        )


def solve_lp(lp: StandardLP, config: SolverConfig | None = None) -> LPResult:
    """Solve a StandardLP; see module docstring for result guarantees."""
    lp.validate()
    cfg = config or DEFAULT_CONFIG
    n, m = lp.n_vars, lp.n_rows
    ip, ix, val, _ = lp.to_csc()
    rlo, rhi = lp.row_ranges()
    c = lp.objective
    xl, xu = lp.var_lb.copy(), lp.var_ub.copy()
    if cfg.scale and len(val):
        rs, cs = _equilibrate(ip, ix, val, n, m)
        val = val.copy()
        for j in range(n):
            for k in range(ip[j], ip[j + 1]):
                val[k] *= rs[ix[k]] * cs[j]
        c = c * cs
        xl = xl / cs
        xu = xu / cs
        rlo = rlo * rs
        rhi = rhi * rs
    ws = Workspace(n, m, ip, ix, val, cfg)
    res = ws.solve(c, xl, xu, rlo, rhi, warm=False)
    if cfg.scale and len(val):
        if res.status == LPStatus.OPTIMAL:
            res.x = res.x * cs
            res.row_duals = res.row_duals * rs
            res.reduced_costs = res.reduced_costs / cs
            res.objective = float(lp.objective @ res.x)
        elif res.status == LPStatus.UNBOUNDED:
            res.ray = res.ray * cs
        else:
            res.farkas = res.farkas * rs
    if res.status == LPStatus.INFEASIBLE:
        gap = certificate_gap(lp, res.farkas)
        if gap <= 0:
            flipped = certificate_gap(lp, -res.farkas)
            if flipped > gap:
                res.farkas = -res.farkas
                gap = flipped
        if gap <= 0:
            # certificate from a warm-path shortcut can be inconclusive;
            # re-solve cold for a clean phase-1 certificate
            ws2 = Workspace(n, m, ip, ix, val, cfg)
            res2 = ws2.solve(c, xl, xu, rlo, rhi, warm=False)
            if res2.status == LPStatus.INFEASIBLE:
                res = res2
                gap = certificate_gap(lp, res.farkas)
        res.farkas_gap = gap
        if not gap > 0:
            raise NumericalFailure(
                f"infeasibility detected but certificate gap is {gap:g}"
            )
    return res


def dump_lp(lp: StandardLP) -> str:
    """Human-readable text dump: one row per line (sense, rhs, terms)."""
    out = [f"vars {lp.n_vars} rows {lp.n_rows}"]
    out.append(
        "min " + " ".join(f"{ci:+g} x{j}" for j, ci in enumerate(lp.objective) if ci)
    )
    for r in range(lp.n_rows):
        s = slice(lp.row_starts[r], lp.row_starts[r + 1])
        terms = " ".join(
            f"{v:+g} x{j}" for j, v in zip(lp.col_index[s], lp.coef[s])
        )
        out.append(f"row {r}: {terms} {_SENSE_CHARS[int(lp.row_sense[r])]} {lp.rhs[r]:g}")
    for j in range(lp.n_vars):
        out.append(f"bnd x{j}: [{lp.var_lb[j]:g}, {lp.var_ub[j]:g}]")
    return "\n".join(out)
