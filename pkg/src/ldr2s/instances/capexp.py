"""Power-generation capacity expansion instance.

Three technologies, a load duration curve with 8 periods x 5 wind
regimes (40 segments per stage), lognormal demand- and wind-growth
factors, installed capacity as the state.  Demand in segment (l, w) at
stage t >= 2 is max{d0_l prod xi^g - eta_w K^w_t prod xi^w, 0}; stage-1
demand is the deterministic 1.229 d0_l - 1.207 eta_w.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ModelError
from ..model import DualSplitBlock, MSLPModel, StageData
from ..stochastic import Degenerate, LogNormal, ProcessSpec, ProductBasis


@dataclass(frozen=True)
class CapExpData:
    n_tech: int = 3
    n_periods: int = 8
    n_wind: int = 5
    iota: tuple = (245.8, 113.9, 57.8)          # annualized capacity cost
    c_op: tuple = (41.9, 58.9, 90.8)            # operating cost per MWh
    d0: tuple = (77.1, 71.4, 65.7, 60.1, 54.4, 48.8, 43.1, 37.4)  # GW
    tau_l: tuple = (68.0, 677.0, 1585.0, 1781.0, 1367.0, 1688.0, 1289.0, 305.0)
    eta_w: tuple = (0.929, 0.818, 0.549, 0.212, 0.0)   # fractions
    tau_w: tuple = (0.198, 0.2178, 0.182, 0.267, 0.135)
    K2w: float = 36.64
    Ktw: float = 45.75
    mu_g: float = 0.2
    mu_w: float = 0.15
    disc: float = 1.1

    @property
    def n_seg(self):
        return self.n_periods * self.n_wind

    def sigma_g(self, t):
        return 0.1 + 0.01 * t

    def sigma_w(self, t):
        return 0.25 + 0.025 * t

    def Kw(self, t):
        return self.K2w if t == 2 else self.Ktw

    def seg(self, l, w):
        return l * self.n_wind + w

    def cost_u_plus(self, t):
        return 5.0 * np.asarray(self.iota) / self.disc**t

    def cost_x(self, t):
        out = np.empty((self.n_tech, self.n_seg))
        for i in range(self.n_tech):
            for l in range(self.n_periods):
                for w in range(self.n_wind):
                    out[i, self.seg(l, w)] = (0.001 * self.c_op[i]
                                              * self.tau_l[l] * self.tau_w[w]
                                              / self.disc**t)
        return out

    def cost_z(self, t):
        out = np.empty(self.n_seg)
        for l in range(self.n_periods):
            for w in range(self.n_wind):
                out[self.seg(l, w)] = self.tau_l[l] * self.tau_w[w] / self.disc**t
        return out

    def demand_stage1(self):
        out = np.empty(self.n_seg)
        for l in range(self.n_periods):
            for w in range(self.n_wind):
                out[self.seg(l, w)] = (1.229 * self.d0[l]
                                       - 1.207 * self.eta_w[w])
        return out

    def demand(self, t, phi_g, phi_w):
        """Segment demands for cumulative growth factors (vectorized
        over scenarios when phi_g/phi_w are arrays)."""
        phi_g = np.asarray(phi_g, dtype=float)
        base = np.empty(phi_g.shape + (self.n_seg,))
        Kw = self.Kw(t)
        for l in range(self.n_periods):
            for w in range(self.n_wind):
                base[..., self.seg(l, w)] = (self.d0[l] * phi_g
                                             - self.eta_w[w] * Kw * phi_w)
        return np.maximum(base, 0.0)


DATA = CapExpData()


def capexp_process(T, data=DATA):
    stages = [[Degenerate(1.0)]]
    for t in range(2, T + 1):
        stages.append([LogNormal(data.mu_g, data.sigma_g(t)),
                       LogNormal(data.mu_w, data.sigma_w(t))])
    return ProcessSpec(stages)


def capexp_model(T, C, data=DATA) -> MSLPModel:
    """State: installed capacity per technology; recourse: additions
    u+, removals u-, operating levels x_{ij}, shortfalls z_j."""
    if not 2 <= T <= 20:
        raise ModelError("capexp instance supports T in [2, 20]")
    if not C > 0:
        raise ModelError("need C > 0")
    proc = capexp_process(T, data)
    basis = ProductBasis(proc, comps=(0, 1))
    I, J = data.n_tech, data.n_seg
    p_t = 2 * I + I * J + J
    # recourse-variable offsets
    o_up, o_um, o_x, o_z = 0, I, 2 * I, 2 * I + I * J

    def xvar(i, j):
        return o_x + i * J + j

    A = np.eye(I)
    B = -np.eye(I)
    Cmat = np.zeros((I, p_t))
    Cmat[:, o_up:o_up + I] = -np.eye(I)
    Cmat[:, o_um:o_um + I] = np.eye(I)

    # X_t rows: D s + E x >= d
    rows = []
    r_xs, r_dem, r_zlo, r_zup = [], [], [], []
    D_rows, E_rows = [], []

    def add_row(drow, erow):
        D_rows.append(drow)
        E_rows.append(erow)
        return len(D_rows) - 1

    for i in range(I):
        for j in range(J):
            d = np.zeros(I)
            d[i] = 1.0
            e = np.zeros(p_t)
            e[xvar(i, j)] = -1.0
            r_xs.append(add_row(d, e))
    for j in range(J):
        e = np.zeros(p_t)
        for i in range(I):
            e[xvar(i, j)] = 1.0
        e[o_z + j] = 1.0
        r_dem.append(add_row(np.zeros(I), e))
    for j in range(J):
        e = np.zeros(p_t)
        e[o_z + j] = 1.0
        r_zlo.append(add_row(np.zeros(I), e))
    for j in range(J):
        e = np.zeros(p_t)
        e[o_z + j] = -1.0
        r_zup.append(add_row(np.zeros(I), e))
    r_up_lo = []
    r_up_hi = []
    r_um_lo = []
    r_um_hi = []
    for (offset, lo_list, hi_list) in ((o_up, r_up_lo, r_up_hi),
                                       (o_um, r_um_lo, r_um_hi)):
        for i in range(I):
            e = np.zeros(p_t)
            e[offset + i] = 1.0
            lo_list.append(add_row(np.zeros(I), e))
        for i in range(I):
            e = np.zeros(p_t)
            e[offset + i] = -1.0
            hi_list.append(add_row(np.zeros(I), e))
    r_x_lo = []
    for i in range(I):
        for j in range(J):
            e = np.zeros(p_t)
            e[xvar(i, j)] = 1.0
            r_x_lo.append(add_row(np.zeros(I), e))
    r_s_lo, r_s_hi = [], []
    for i in range(I):
        d = np.zeros(I)
        d[i] = 1.0
        r_s_lo.append(add_row(d, np.zeros(p_t)))
    for i in range(I):
        d = np.zeros(I)
        d[i] = -1.0
        r_s_hi.append(add_row(d, np.zeros(p_t)))
    D = np.asarray(D_rows)
    E = np.asarray(E_rows)
    n_t = D.shape[0]

    def M_s(t):
        return t * C

    def M_um(t):
        return (t - 1) * C

    def d_vector(t, dem):
        d = np.zeros(dem.shape[:-1] + (n_t,))
        d[..., r_dem] = dem
        d[..., r_zup] = -dem
        d[..., r_up_hi] = -C
        d[..., r_um_hi] = -M_um(t)
        d[..., r_s_hi] = -M_s(t)
        return d

    def mats(t):
        return A, B, Cmat, D, E

    def rhs(t, history):
        if t == 1:
            dem = data.demand_stage1()
        else:
            phi = basis.eval(t, history)
            dem = data.demand(t, phi[1], phi[2])
        return np.zeros(I), d_vector(t, dem)

    def rhs_batch(t, batch):
        N = len(batch)
        if t == 1:
            dem = np.tile(data.demand_stage1(), (N, 1))
        else:
            phi = basis.eval_batch(t, batch)
            dem = data.demand(t, phi[:, 1], phi[:, 2])
        return np.zeros((N, I)), d_vector(t, dem)

    def costs(t):
        c = np.zeros(p_t)
        c[o_up:o_up + I] = data.cost_u_plus(t)
        c[o_x:o_x + I * J] = data.cost_x(t).ravel()
        c[o_z:] = data.cost_z(t)
        return c, np.zeros(I)

    def state_box(t):
        return np.zeros(I), np.full(I, M_s(t))

    upart_rows = np.asarray(r_up_lo + r_up_hi + r_um_lo + r_um_hi,
                            dtype=np.int64)
    rest_rows = np.asarray(sorted(set(range(n_t)) - set(upart_rows.tolist())),
                           dtype=np.int64)

    def dual_split(t):
        return [
            DualSplitBlock(
                name="upart", x_rows=upart_rows,
                q_rows=np.empty(0, dtype=np.int64),
                p_rows=np.arange(o_up, o_um + I, dtype=np.int64),
                zeta_upper=lambda t_, sample: 0.0),
            DualSplitBlock(
                name="rest", x_rows=rest_rows,
                q_rows=np.arange(I, dtype=np.int64),
                p_rows=np.arange(o_x, p_t, dtype=np.int64),
                zeta_upper=_rest_zeta_upper),
        ]

    def _rest_zeta_upper(t, sample):
        _, dmat = sd.rhs_for_batch(t, sample)
        cz = data.cost_z(t)
        return float(np.mean(dmat[:, r_dem] @ cz))

    def check_recourse(model):
        for t in range(1, T + 1):
            if M_um(t) < (M_s(t - 1) if t > 1 else 0.0) - 1e-12:
                raise ModelError(f"M_um violates the recourse bound at t={t}")
        return "recourse-bounds-ok"

    dims = [(I, n_t, p_t, I)] * T
    sd = StageData(dims=dims, mats=mats, rhs=rhs, costs=costs,
                   rhs_batch=rhs_batch, state_box=state_box,
                   dual_split=dual_split, extra_checks=[check_recourse])
    sd.dual_drop_rows = lambda t: list(r_zup)
    model = MSLPModel(
        name="capexp", T=T, stage_data=sd, proc=proc, basis=basis,
        has_relatively_complete_recourse=True,
        static_ldr_reformulable=False, affine=None)
    model.capexp_data = data
    model.capexp_C = C
    model.row_groups = {
        "x_le_s": r_xs, "demand": r_dem, "z_lo": r_zlo, "z_up": r_zup,
        "up_lo": r_up_lo, "up_hi": r_up_hi, "um_lo": r_um_lo,
        "um_hi": r_um_hi, "x_lo": r_x_lo, "s_lo": r_s_lo, "s_hi": r_s_hi,
    }
    return model


def capexp_dual_stage(model, t, lam, path, mode="analytic"):
    """The two split stage-dual LPs (installation block and the rest)
    as solved templates; returns (value_upart, value_rest, total)."""
    from ..stage_lp import DualStageLP, basis_values
    from ..stochastic import PathBatch
    batch = PathBatch(model.proc, [np.asarray([path.stage(r)])
                                   for r in range(1, model.T + 1)])
    phis = basis_values(model, batch)
    blocks = model.stage_data.dual_split(t)
    drop = model.stage_data.dual_drop_rows(t)
    vals = []
    for blk in blocks:
        tmpl = DualStageLP(model, t, block=blk,
                           drop_rows=drop if blk.name == "rest" else ())
        res = tmpl.solve_batch(lam, batch, phis, mode=mode)
        vals.append(float(res.values[0]))
    return vals[0], vals[1], vals[0] + vals[1]
