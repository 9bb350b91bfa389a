"""Bounded-variable primal/dual simplex kernel.

Canonical internal form: structural variables ``x`` (n of them, bounds
``[xl, xu]``, either side may be infinite) plus one slack per row, with
the equality system ``A x - w = 0`` and slack bounds ``[rlo, rhi]``
encoding row senses or ranges.  Phase 1 uses signed artificial columns
for rows whose all-slack start violates the slack bounds; the phase-1
duals at a positive optimum are the Farkas certificate.

Everything here is plain array code so the same source runs compiled
(numba backend) or interpreted (numpy backend).  Determinism: Dantzig
pricing with smallest-index tie break, ratio ties broken by larger
pivot magnitude then smallest row index, Bland's rule engaged after a
run of degenerate pivots.
"""

import numpy as np

from .._backend import njit

# variable states
NB_LB = 0
NB_UB = 1
BASIC = 2
NB_FREE = 3

# kernel statuses
K_OPTIMAL = 0
K_INFEASIBLE = 1
K_UNBOUNDED = 2
K_ITERLIMIT = 3
K_SINGULAR = 4

INF = np.inf


@njit
def _col_nnz_dot(j, vec, n, m, Aip, Aix, Aval, asign):
    """vec . (column j of [A | -I | diag(asign)])."""
    if j < n:
        s = 0.0
        for k in range(Aip[j], Aip[j + 1]):
            s += Aval[k] * vec[Aix[k]]
        return s
    if j < n + m:
        return -vec[j - n]
    return asign[j - n - m] * vec[j - n - m]


@njit
def _ftran(j, binv, n, m, Aip, Aix, Aval, asign, out):
    """out = binv @ (column j)."""
    for i in range(m):
        out[i] = 0.0
    if j < n:
        for k in range(Aip[j], Aip[j + 1]):
            r = Aix[k]
            v = Aval[k]
            for i in range(m):
                out[i] += v * binv[i, r]
    elif j < n + m:
        r = j - n
        for i in range(m):
            out[i] = -binv[i, r]
    else:
        r = j - n - m
        s = asign[r]
        for i in range(m):
            out[i] = s * binv[i, r]


@njit
def _invert_into(B, binv):
    """Gauss-Jordan inverse with partial pivoting; False if singular."""
    m = B.shape[0]
    work = B.copy()
    for i in range(m):
        for k in range(m):
            binv[i, k] = 0.0
        binv[i, i] = 1.0
    for col in range(m):
        piv = -1.0
        prow = -1
        for i in range(col, m):
            a = abs(work[i, col])
            if a > piv:
                piv = a
                prow = i
        if piv < 1e-12:
            return False
        if prow != col:
            for k in range(m):
                t = work[col, k]
                work[col, k] = work[prow, k]
                work[prow, k] = t
                t = binv[col, k]
                binv[col, k] = binv[prow, k]
                binv[prow, k] = t
        inv = 1.0 / work[col, col]
        for k in range(m):
            work[col, k] *= inv
            binv[col, k] *= inv
        for i in range(m):
            if i != col:
                f = work[i, col]
                if f != 0.0:
                    for k in range(m):
                        work[i, k] -= f * work[col, k]
                        binv[i, k] -= f * binv[col, k]
    return True


@njit
def _build_basis_matrix(head, n, m, Aip, Aix, Aval, asign, B):
    for i in range(m):
        for k in range(m):
            B[i, k] = 0.0
    for pos in range(m):
        j = head[pos]
        if j < n:
            for k in range(Aip[j], Aip[j + 1]):
                B[Aix[k], pos] += Aval[k]
        elif j < n + m:
            B[j - n, pos] = -1.0
        else:
            r = j - n - m
            B[r, pos] = asign[r]


@njit
def _recompute_basics(head, vstat, xval, binv, n, m, Aip, Aix, Aval, asign, scratch):
    """Set basic variable values from the nonbasic ones (A v = 0)."""
    nv = n + 2 * m
    for i in range(m):
        scratch[i] = 0.0
    for j in range(nv):
        if vstat[j] == BASIC:
            continue
        v = xval[j]
        if v == 0.0:
            continue
        if j < n:
            for k in range(Aip[j], Aip[j + 1]):
                scratch[Aix[k]] += Aval[k] * v
        elif j < n + m:
            scratch[j - n] -= v
        else:
            r = j - n - m
            scratch[r] += asign[r] * v
    for pos in range(m):
        s = 0.0
        for k in range(m):
            s += binv[pos, k] * scratch[k]
        xval[head[pos]] = -s


@njit
def _refactor(head, vstat, xval, binv, n, m, Aip, Aix, Aval, asign, Bscratch, vscratch):
    _build_basis_matrix(head, n, m, Aip, Aix, Aval, asign, Bscratch)
    ok = _invert_into(Bscratch, binv)
    if not ok:
        return False
    _recompute_basics(head, vstat, xval, binv, n, m, Aip, Aix, Aval, asign, vscratch)
    return True


@njit
def _compute_y(head, binv, cost, m, y):
    for i in range(m):
        y[i] = 0.0
    for pos in range(m):
        cb = cost[head[pos]]
        if cb != 0.0:
            for i in range(m):
                y[i] += cb * binv[pos, i]


@njit
def _pivot_update(binv, w, rstar, m):
    piv = w[rstar]
    inv = 1.0 / piv
    for k in range(m):
        binv[rstar, k] *= inv
    for i in range(m):
        if i != rstar:
            f = w[i]
            if f != 0.0:
                for k in range(m):
                    binv[i, k] -= f * binv[rstar, k]


@njit
def _primal_loop(cost, lb, ub, head, vstat, xval, binv,
                 n, m, Aip, Aix, Aval, asign,
                 tol_piv, tol_dual, bland_after, max_iter, refactor_every,
                 y, w, Bscratch, vscratch, ray, iters_done):
    """Primal simplex on the current (feasible) basis for given costs.

    Returns K_OPTIMAL (phase optimum), K_UNBOUNDED (ray filled),
    K_ITERLIMIT or K_SINGULAR.  iters_done[0] accumulates pivots.
    """
    nv = n + 2 * m
    degen_run = 0
    bland = False
    since_refactor = 0
    it = 0
    while True:
        it += 1
        if it > max_iter:
            return K_ITERLIMIT
        _compute_y(head, binv, cost, m, y)
        enter = -1
        edir = 1.0
        best = tol_dual
        for j in range(nv):
            st = vstat[j]
            if st == BASIC:
                continue
            if lb[j] == ub[j]:
                continue
            d = cost[j] - _col_nnz_dot(j, y, n, m, Aip, Aix, Aval, asign)
            if st == NB_LB:
                if -d > best:
                    best = -d
                    enter = j
                    edir = 1.0
                    if bland:
                        break
            elif st == NB_UB:
                if d > best:
                    best = d
                    enter = j
                    edir = -1.0
                    if bland:
                        break
            else:  # NB_FREE
                if -d > best:
                    best = -d
                    enter = j
                    edir = 1.0
                    if bland:
                        break
                if d > best:
                    best = d
                    enter = j
                    edir = -1.0
                    if bland:
                        break
        if enter == -1:
            return K_OPTIMAL
        _ftran(enter, binv, n, m, Aip, Aix, Aval, asign, w)
        # ratio test: entering moves by edir * step >= 0
        step = INF
        leave_pos = -1
        leave_to_ub = False
        span = ub[enter] - lb[enter]
        if span < INF:
            step = span
        for pos in range(m):
            v = head[pos]
            rate = -edir * w[pos]  # d xval[v] / d step
            if rate > tol_piv:
                if ub[v] < INF:
                    r = (ub[v] - xval[v]) / rate
                    if r < step - 1e-12 or (
                        r < step + 1e-12
                        and (leave_pos == -1 or abs(w[pos]) > abs(w[leave_pos]))
                    ):
                        step = r if r > 0.0 else 0.0
                        leave_pos = pos
                        leave_to_ub = True
            elif rate < -tol_piv:
                if lb[v] > -INF:
                    r = (xval[v] - lb[v]) / (-rate)
                    if r < step - 1e-12 or (
                        r < step + 1e-12
                        and (leave_pos == -1 or abs(w[pos]) > abs(w[leave_pos]))
                    ):
                        step = r if r > 0.0 else 0.0
                        leave_pos = pos
                        leave_to_ub = False
        if step == INF:
            # unbounded: fill ray in full variable space
            for j in range(nv):
                ray[j] = 0.0
            ray[enter] = edir
            for pos in range(m):
                ray[head[pos]] = -edir * w[pos]
            return K_UNBOUNDED
        # apply step
        if step > 0.0:
            xval[enter] += edir * step
            for pos in range(m):
                if w[pos] != 0.0:
                    xval[head[pos]] -= edir * step * w[pos]
        if step <= tol_piv:
            degen_run += 1
            if degen_run >= bland_after:
                bland = True
        else:
            degen_run = 0
            bland = False
        if leave_pos == -1:
            # bound flip, no basis change
            vstat[enter] = NB_UB if edir > 0.0 else NB_LB
            xval[enter] = ub[enter] if edir > 0.0 else lb[enter]
            continue
        vleave = head[leave_pos]
        if leave_to_ub:
            xval[vleave] = ub[vleave]
            vstat[vleave] = NB_UB
        else:
            xval[vleave] = lb[vleave]
            vstat[vleave] = NB_LB
        vstat[enter] = BASIC
        head[leave_pos] = enter
        if abs(w[leave_pos]) < tol_piv:
            return K_SINGULAR
        _pivot_update(binv, w, leave_pos, m)
        iters_done[0] += 1
        since_refactor += 1
        if since_refactor >= refactor_every:
            ok = _refactor(head, vstat, xval, binv, n, m, Aip, Aix, Aval,
                           asign, Bscratch, vscratch)
            if not ok:
                return K_SINGULAR
            since_refactor = 0


@njit
def _dual_loop(cost, lb, ub, head, vstat, xval, binv,
               n, m, Aip, Aix, Aval, asign,
               tol_piv, tol_dual, tol_feas, max_iter, refactor_every,
               y, w, brow, Bscratch, vscratch, iters_done, farkas):
    """Dual simplex from a dual-feasible basis until primal feasible.

    Returns K_OPTIMAL when no primal violations remain, K_INFEASIBLE
    with ``farkas`` filled (row multipliers, user-row space),
    K_ITERLIMIT or K_SINGULAR.
    """
    nv = n + 2 * m
    since_refactor = 0
    it = 0
    while True:
        it += 1
        if it > max_iter:
            return K_ITERLIMIT
        # pick most-violated basic
        leave_pos = -1
        worst = tol_feas
        need_up = False
        for pos in range(m):
            v = head[pos]
            xv = xval[v]
            if xv < lb[v] - worst:
                worst = lb[v] - xv
                leave_pos = pos
                need_up = True
            elif xv > ub[v] + worst:
                worst = xv - ub[v]
                leave_pos = pos
                need_up = False
        if leave_pos == -1:
            return K_OPTIMAL
        # row of B^-1 A for the leaving position
        for k in range(m):
            brow[k] = binv[leave_pos, k]
        t = 1.0 if need_up else -1.0
        _compute_y(head, binv, cost, m, y)
        enter = -1
        edir = 1.0
        best_ratio = INF
        best_alpha = 0.0
        for j in range(nv):
            st = vstat[j]
            if st == BASIC:
                continue
            if lb[j] == ub[j]:
                continue
            alpha = _col_nnz_dot(j, brow, n, m, Aip, Aix, Aval, asign)
            if alpha > -tol_piv and alpha < tol_piv:
                continue
            # moving j by dj changes x_leave by -alpha*dj; need sign t
            ok_dir = 0.0
            if st == NB_LB:
                if -alpha * t > 0.0:
                    ok_dir = 1.0
            elif st == NB_UB:
                if alpha * t > 0.0:
                    ok_dir = -1.0
            else:  # free
                ok_dir = 1.0 if -alpha * t > 0.0 else -1.0
            if ok_dir == 0.0:
                continue
            d = cost[j] - _col_nnz_dot(j, y, n, m, Aip, Aix, Aval, asign)
            ratio = abs(d) / abs(alpha)
            if ratio < best_ratio - 1e-12 or (
                ratio < best_ratio + 1e-12
                and (enter == -1 or abs(alpha) > abs(best_alpha))
            ):
                best_ratio = ratio
                best_alpha = alpha
                enter = j
                edir = ok_dir
        if enter == -1:
            # primal infeasible; certificate from the violated row
            for i in range(m):
                farkas[i] = -t * brow[i]
            return K_INFEASIBLE
        # step: drive leaving variable exactly to its violated bound
        target = lb[head[leave_pos]] if need_up else ub[head[leave_pos]]
        delta_x = target - xval[head[leave_pos]]
        alpha = best_alpha
        step = delta_x / (-alpha * edir)
        if step < 0.0:
            step = 0.0
        _ftran(enter, binv, n, m, Aip, Aix, Aval, asign, w)
        xval[enter] += edir * step
        for pos in range(m):
            if w[pos] != 0.0:
                xval[head[pos]] -= edir * step * w[pos]
        vleave = head[leave_pos]
        xval[vleave] = target
        vstat[vleave] = NB_LB if need_up else NB_UB
        vstat[enter] = BASIC
        head[leave_pos] = enter
        if abs(w[leave_pos]) < tol_piv:
            return K_SINGULAR
        _pivot_update(binv, w, leave_pos, m)
        iters_done[0] += 1
        since_refactor += 1
        if since_refactor >= refactor_every:
            ok = _refactor(head, vstat, xval, binv, n, m, Aip, Aix, Aval,
                           asign, Bscratch, vscratch)
            if not ok:
                return K_SINGULAR
            since_refactor = 0


@njit
def _cold_start(lb, ub, head, vstat, xval, binv, asign,
                n, m, Aip, Aix, Aval, tol_feas):
    """All-slack start; artificial columns for violated rows.

    Returns True if any artificial is in the basis (phase 1 needed).
    """
    nv = n + 2 * m
    for j in range(n):
        l = lb[j]
        u = ub[j]
        if l > -INF and u < INF:
            if abs(l) <= abs(u):
                vstat[j] = NB_LB
                xval[j] = l
            else:
                vstat[j] = NB_UB
                xval[j] = u
        elif l > -INF:
            vstat[j] = NB_LB
            xval[j] = l
        elif u < INF:
            vstat[j] = NB_UB
            xval[j] = u
        else:
            vstat[j] = NB_FREE
            xval[j] = 0.0
    for i in range(m):
        binv[i, :] = 0.0
    # row activities of the nonbasic structurals
    act = np.zeros(m)
    for j in range(n):
        v = xval[j]
        if v != 0.0:
            for k in range(Aip[j], Aip[j + 1]):
                act[Aix[k]] += Aval[k] * v
    need_phase1 = False
    for r in range(m):
        sl = n + r
        ar = n + m + r
        asign[r] = 1.0
        xval[ar] = 0.0
        vstat[ar] = NB_LB
        wr = act[r]
        if wr < lb[sl] - tol_feas:
            # slack pinned at its lower bound, artificial makes up the rest
            vstat[sl] = NB_LB
            xval[sl] = lb[sl]
            asign[r] = 1.0
            xval[ar] = lb[sl] - wr
            vstat[ar] = BASIC
            head[r] = ar
            binv[r, r] = 1.0
            need_phase1 = True
        elif wr > ub[sl] + tol_feas:
            vstat[sl] = NB_UB
            xval[sl] = ub[sl]
            asign[r] = -1.0
            xval[ar] = wr - ub[sl]
            vstat[ar] = BASIC
            head[r] = ar
            binv[r, r] = -1.0
            need_phase1 = True
        else:
            vstat[sl] = BASIC
            xval[sl] = wr
            head[r] = sl
            binv[r, r] = -1.0
    return need_phase1


@njit
def solve_canonical(n, m, Aip, Aix, Aval, c, xl, xu, rlo, rhi,
                    warm,
                    head, vstat, xval, binv, asign, lb, ub,
                    tol_piv, tol_feas, tol_dual, tol_infeas,
                    bland_after, max_iter, refactor_every,
                    x, y, rc, farkas, ray):
    """Solve min c.x s.t. A x - w = 0, xl<=x<=xu, rlo<=w<=rhi.

    warm != 0 reuses (head, vstat, xval, binv, asign) from a previous
    solve of the SAME matrix; bounds and costs may have changed.  The
    outputs x, y, rc, farkas, ray are filled per status.  Returns
    (status, objective, pivots).
    """
    nv = n + 2 * m
    iters_done = np.zeros(1, dtype=np.int64)
    for j in range(n):
        lb[j] = xl[j]
        ub[j] = xu[j]
        if xl[j] > xu[j]:
            gap = xl[j] - xu[j]
            scale = max(1.0, abs(xl[j]))
            if gap <= 10.0 * tol_feas * scale:
                # numerical dust: treat as a fixed variable
                mid = 0.5 * (xl[j] + xu[j])
                lb[j] = mid
                ub[j] = mid
            else:
                # crossing bounds: trivially infeasible, no row certificate
                for i in range(m):
                    farkas[i] = 0.0
                return K_INFEASIBLE, 0.0, 0
    for r in range(m):
        lb[n + r] = rlo[r]
        ub[n + r] = rhi[r]
        if rlo[r] > rhi[r]:
            for i in range(m):
                farkas[i] = 0.0
            farkas[r] = 1.0
            return K_INFEASIBLE, 0.0, 0
        lb[n + m + r] = 0.0
        ub[n + m + r] = 0.0

    cost = np.zeros(nv)
    for j in range(n):
        cost[j] = c[j]

    w = np.zeros(m)
    ywork = np.zeros(m)
    brow = np.zeros(m)
    Bscratch = np.zeros((m, m))
    vscratch = np.zeros(m)

    if m == 0:
        # bounds-only problem
        obj = 0.0
        for j in range(n):
            cj = c[j]
            if cj > 0.0:
                if lb[j] <= -INF:
                    for k in range(n):
                        ray[k] = 0.0
                    ray[j] = -1.0
                    return K_UNBOUNDED, 0.0, 0
                xval[j] = lb[j]
            elif cj < 0.0:
                if ub[j] >= INF:
                    for k in range(n):
                        ray[k] = 0.0
                    ray[j] = 1.0
                    return K_UNBOUNDED, 0.0, 0
                xval[j] = ub[j]
            else:
                if lb[j] > -INF and (abs(lb[j]) <= abs(ub[j]) or ub[j] >= INF):
                    xval[j] = lb[j]
                elif ub[j] < INF:
                    xval[j] = ub[j]
                else:
                    xval[j] = 0.0
            x[j] = xval[j]
            rc[j] = cj
            obj += cj * xval[j]
        return K_OPTIMAL, obj, 0

    use_warm = warm != 0
    if use_warm:
        # clamp nonbasics to the (possibly new) bounds
        for j in range(nv):
            st = vstat[j]
            if st == BASIC:
                continue
            if st == NB_LB:
                if lb[j] > -INF:
                    xval[j] = lb[j]
                else:
                    vstat[j] = NB_FREE
                    xval[j] = 0.0
            elif st == NB_UB:
                if ub[j] < INF:
                    xval[j] = ub[j]
                else:
                    vstat[j] = NB_FREE
                    xval[j] = 0.0
            else:
                xval[j] = 0.0
        _recompute_basics(head, vstat, xval, binv, n, m, Aip, Aix, Aval,
                          asign, vscratch)
        # primal-feasible basis (e.g. only costs changed): phase 2 directly
        primal_ok = True
        for pos in range(m):
            v = head[pos]
            if xval[v] < lb[v] - tol_feas or xval[v] > ub[v] + tol_feas:
                primal_ok = False
                break
        if primal_ok:
            st = _primal_loop(cost, lb, ub, head, vstat, xval, binv,
                              n, m, Aip, Aix, Aval, asign,
                              tol_piv, tol_dual, bland_after, max_iter,
                              refactor_every,
                              ywork, w, Bscratch, vscratch, ray, iters_done)
            if st == K_OPTIMAL:
                return _finish(cost, lb, ub, head, vstat, xval, binv,
                               n, m, Aip, Aix, Aval, asign,
                               Bscratch, vscratch, x, y, rc, iters_done)
            if st == K_UNBOUNDED:
                for j in range(n):
                    x[j] = ray[j]
                return K_UNBOUNDED, 0.0, iters_done[0]
            use_warm = False
        # dual feasibility check for the new costs
        _compute_y(head, binv, cost, m, ywork)
        dual_ok = use_warm
        for j in range(nv):
            st = vstat[j]
            if st == BASIC or lb[j] == ub[j]:
                continue
            d = cost[j] - _col_nnz_dot(j, ywork, n, m, Aip, Aix, Aval, asign)
            if st == NB_LB and d < -10.0 * tol_dual:
                dual_ok = False
                break
            if st == NB_UB and d > 10.0 * tol_dual:
                dual_ok = False
                break
            if st == NB_FREE and abs(d) > 10.0 * tol_dual:
                dual_ok = False
                break
        if dual_ok:
            st = _dual_loop(cost, lb, ub, head, vstat, xval, binv,
                            n, m, Aip, Aix, Aval, asign,
                            tol_piv, tol_dual, tol_feas, max_iter,
                            refactor_every,
                            ywork, w, brow, Bscratch, vscratch, iters_done,
                            farkas)
            if st == K_INFEASIBLE:
                return K_INFEASIBLE, 0.0, iters_done[0]
            if st == K_ITERLIMIT or st == K_SINGULAR:
                use_warm = False  # fall through to a cold restart
            else:
                st = _primal_loop(cost, lb, ub, head, vstat, xval, binv,
                                  n, m, Aip, Aix, Aval, asign,
                                  tol_piv, tol_dual, bland_after, max_iter,
                                  refactor_every,
                                  ywork, w, Bscratch, vscratch, ray,
                                  iters_done)
                if st == K_OPTIMAL:
                    return _finish(cost, lb, ub, head, vstat, xval, binv,
                                   n, m, Aip, Aix, Aval, asign,
                                   Bscratch, vscratch, x, y, rc,
                                   iters_done)
                if st == K_UNBOUNDED:
                    for j in range(n):
                        x[j] = ray[j]
                    return K_UNBOUNDED, 0.0, iters_done[0]
                use_warm = False
        else:
            use_warm = False

    # cold path
    need_phase1 = _cold_start(lb, ub, head, vstat, xval, binv, asign,
                              n, m, Aip, Aix, Aval, tol_feas)
    if need_phase1:
        cost1 = np.zeros(nv)
        for r in range(m):
            lb[n + m + r] = 0.0
            ub[n + m + r] = INF
            cost1[n + m + r] = 1.0
        st = _primal_loop(cost1, lb, ub, head, vstat, xval, binv,
                          n, m, Aip, Aix, Aval, asign,
                          tol_piv, tol_dual, bland_after, max_iter,
                          refactor_every,
                          ywork, w, Bscratch, vscratch, ray, iters_done)
        if st == K_ITERLIMIT or st == K_SINGULAR:
            return st, 0.0, iters_done[0]
        ok = _refactor(head, vstat, xval, binv, n, m, Aip, Aix, Aval, asign,
                       Bscratch, vscratch)
        if not ok:
            return K_SINGULAR, 0.0, iters_done[0]
        infeas = 0.0
        for r in range(m):
            infeas += xval[n + m + r]
        if infeas > tol_infeas:
            _compute_y(head, binv, cost1, m, ywork)
            for i in range(m):
                farkas[i] = ywork[i]
            return K_INFEASIBLE, infeas, iters_done[0]
        # pin artificials and clean tiny residual values
        for r in range(m):
            ar = n + m + r
            lb[ar] = 0.0
            ub[ar] = 0.0
            if vstat[ar] != BASIC:
                xval[ar] = 0.0
    st = _primal_loop(cost, lb, ub, head, vstat, xval, binv,
                      n, m, Aip, Aix, Aval, asign,
                      tol_piv, tol_dual, bland_after, max_iter,
                      refactor_every,
                      ywork, w, Bscratch, vscratch, ray, iters_done)
    if st == K_UNBOUNDED:
        for j in range(n):
            x[j] = ray[j]
        return K_UNBOUNDED, 0.0, iters_done[0]
    if st == K_ITERLIMIT or st == K_SINGULAR:
        return st, 0.0, iters_done[0]
    return _finish(cost, lb, ub, head, vstat, xval, binv,
                   n, m, Aip, Aix, Aval, asign, Bscratch, vscratch,
                   x, y, rc, iters_done)


@njit
def _finish(cost, lb, ub, head, vstat, xval, binv,
            n, m, Aip, Aix, Aval, asign, Bscratch, vscratch,
            x, y, rc, iters_done):
    ok = _refactor(head, vstat, xval, binv, n, m, Aip, Aix, Aval, asign,
                   Bscratch, vscratch)
    if not ok:
        return K_SINGULAR, 0.0, iters_done[0]
    _compute_y(head, binv, cost, m, y)
    obj = 0.0
    for j in range(n):
        x[j] = xval[j]
        obj += cost[j] * xval[j]
        rc[j] = cost[j] - _col_nnz_dot(j, y, n, m, Aip, Aix, Aval, asign)
    return K_OPTIMAL, obj, iters_done[0]
