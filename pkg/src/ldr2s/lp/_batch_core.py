"""Batched scenario solves over a fixed constraint matrix.

One kernel-state allocation; scenario s supplies bounds and row ranges
(and optionally its own costs).  With shared costs, consecutive solves
warm-start from the previous optimal basis (dual simplex); otherwise
every solve is cold.
"""

import numpy as np

from .._backend import njit
from . import _simplex_core as S


@njit
def batch_ranged_solve(n, m, Aip, Aix, Aval,
                       c, cvar, has_cvar,
                       lb2, ub2, rlo2, rhi2,
                       tol_piv, tol_feas, tol_dual, tol_infeas,
                       bland_after, max_iter, refactor_every,
                       want_x, want_y, want_rc,
                       status, vals, X, Y, RC, FK):
    N = lb2.shape[0]
    nv = n + 2 * m
    head = np.zeros(m, dtype=np.int64)
    vstat = np.zeros(nv, dtype=np.int8)
    xval = np.zeros(nv)
    binv = np.zeros((m, m))
    asign = np.ones(m)
    lb = np.zeros(nv)
    ub = np.zeros(nv)
    x = np.zeros(n)
    y = np.zeros(m)
    rc = np.zeros(n)
    farkas = np.zeros(m)
    ray = np.zeros(nv)
    have_basis = False
    for s in range(N):
        cs = cvar[s] if has_cvar else c
        warm = 1 if (have_basis and not has_cvar) else 0
        st, obj, piv = S.solve_canonical(
            n, m, Aip, Aix, Aval, cs,
            lb2[s], ub2[s], rlo2[s], rhi2[s],
            warm,
            head, vstat, xval, binv, asign, lb, ub,
            tol_piv, tol_feas, tol_dual, tol_infeas,
            bland_after, max_iter, refactor_every,
            x, y, rc, farkas, ray)
        status[s] = st
        if st == S.K_OPTIMAL:
            vals[s] = obj
            have_basis = True
            if want_x:
                for j in range(n):
                    X[s, j] = x[j]
            if want_y:
                for i in range(m):
                    Y[s, i] = y[i]
            if want_rc:
                for j in range(n):
                    RC[s, j] = rc[j]
        else:
            vals[s] = np.nan
            have_basis = False
            if st == S.K_INFEASIBLE:
                for i in range(m):
                    FK[s, i] = farkas[i]
    return 0
