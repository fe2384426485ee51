"""Numba inner loops for the samplers.

Everything here works on compact arrays restricted to the currently selected
features: the DM functions see member rows sliced to selected OTU columns,
the DTM functions see rows sliced to branches of selected nodes.  All
randomness comes in as pre-drawn uniform arrays so chains are reproducible
bit-for-bit regardless of compilation.

Scan functions implement restricted Gibbs allocation between two sides, each
pinned to an anchor sample that never moves.  Allocation weights follow
n_{side,-s} * exp(log predictive of s in side).
"""

import math

import numpy as np
from numba import njit

__all__ = ["dm_restricted", "dtm_restricted", "dm_gamma_moves", "dtm_gamma_moves"]

SCANS_ONLY = 0  # intermediate scans only (launch construction)
SCAN_SAMPLE = 1  # plus one sampling scan, returning its log transition prob
SCAN_FORCE = 2  # plus one forced scan to `target`, returning its log prob


@njit(cache=True, inline="always")
def _log1pexp(x):
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


@njit(cache=True, inline="always")
def _dm_pred(row, ye_s, yn_s, t_side, e_side, n_side, alpha, b1, b2, dga):
    """Log predictive of one sample row joining a side of the DM kernel.

    Constant factor terms cancel in the factor difference, so only entries
    with positive counts and the three total-based terms remain.
    """
    acc = 0.0
    for k in range(row.shape[0]):
        v = row[k]
        if v > 0.0:
            acc += math.lgamma(t_side[k] + v + alpha) - math.lgamma(t_side[k] + alpha)
    acc -= math.lgamma(e_side + ye_s + dga) - math.lgamma(e_side + dga)
    acc += math.lgamma(b1 + n_side + yn_s) - math.lgamma(b1 + n_side)
    acc += math.lgamma(b2 + e_side + ye_s) - math.lgamma(b2 + e_side)
    tot = e_side + n_side
    acc -= math.lgamma(b1 + b2 + tot + ye_s + yn_s) - math.lgamma(b1 + b2 + tot)
    return acc


@njit(cache=True)
def dm_restricted(rows, ye, yn, row_i, yie, yin, row_l, yle, yln,
                  side, u_scans, u_final, nscans, mode, target,
                  alpha, b1, b2, dga):
    """Restricted Gibbs machinery of the DM kernel.

    rows/ye/yn: movable members (selected columns, selected totals, rest).
    row_i etc.: anchor of side 0; row_l etc.: anchor of side 1.  ``side`` is
    the members' current allocation and is updated in place.  Runs ``nscans``
    plain scans, then per ``mode`` nothing / one sampling scan / one scan
    forced to ``target``; returns the final scan's log transition probability
    (0.0 for SCANS_ONLY).
    """
    m, s = rows.shape
    t0 = np.zeros(s)
    t1 = np.zeros(s)
    for k in range(s):
        t0[k] = row_i[k]
        t1[k] = row_l[k]
    e0, n0tot = yie, yin
    e1, n1tot = yle, yln
    c0, c1 = 1, 1
    for j in range(m):
        if side[j] == 0:
            for k in range(s):
                t0[k] += rows[j, k]
            e0 += ye[j]
            n0tot += yn[j]
            c0 += 1
        else:
            for k in range(s):
                t1[k] += rows[j, k]
            e1 += ye[j]
            n1tot += yn[j]
            c1 += 1

    logq = 0.0
    total_passes = nscans + (1 if mode != SCANS_ONLY else 0)
    upos = 0
    for p in range(total_passes):
        final = mode != SCANS_ONLY and p == nscans
        for j in range(m):
            if side[j] == 0:
                for k in range(s):
                    t0[k] -= rows[j, k]
                e0 -= ye[j]
                n0tot -= yn[j]
                c0 -= 1
            else:
                for k in range(s):
                    t1[k] -= rows[j, k]
                e1 -= ye[j]
                n1tot -= yn[j]
                c1 -= 1
            lp0 = math.log(c0) + _dm_pred(rows[j], ye[j], yn[j], t0, e0, n0tot,
                                          alpha, b1, b2, dga)
            lp1 = math.log(c1) + _dm_pred(rows[j], ye[j], yn[j], t1, e1, n1tot,
                                          alpha, b1, b2, dga)
            x = lp1 - lp0  # log p0 = -log1pexp(x), log p1 = -log1pexp(-x)
            if final:
                if mode == SCAN_FORCE:
                    pick0 = target[j] == 0
                else:
                    pick0 = u_final[j] < 1.0 / (1.0 + math.exp(min(x, 700.0)))
                logq += -_log1pexp(x) if pick0 else -_log1pexp(-x)
            else:
                pick0 = u_scans[upos] < 1.0 / (1.0 + math.exp(min(x, 700.0)))
                upos += 1
            if pick0:
                for k in range(s):
                    t0[k] += rows[j, k]
                e0 += ye[j]
                n0tot += yn[j]
                c0 += 1
                side[j] = 0
            else:
                for k in range(s):
                    t1[k] += rows[j, k]
                e1 += ye[j]
                n1tot += yn[j]
                c1 += 1
                side[j] = 1
    return logq


@njit(cache=True, inline="always")
def _dtm_pred(rowb, rown, tb, tn, koff, kk, alpha):
    """Log predictive of one sample's branch rows joining a side of the DTM
    kernel; nodes the sample does not reach contribute nothing."""
    acc = 0.0
    for q in range(rown.shape[0]):
        nj = rown[q]
        if nj > 0.0:
            for t in range(koff[q], koff[q + 1]):
                v = rowb[t]
                if v > 0.0:
                    acc += math.lgamma(tb[t] + v + alpha) - math.lgamma(tb[t] + alpha)
            ka = kk[q] * alpha
            acc -= math.lgamma(tn[q] + nj + ka) - math.lgamma(tn[q] + ka)
    return acc


@njit(cache=True)
def dtm_restricted(rows, rown, row_bi, row_ni, row_bl, row_nl,
                   side, u_scans, u_final, nscans, mode, target,
                   koff, kk, alpha):
    """Restricted Gibbs machinery of the DTM kernel; mirrors dm_restricted.

    rows/rown: member branch values and node totals over selected nodes,
    with branch columns grouped per node by ``koff``."""
    m, sb = rows.shape
    sn = rown.shape[1]
    tb0 = np.zeros(sb)
    tb1 = np.zeros(sb)
    tn0 = np.zeros(sn)
    tn1 = np.zeros(sn)
    for k in range(sb):
        tb0[k] = row_bi[k]
        tb1[k] = row_bl[k]
    for q in range(sn):
        tn0[q] = row_ni[q]
        tn1[q] = row_nl[q]
    c0, c1 = 1, 1
    for j in range(m):
        if side[j] == 0:
            for k in range(sb):
                tb0[k] += rows[j, k]
            for q in range(sn):
                tn0[q] += rown[j, q]
            c0 += 1
        else:
            for k in range(sb):
                tb1[k] += rows[j, k]
            for q in range(sn):
                tn1[q] += rown[j, q]
            c1 += 1

    logq = 0.0
    total_passes = nscans + (1 if mode != SCANS_ONLY else 0)
    upos = 0
    for p in range(total_passes):
        final = mode != SCANS_ONLY and p == nscans
        for j in range(m):
            if side[j] == 0:
                for k in range(sb):
                    tb0[k] -= rows[j, k]
                for q in range(sn):
                    tn0[q] -= rown[j, q]
                c0 -= 1
            else:
                for k in range(sb):
                    tb1[k] -= rows[j, k]
                for q in range(sn):
                    tn1[q] -= rown[j, q]
                c1 -= 1
            lp0 = math.log(c0) + _dtm_pred(rows[j], rown[j], tb0, tn0, koff, kk, alpha)
            lp1 = math.log(c1) + _dtm_pred(rows[j], rown[j], tb1, tn1, koff, kk, alpha)
            x = lp1 - lp0
            if final:
                if mode == SCAN_FORCE:
                    pick0 = target[j] == 0
                else:
                    pick0 = u_final[j] < 1.0 / (1.0 + math.exp(min(x, 700.0)))
                logq += -_log1pexp(x) if pick0 else -_log1pexp(-x)
            else:
                pick0 = u_scans[upos] < 1.0 / (1.0 + math.exp(min(x, 700.0)))
                upos += 1
            if pick0:
                for k in range(sb):
                    tb0[k] += rows[j, k]
                for q in range(sn):
                    tn0[q] += rown[j, q]
                c0 += 1
                side[j] = 0
            else:
                for k in range(sb):
                    tb1[k] += rows[j, k]
                for q in range(sn):
                    tn1[q] += rown[j, q]
                c1 += 1
                side[j] = 1
    return logq


@njit(cache=True, inline="always")
def _dm_sel_beta(dg, gs, ye_k, ct_k, alpha, lga, b1, b2):
    """Per-cluster selected-DM plus Beta factor from aggregate sums (the
    constant Beta normalizer drops; it cancels in every delta taken here)."""
    sel = math.lgamma(dg * alpha) - dg * lga + gs - math.lgamma(ye_k + dg * alpha)
    beta = (
        math.lgamma(b1 + ct_k - ye_k)
        + math.lgamma(b2 + ye_k)
        - math.lgamma(b1 + b2 + ct_k)
    )
    return sel + beta


@njit(cache=True, inline="always")
def _dm_pooled(d_noise, sgn, sn, alpha, lga):
    if d_noise == 0:
        return 0.0
    return (
        math.lgamma(d_noise * alpha)
        - d_noise * lga
        + sgn
        - math.lgamma(sn + d_noise * alpha)
    )


@njit(cache=True)
def dm_gamma_moves(gamma, t_mat, ct, s_pool, alpha, b1, b2, logw_ratio, u):
    """A batch of Metropolis moves on the DM selection vector.

    gamma is updated in place.  u has one row of four uniforms per move
    (move type, index draw, second index draw, acceptance).  Returns
    (number accepted, total log-marginal change).
    """
    d = gamma.shape[0]
    nk = t_mat.shape[0]
    lga = math.lgamma(alpha)
    dg = 0
    for j in range(d):
        dg += gamma[j]
    sgn = 0.0
    sn = 0.0
    for j in range(d):
        if gamma[j] == 0:
            sgn += math.lgamma(s_pool[j] + alpha)
            sn += s_pool[j]
    ye = np.zeros(nk)
    gs = np.zeros(nk)
    for k in range(nk):
        for j in range(d):
            if gamma[j] == 1:
                ye[k] += t_mat[k, j]
                gs[k] += math.lgamma(t_mat[k, j] + alpha)

    naccept = 0
    dtotal = 0.0
    for step in range(u.shape[0]):
        if u[step, 0] < 0.5:
            # add/delete a single index
            j = min(int(u[step, 1] * d), d - 1)
            add = gamma[j] == 0
            if not add and dg == 1:
                continue  # deleting the last selected feature is rejected
            if add:
                dg2 = dg + 1
                sgn2 = sgn - math.lgamma(s_pool[j] + alpha)
                sn2 = sn - s_pool[j]
                dprior = logw_ratio
            else:
                dg2 = dg - 1
                sgn2 = sgn + math.lgamma(s_pool[j] + alpha)
                sn2 = sn + s_pool[j]
                dprior = -logw_ratio
            delta = _dm_pooled(d - dg2, sgn2, sn2, alpha, lga) - _dm_pooled(
                d - dg, sgn, sn, alpha, lga
            )
            for k in range(nk):
                if add:
                    ye2 = ye[k] + t_mat[k, j]
                    gs2 = gs[k] + math.lgamma(t_mat[k, j] + alpha)
                else:
                    ye2 = ye[k] - t_mat[k, j]
                    gs2 = gs[k] - math.lgamma(t_mat[k, j] + alpha)
                delta += _dm_sel_beta(dg2, gs2, ye2, ct[k], alpha, lga, b1, b2)
                delta -= _dm_sel_beta(dg, gs[k], ye[k], ct[k], alpha, lga, b1, b2)
            if math.log(u[step, 3]) < delta + dprior:
                gamma[j] = 1 if add else 0
                for k in range(nk):
                    if add:
                        ye[k] += t_mat[k, j]
                        gs[k] += math.lgamma(t_mat[k, j] + alpha)
                    else:
                        ye[k] -= t_mat[k, j]
                        gs[k] -= math.lgamma(t_mat[k, j] + alpha)
                dg, sgn, sn = dg2, sgn2, sn2
                naccept += 1
                dtotal += delta
        else:
            # swap a selected with an unselected index
            if dg == d or dg == 0:
                continue  # no valid pair to swap
            pick1 = min(int(u[step, 1] * dg), dg - 1)
            pick0 = min(int(u[step, 2] * (d - dg)), d - dg - 1)
            f = -1
            g = -1
            seen1 = 0
            seen0 = 0
            for j in range(d):
                if gamma[j] == 1:
                    if seen1 == pick1:
                        f = j
                    seen1 += 1
                else:
                    if seen0 == pick0:
                        g = j
                    seen0 += 1
            sgn2 = sgn + math.lgamma(s_pool[f] + alpha) - math.lgamma(s_pool[g] + alpha)
            sn2 = sn + s_pool[f] - s_pool[g]
            delta = _dm_pooled(d - dg, sgn2, sn2, alpha, lga) - _dm_pooled(
                d - dg, sgn, sn, alpha, lga
            )
            for k in range(nk):
                ye2 = ye[k] - t_mat[k, f] + t_mat[k, g]
                gs2 = (
                    gs[k]
                    - math.lgamma(t_mat[k, f] + alpha)
                    + math.lgamma(t_mat[k, g] + alpha)
                )
                delta += _dm_sel_beta(dg, gs2, ye2, ct[k], alpha, lga, b1, b2)
                delta -= _dm_sel_beta(dg, gs[k], ye[k], ct[k], alpha, lga, b1, b2)
            if math.log(u[step, 3]) < delta:
                gamma[f] = 0
                gamma[g] = 1
                for k in range(nk):
                    ye[k] += t_mat[k, g] - t_mat[k, f]
                    gs[k] += math.lgamma(t_mat[k, g] + alpha) - math.lgamma(
                        t_mat[k, f] + alpha
                    )
                sgn, sn = sgn2, sn2
                naccept += 1
                dtotal += delta
    return naccept, dtotal


@njit(cache=True, inline="always")
def _dtm_node_factor(vals, start, stop, kj, alpha, lga):
    tot = 0.0
    acc = 0.0
    for t in range(start, stop):
        v = vals[t]
        tot += v
        acc += math.lgamma(v + alpha)
    return math.lgamma(kj * alpha) - kj * lga + acc - math.lgamma(tot + kj * alpha)


@njit(cache=True)
def dtm_gamma_moves(gamma, tb_mat, pb, koff, kk, alpha, logw_ratio, u):
    """A batch of Metropolis moves on the DTM node-selection vector.

    tb_mat: per-cluster branch sums; pb: all-sample branch sums.  Node
    factors are independent across nodes, so a flip of node j changes only
    node j's pooled factor and its per-cluster factors.
    """
    nj = gamma.shape[0]
    nk = tb_mat.shape[0]
    lga = math.lgamma(alpha)
    dg = 0
    for j in range(nj):
        dg += gamma[j]

    naccept = 0
    dtotal = 0.0
    for step in range(u.shape[0]):
        if u[step, 0] < 0.5:
            j = min(int(u[step, 1] * nj), nj - 1)
            add = gamma[j] == 0
            if not add and dg == 1:
                continue
            start, stop = koff[j], koff[j + 1]
            clustered = 0.0
            for k in range(nk):
                clustered += _dtm_node_factor(tb_mat[k], start, stop, kk[j], alpha, lga)
            pooled = _dtm_node_factor(pb, start, stop, kk[j], alpha, lga)
            if add:
                delta = clustered - pooled
                dprior = logw_ratio
            else:
                delta = pooled - clustered
                dprior = -logw_ratio
            if math.log(u[step, 3]) < delta + dprior:
                gamma[j] = 1 if add else 0
                dg += 1 if add else -1
                naccept += 1
                dtotal += delta
        else:
            if dg == nj or dg == 0:
                continue
            pick1 = min(int(u[step, 1] * dg), dg - 1)
            pick0 = min(int(u[step, 2] * (nj - dg)), nj - dg - 1)
            f = -1
            g = -1
            seen1 = 0
            seen0 = 0
            for j in range(nj):
                if gamma[j] == 1:
                    if seen1 == pick1:
                        f = j
                    seen1 += 1
                else:
                    if seen0 == pick0:
                        g = j
                    seen0 += 1
            delta = 0.0
            for which in range(2):
                node = f if which == 0 else g
                sign = -1.0 if which == 0 else 1.0
                start, stop = koff[node], koff[node + 1]
                clustered = 0.0
                for k in range(nk):
                    clustered += _dtm_node_factor(tb_mat[k], start, stop, kk[node], alpha, lga)
                pooled = _dtm_node_factor(pb, start, stop, kk[node], alpha, lga)
                delta += sign * (clustered - pooled)
            if math.log(u[step, 3]) < delta:
                gamma[f] = 0
                gamma[g] = 1
                naccept += 1
                dtotal += delta
    return naccept, dtotal
