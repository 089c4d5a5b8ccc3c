"""Fused numba kernels for the two hottest code paths.

fused_dual_forward evaluates a packed network once and returns the value,
the latent-state Jacobian and first/second spatial derivatives — one pass
instead of two generic forward-mode sweeps.  fused_train_step runs the full
forward+backward of the pre-training loss (hyper-net included) with all
intermediate buffers fused.  Both are validated against the generic
autodiff paths, which remain the pure-numpy fallback.

Padding convention: layer stacks are zero-padded to (wmax, wmax); zeros
propagate harmlessly through matmuls and swish (swish(0) = 0), so no
slicing happens in the hot loops.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@njit(cache=True)
def _periodic_embed(x, lo, inv_span, period, pa, pc, pb, wmax, want_dirs):
    """Returns H (n, wmax) plus per-axis angle sums needed by derivatives."""
    n, d = x.shape
    w0 = pa.shape[0]
    two_pi = 2.0 * np.pi
    H = np.zeros((n, wmax))
    cossum = np.zeros((n, w0))
    sinsum = np.zeros((n, w0))
    # per-axis trig values for directional derivatives
    cosk = np.zeros((d, n, w0)) if want_dirs else np.zeros((1, 1, 1))
    sink = np.zeros((d, n, w0)) if want_dirs else np.zeros((1, 1, 1))
    for i in range(n):
        for k in range(d):
            ang0 = (x[i, k] - lo[k]) * inv_span[k] * (two_pi / period)
            for u in range(w0):
                a = ang0 + pc[u]
                cv = np.cos(a)
                sv = np.sin(a)
                cossum[i, u] += cv
                sinsum[i, u] += sv
                if want_dirs:
                    cosk[k, i, u] = cv
                    sink[k, i, u] = sv
        for u in range(w0):
            H[i, u] = pa[u] * cossum[i, u] + d * pb[u]
    return H, cossum, sinsum, cosk, sink


@njit(cache=True)
def fused_dual_forward(
    x, lo, inv_span, period, pa, pc, pb,
    W, b, A, B, WT, BT, AT,
    rank, mode, lat0, n_layers,
    phi, want_second,
):
    """Value, d/dphi, d/dx and d2/dx2 of the packed network at x.

    Returns (val, G, D1, D2) with val (n, wmax), G (q, n, wmax),
    D1/D2 (d, n, wmax); real outputs live in the first n_fields columns.
    """
    n, d = x.shape
    q = phi.shape[0]
    w0 = pa.shape[0]
    wmax = W.shape[1]
    two_pi = 2.0 * np.pi

    H, cossum, sinsum, cosk, sink = _periodic_embed(
        x, lo, inv_span, period, pa, pc, pb, wmax, True
    )
    G = np.zeros((q, n, wmax))
    D1 = np.zeros((d, n, wmax))
    nd2 = d if want_second else 0
    D2 = np.zeros((max(nd2, 1), n, wmax))
    for k in range(d):
        fac = inv_span[k] * (two_pi / period)
        for i in range(n):
            for u in range(w0):
                D1[k, i, u] = -pa[u] * sink[k, i, u] * fac
                if want_second:
                    D2[k, i, u] = -pa[u] * cosk[k, i, u] * fac * fac
    # swish follows the periodic embedding
    for i in range(n):
        for u in range(w0):
            z = H[i, u]
            sg = _sigmoid(z)
            sp = sg * (1.0 - sg)
            s1 = sg * (1.0 + z * (1.0 - sg))
            s2 = 2.0 * sp + z * sp * (1.0 - 2.0 * sg)
            for k in range(d):
                if want_second:
                    d1v = D1[k, i, u]
                    D2[k, i, u] = s2 * d1v * d1v + s1 * D2[k, i, u]
                D1[k, i, u] *= s1
            H[i, u] = z * sg

    avec = np.zeros(A.shape[2])
    for l in range(n_layers):
        r = rank[l]
        md = mode[l]
        rmax = A.shape[2]
        for j in range(rmax):
            avec[j] = 0.0
        if md == 1:
            for j in range(r):
                avec[j] = phi[lat0[l]]
        elif md == 2:
            for j in range(r):
                avec[j] = phi[lat0[l] + j]

        Z = np.dot(H, WT[l])
        u_raw = np.dot(H, BT[l])
        if r > 0:
            scaled = u_raw * avec
            Z += np.dot(scaled, AT[l])
        for i in range(n):
            for u in range(wmax):
                Z[i, u] += b[l, u]

        # propagate channels through the effective weight W + A diag(a) B
        Gn = np.empty_like(G)
        for j in range(q):
            t = np.dot(G[j], WT[l])
            if r > 0:
                t += np.dot(np.dot(G[j], BT[l]) * avec, AT[l])
            Gn[j] = t
        if md == 1:
            extra = np.dot(u_raw, AT[l])
            Gn[lat0[l]] += extra
        elif md == 2:
            for lr in range(r):
                jj = lat0[l] + lr
                for i in range(n):
                    ui = u_raw[i, lr]
                    for u in range(wmax):
                        Gn[jj, i, u] += ui * AT[l, lr, u]
        D1n = np.empty_like(D1)
        for k in range(d):
            t = np.dot(D1[k], WT[l])
            if r > 0:
                t += np.dot(np.dot(D1[k], BT[l]) * avec, AT[l])
            D1n[k] = t
        D2n = np.empty_like(D2)
        if want_second:
            for k in range(d):
                t = np.dot(D2[k], WT[l])
                if r > 0:
                    t += np.dot(np.dot(D2[k], BT[l]) * avec, AT[l])
                D2n[k] = t

        if l < n_layers - 1:  # swish between layers
            for i in range(n):
                for u in range(wmax):
                    z = Z[i, u]
                    sg = _sigmoid(z)
                    sp = sg * (1.0 - sg)
                    s1 = sg * (1.0 + z * (1.0 - sg))
                    s2 = 2.0 * sp + z * sp * (1.0 - 2.0 * sg)
                    for j in range(q):
                        Gn[j, i, u] *= s1
                    for k in range(d):
                        if want_second:
                            d1v = D1n[k, i, u]
                            D2n[k, i, u] = s2 * d1v * d1v + s1 * D2n[k, i, u]
                        D1n[k, i, u] *= s1
                    Z[i, u] = z * sg
        H = Z
        G = Gn
        D1 = D1n
        D2 = D2n
    return H, G, D1, D2


@njit(cache=True)
def _colsum(M):
    out = np.zeros(M.shape[1])
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            out[j] += M[i, j]
    return out


@njit(cache=True)
def fused_train_step(
    tmu_pad, X, target, inv_den, n_x, scale,
    lo, inv_span, period, pa, pc, pb,
    W, b, A, B, WT, BT, AT,
    rank, mode, lat0, n_layers, n_fields, q,
    HW, hb, HWT, h_layers,
):
    """Loss value and gradients of the pre-training objective on one batch.

    Returns (loss, dpa, dpc, dpb, dW, db, dA, dB, dHW, dhb).
    """
    rows, d = X.shape
    G = tmu_pad.shape[0]
    hmax = HW.shape[1]
    wmax = W.shape[1]
    rmax = A.shape[2]

    # hyper-network forward (padded width hmax)
    Th = np.zeros((h_layers + 1, G, hmax))
    Zh = np.zeros((h_layers, G, hmax))
    sgh = np.zeros((h_layers, G, hmax))
    Th[0] = tmu_pad
    for l in range(h_layers):
        Z = np.dot(Th[l], HWT[l])
        for g in range(G):
            for u in range(hmax):
                Z[g, u] += hb[l, u]
        Zh[l] = Z
        if l < h_layers - 1:
            sg = _sigmoid(Z)
            sgh[l] = sg
            Th[l + 1] = Z * sg
        else:
            Th[l + 1] = Z
    phi = Th[h_layers]  # (G, hmax), real entries in cols :q

    # field-network forward, saving what the backward needs
    Hp, cossum, sinsum, _, _ = _periodic_embed(
        X, lo, inv_span, period, pa, pc, pb, wmax, False
    )
    w0 = pa.shape[0]
    Zp = Hp.copy()  # periodic pre-activation, needed by the backward
    sgp = np.zeros((rows, w0))
    for i in range(rows):
        for u in range(w0):
            z = Zp[i, u]
            sg = _sigmoid(z)
            sgp[i, u] = sg
            Hp[i, u] = z * sg
    Hs = np.zeros((n_layers + 1, rows, wmax))
    Zs = np.zeros((n_layers, rows, wmax))
    sgs = np.zeros((n_layers, rows, wmax))
    us = np.zeros((n_layers, rows, rmax))
    scs = np.zeros((n_layers, rows, rmax))
    Hs[0] = Hp
    for l in range(n_layers):
        r = rank[l]
        Z = np.dot(Hs[l], WT[l])
        if r > 0:
            u_raw = np.dot(Hs[l], BT[l])
            us[l] = u_raw
            scaled = np.zeros((rows, rmax))
            if mode[l] == 1:
                for i in range(rows):
                    al = phi[i // n_x, lat0[l]]
                    for lr in range(r):
                        scaled[i, lr] = u_raw[i, lr] * al
            else:
                for i in range(rows):
                    g = i // n_x
                    for lr in range(r):
                        scaled[i, lr] = u_raw[i, lr] * phi[g, lat0[l] + lr]
            scs[l] = scaled
            Z += np.dot(scaled, AT[l])
        for i in range(rows):
            for u in range(wmax):
                Z[i, u] += b[l, u]
        Zs[l] = Z
        if l < n_layers - 1:
            sg = _sigmoid(Z)
            sgs[l] = sg
            Hs[l + 1] = Z * sg
        else:
            Hs[l + 1] = Z

    # loss and its gradient on the prediction
    pred = Hs[n_layers]
    loss = 0.0
    dH = np.zeros((rows, wmax))
    for i in range(rows):
        for f in range(n_fields):
            diff = pred[i, f] - target[i, f]
            loss += diff * diff * inv_den[i, f]
            dH[i, f] = 2.0 * diff * inv_den[i, f] * scale
    loss *= scale

    # field-network backward
    dpa = np.zeros_like(pa)
    dpc = np.zeros_like(pc)
    dpb = np.zeros_like(pb)
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    dA = np.zeros_like(A)
    dB = np.zeros_like(B)
    dphi = np.zeros((G, hmax))
    for l in range(n_layers - 1, -1, -1):
        r = rank[l]
        if l < n_layers - 1:
            dZ = np.empty((rows, wmax))
            for i in range(rows):
                for u in range(wmax):
                    z = Zs[l][i, u]
                    sg = sgs[l][i, u]
                    dZ[i, u] = dH[i, u] * sg * (1.0 + z * (1.0 - sg))
        else:
            dZ = dH
        dW[l] += np.dot(dZ.T, Hs[l])
        db[l] += _colsum(dZ)
        if r > 0:
            c = np.dot(dZ, A[l])  # (rows, rmax)
            dA[l] += np.dot(dZ.T, scs[l])
            du = np.zeros((rows, rmax))
            if mode[l] == 1:
                for i in range(rows):
                    g = i // n_x
                    al = phi[g, lat0[l]]
                    acc = 0.0
                    for lr in range(r):
                        acc += c[i, lr] * us[l][i, lr]
                        du[i, lr] = c[i, lr] * al
                    dphi[g, lat0[l]] += acc
            else:
                for i in range(rows):
                    g = i // n_x
                    for lr in range(r):
                        dphi[g, lat0[l] + lr] += c[i, lr] * us[l][i, lr]
                        du[i, lr] = c[i, lr] * phi[g, lat0[l] + lr]
            dB[l] += np.dot(du.T, Hs[l])
            dH = np.dot(dZ, W[l]) + np.dot(du, B[l])
        else:
            dH = np.dot(dZ, W[l])

    # periodic layer parameter gradients (through its trailing swish)
    for i in range(rows):
        for u in range(w0):
            z = Zp[i, u]
            sg = sgp[i, u]
            g0 = dH[i, u] * sg * (1.0 + z * (1.0 - sg))
            dpa[u] += g0 * cossum[i, u]
            dpc[u] -= g0 * pa[u] * sinsum[i, u]
            dpb[u] += g0 * d

    # hyper-network backward from dphi
    dHW = np.zeros_like(HW)
    dhb = np.zeros_like(hb)
    dT = dphi
    for l in range(h_layers - 1, -1, -1):
        if l < h_layers - 1:
            dZ = np.empty((G, hmax))
            for g in range(G):
                for u in range(hmax):
                    z = Zh[l][g, u]
                    sg = sgh[l][g, u]
                    dZ[g, u] = dT[g, u] * sg * (1.0 + z * (1.0 - sg))
        else:
            dZ = dT
        dHW[l] += np.dot(dZ.T, Th[l])
        dhb[l] += _colsum(dZ)
        dT = np.dot(dZ, HW[l])

    return loss, dpa, dpc, dpb, dW, db, dA, dB, dHW, dhb
