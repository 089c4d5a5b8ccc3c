"""Packed-model wrappers around the fused numba kernels.

Only standard architectures (periodic embed + swish CoLoRA stack) qualify;
anything else, and the numpy backend, uses the generic autodiff path.  The
fused and generic paths are interchangeable up to float round-off and are
pinned against each other in the test suite.
"""

import numpy as np

from . import backend
from .kernels.pack import pack_hyper, pack_net, packable


def available(net):
    return backend.NUMBA_ENABLED and packable(net)


def make_trainer(net, hyper, param_names):
    """Fastest loss/grad evaluator for standard nets, None for the tape.

    The vectorized numpy trainer beats the numba one wherever the jit has
    no SIMD libm (see the kernel benchmark), so it is the default on both
    backends; the fused variant stays available for comparison.
    """
    if not packable(net):
        return None
    return NumpyTrainer(net, hyper, param_names)


class FusedModel:
    """Packed network for repeated fused evaluations at fixed weights."""

    def __init__(self, net, theta):
        from .kernels import fused

        self._fused = fused
        self.net = net
        pk = pack_net(net, theta)
        self.pk = pk
        self.WT = np.ascontiguousarray(pk.W.transpose(0, 2, 1))
        self.BT = np.ascontiguousarray(pk.B.transpose(0, 2, 1))
        self.AT = np.ascontiguousarray(pk.A.transpose(0, 2, 1))
        self.n_layers = pk.W.shape[0]

    def dual_eval(self, x, phi, want_second=True):
        """(value, J, d1, d2): J is (n, F, q); d1/d2 are (d, n, F)."""
        pk = self.pk
        x = np.ascontiguousarray(x, dtype=np.float64)
        phi = np.ascontiguousarray(phi, dtype=np.float64)
        H, G, D1, D2 = self._fused.fused_dual_forward(
            x, pk.lo, pk.inv_span, pk.period, pk.pa, pk.pc, pk.pb,
            pk.W, pk.b, pk.A, pk.B, self.WT, self.BT, self.AT,
            pk.rank, pk.mode, pk.lat0, self.n_layers,
            phi, want_second,
        )
        F = pk.n_fields
        val = H[:, :F].copy()
        J = np.moveaxis(G[:, :, :F], 0, -1).copy()
        d1 = D1[:, :, :F].copy()
        d2 = D2[:, :, :F].copy() if want_second else None
        return val, J, d1, d2


class FusedTrainer:
    """Per-step fused loss/gradient evaluation during pre-training."""

    def __init__(self, net, hyper, param_names):
        from .kernels import fused

        self._fused = fused
        self.net = net
        self.hyper = hyper
        self.names = list(param_names)

    def loss_and_grad(self, params_store, batch, eps_rel, n_fields, q):
        from .kernels.pack import PackedHyper, PackedNet  # noqa: F401

        pk = pack_net(self.net, params_store)
        ph = pack_hyper(self.hyper, params_store)
        WT = np.ascontiguousarray(pk.W.transpose(0, 2, 1))
        BT = np.ascontiguousarray(pk.B.transpose(0, 2, 1))
        AT = np.ascontiguousarray(pk.A.transpose(0, 2, 1))
        HWT = np.ascontiguousarray(ph.W.transpose(0, 2, 1))
        tmu, X, target, n_x = batch
        G = tmu.shape[0]
        hmax = ph.W.shape[1]
        tmu_pad = np.zeros((G, hmax))
        tmu_pad[:, : tmu.shape[1]] = tmu
        den = np.maximum(target * target, eps_rel)
        inv_den = 1.0 / den
        scale = 1.0 / target.size
        loss, dpa, dpc, dpb, dW, db, dA, dB, dHW, dhb = self._fused.fused_train_step(
            tmu_pad, np.ascontiguousarray(X), np.ascontiguousarray(target),
            np.ascontiguousarray(inv_den), n_x, scale,
            pk.lo, pk.inv_span, pk.period, pk.pa, pk.pc, pk.pb,
            pk.W, pk.b, pk.A, pk.B, WT, BT, AT,
            pk.rank, pk.mode, pk.lat0, pk.W.shape[0], n_fields, q,
            ph.W, ph.b, HWT, ph.W.shape[0],
        )
        grads = {
            "net.layer0.a": dpa,
            "net.layer0.c": dpc,
            "net.layer0.b": dpb,
        }
        for l in range(pk.W.shape[0]):
            idx = l + 1
            no, ni = int(pk.n_out[l]), int(pk.n_in[l])
            grads[f"net.layer{idx}.W"] = dW[l, :no, :ni]
            grads[f"net.layer{idx}.b"] = db[l, :no]
            if pk.rank[l] > 0:
                r = int(pk.rank[l])
                grads[f"net.layer{idx}.A"] = dA[l, :no, :r]
                grads[f"net.layer{idx}.B"] = dB[l, :r, :ni]
        for l in range(ph.W.shape[0]):
            ni, no = int(ph.n_in[l]), int(ph.n_out[l])
            grads[f"hyper.layer{l}.W"] = dHW[l, :no, :ni]
            grads[f"hyper.layer{l}.b"] = dhb[l, :no]
        flat = np.concatenate([np.ascontiguousarray(grads[n]).ravel() for n in self.names])
        return float(loss), flat


class NumpyTrainer:
    """Vectorized numpy forward+backward of the pre-training loss.

    Same contract as FusedTrainer; this is the pure-numpy twin (and wins on
    hosts without SIMD libm in the jit, since numpy's tanh is vectorized).
    """

    def __init__(self, net, hyper, param_names):
        self.net = net
        self.hyper = hyper
        self.names = list(param_names)

    def loss_and_grad(self, theta, batch, eps_rel, n_fields, q):
        from .net import TWO_PI

        net, hyper = self.net, self.hyper
        tmu, X, target, n_x = batch
        rows = X.shape[0]
        d = X.shape[1]
        inv_den = 1.0 / np.maximum(target * target, eps_rel)
        scale = 1.0 / target.size
        grads = {}

        # hyper-network forward
        Th = [tmu]
        Zh, sgh = [], []
        Lh = len(hyper.dims)
        for l in range(Lh):
            Z = Th[-1] @ theta[f"hyper.layer{l}.W"].T + theta[f"hyper.layer{l}.b"]
            Zh.append(Z)
            if l < Lh - 1:
                sg = _sigmoid_np(Z)
                sgh.append(sg)
                Th.append(Z * sg)
            else:
                Th.append(Z)
        phi = Th[-1]
        phi_rows = np.repeat(phi, n_x, axis=0)

        # periodic embedding
        per = net.layers[0]
        a, c, bb = theta["net.layer0.a"], theta["net.layer0.c"], theta["net.layer0.b"]
        t = (X - net.x_lo) * (1.0 / (net.x_hi - net.x_lo)) * (TWO_PI / per.period)
        args = t[:, None, :] + c[None, :, None]
        cossum = np.cos(args).sum(axis=2)
        sinsum = np.sin(args).sum(axis=2)
        Zp = cossum * a + d * bb
        sgp = _sigmoid_np(Zp)
        H = Zp * sgp

        # affine stack forward
        affine = net.layers[1:]
        L = len(affine)
        Hs, Zs, sgs, us, scs, alphas = [H], [], [], [], [], []
        for l, ly in enumerate(affine):
            idx = l + 1
            W = theta[f"net.layer{idx}.W"]
            Z = Hs[-1] @ W.T + theta[f"net.layer{idx}.b"]
            if ly.rank > 0 and ly.latent is not None:
                j0, j1 = ly.latent
                al = phi_rows[:, j0:j1]
                if ly.mode == "scalar":
                    al = np.broadcast_to(al, (rows, ly.rank))
                u_raw = Hs[-1] @ theta[f"net.layer{idx}.B"].T
                sc = u_raw * al
                Z = Z + sc @ theta[f"net.layer{idx}.A"].T
                us.append(u_raw)
                scs.append(sc)
                alphas.append(al)
            else:
                us.append(None)
                scs.append(None)
                alphas.append(None)
            Zs.append(Z)
            if l < L - 1:
                sg = _sigmoid_np(Z)
                sgs.append(sg)
                Hs.append(Z * sg)
            else:
                sgs.append(None)
                Hs.append(Z)

        pred = Hs[-1]
        diff = pred - target
        loss = float(np.sum(diff * diff * inv_den) * scale)
        dH = 2.0 * diff * inv_den * scale

        dphi_rows = np.zeros((rows, q))
        for l in range(L - 1, -1, -1):
            idx = l + 1
            ly = affine[l]
            if l < L - 1:
                sg = sgs[l]
                dZ = dH * (sg * (1.0 + Zs[l] * (1.0 - sg)))
            else:
                dZ = dH
            grads[f"net.layer{idx}.W"] = dZ.T @ Hs[l]
            grads[f"net.layer{idx}.b"] = dZ.sum(axis=0)
            if ly.rank > 0 and ly.latent is not None:
                A = theta[f"net.layer{idx}.A"]
                B = theta[f"net.layer{idx}.B"]
                cmat = dZ @ A
                grads[f"net.layer{idx}.A"] = dZ.T @ scs[l]
                dal = cmat * us[l]
                j0, j1 = ly.latent
                if ly.mode == "scalar":
                    dphi_rows[:, j0] += dal.sum(axis=1)
                else:
                    dphi_rows[:, j0:j1] += dal
                du = cmat * alphas[l]
                grads[f"net.layer{idx}.B"] = du.T @ Hs[l]
                dH = dZ @ theta[f"net.layer{idx}.W"] + du @ B
            else:
                dH = dZ @ theta[f"net.layer{idx}.W"]

        dZp = dH * (sgp * (1.0 + Zp * (1.0 - sgp)))
        grads["net.layer0.a"] = (dZp * cossum).sum(axis=0)
        grads["net.layer0.c"] = -((dZp * a) * sinsum).sum(axis=0)
        grads["net.layer0.b"] = d * dZp.sum(axis=0)

        # latent gradient per group, then hyper-network backward
        dphi = dphi_rows.reshape(-1, n_x, q).sum(axis=1)
        dT = dphi
        for l in range(Lh - 1, -1, -1):
            if l < Lh - 1:
                sg = sgh[l]
                dZ = dT * (sg * (1.0 + Zh[l] * (1.0 - sg)))
            else:
                dZ = dT
            grads[f"hyper.layer{l}.W"] = dZ.T @ Th[l]
            grads[f"hyper.layer{l}.b"] = dZ.sum(axis=0)
            dT = dZ @ theta[f"hyper.layer{l}.W"]

        flat = np.concatenate([np.ascontiguousarray(grads[n]).ravel() for n in self.names])
        return loss, flat


def _sigmoid_np(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))
