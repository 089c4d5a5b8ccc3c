"""Flat array packing of a standard network for the fused kernels.

The fused numba kernels take plain arrays, not layer objects.  A standard
network (periodic embed, then affine/low-rank layers with swish in between
and a linear output) is packed into padded 3-D stacks with per-layer
dimension arrays.  Nets with custom activations fall back to the generic
ops-based path.
"""

from dataclasses import dataclass

import numpy as np


def packable(net):
    from ..net import CoLoRALayer, PeriodicLayer

    if not net.layers or not isinstance(net.layers[0], PeriodicLayer):
        return False
    if net.acts[0] != "swish" or net.acts[-1] != "identity":
        return False
    for layer, act in zip(net.layers[1:], net.acts[1:]):
        if not isinstance(layer, CoLoRALayer):
            return False
        if act not in ("swish", "identity"):
            return False
    return all(a == "swish" for a in net.acts[1:-1])


@dataclass
class PackedNet:
    lo: np.ndarray
    inv_span: np.ndarray
    period: float
    pa: np.ndarray
    pc: np.ndarray
    pb: np.ndarray
    W: np.ndarray  # (L, wmax, wmax)
    b: np.ndarray  # (L, wmax)
    A: np.ndarray  # (L, wmax, rmax)
    B: np.ndarray  # (L, rmax, wmax)
    n_in: np.ndarray
    n_out: np.ndarray
    rank: np.ndarray
    mode: np.ndarray  # 0 none, 1 scalar, 2 diag
    lat0: np.ndarray
    q: int
    n_fields: int


def pack_net(net, theta) -> PackedNet:
    """Copy the network weights into padded stacks (float64)."""
    from ..net import CoLoRALayer, PeriodicLayer

    per = net.layers[0]
    assert isinstance(per, PeriodicLayer)
    affine = [ly for ly in net.layers[1:]]
    L = len(affine)
    wmax = max(max(ly.n_in, ly.n_out) for ly in affine)
    rmax = max(1, max(ly.rank for ly in affine))
    W = np.zeros((L, wmax, wmax))
    b = np.zeros((L, wmax))
    A = np.zeros((L, wmax, rmax))
    B = np.zeros((L, rmax, wmax))
    n_in = np.zeros(L, dtype=np.int64)
    n_out = np.zeros(L, dtype=np.int64)
    rank = np.zeros(L, dtype=np.int64)
    mode = np.zeros(L, dtype=np.int64)
    lat0 = np.zeros(L, dtype=np.int64)
    for i, ly in enumerate(affine):
        assert isinstance(ly, CoLoRALayer)
        idx = i + 1
        Wi = np.asarray(theta[f"net.layer{idx}.W"], dtype=np.float64)
        bi = np.asarray(theta[f"net.layer{idx}.b"], dtype=np.float64)
        n_out[i], n_in[i] = Wi.shape
        W[i, : Wi.shape[0], : Wi.shape[1]] = Wi
        b[i, : bi.shape[0]] = bi
        if ly.rank > 0 and ly.latent is not None:
            Ai = np.asarray(theta[f"net.layer{idx}.A"], dtype=np.float64)
            Bi = np.asarray(theta[f"net.layer{idx}.B"], dtype=np.float64)
            A[i, : Ai.shape[0], : Ai.shape[1]] = Ai
            B[i, : Bi.shape[0], : Bi.shape[1]] = Bi
            rank[i] = ly.rank
            mode[i] = 1 if ly.mode == "scalar" else 2
            lat0[i] = ly.latent[0]
    span = net.x_hi - net.x_lo
    return PackedNet(
        lo=np.asarray(net.x_lo, dtype=np.float64),
        inv_span=1.0 / np.asarray(span, dtype=np.float64),
        period=float(per.period),
        pa=np.asarray(theta["net.layer0.a"], dtype=np.float64),
        pc=np.asarray(theta["net.layer0.c"], dtype=np.float64),
        pb=np.asarray(theta["net.layer0.b"], dtype=np.float64),
        W=W,
        b=b,
        A=A,
        B=B,
        n_in=n_in,
        n_out=n_out,
        rank=rank,
        mode=mode,
        lat0=lat0,
        q=net.q,
        n_fields=net.n_fields,
    )


@dataclass
class PackedHyper:
    W: np.ndarray  # (Lh, hmax, hmax)
    b: np.ndarray
    n_in: np.ndarray
    n_out: np.ndarray


def pack_hyper(hyper, theta) -> PackedHyper:
    L = len(hyper.dims)
    hmax = max(max(i, o) for i, o in hyper.dims)
    W = np.zeros((L, hmax, hmax))
    b = np.zeros((L, hmax))
    n_in = np.zeros(L, dtype=np.int64)
    n_out = np.zeros(L, dtype=np.int64)
    for i, (ni, no) in enumerate(hyper.dims):
        Wi = np.asarray(theta[f"hyper.layer{i}.W"], dtype=np.float64)
        bi = np.asarray(theta[f"hyper.layer{i}.b"], dtype=np.float64)
        W[i, :no, :ni] = Wi
        b[i, :no] = bi
        n_in[i], n_out[i] = ni, no
    return PackedHyper(W=W, b=b, n_in=n_in, n_out=n_out)
