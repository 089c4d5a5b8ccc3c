"""The reduced-model network and its hyper-network.

The field network is an MLP whose first layer embeds the (normalized)
spatial coordinates periodically and whose remaining layers are either
plain affine layers or low-rank-adapted layers

    C(x) = W x + alpha(t, mu) A B x + b          (scalar gain)
    C(x) = W x + A diag(alpha_1..alpha_r) B x + b (per-rank gains)

where the gains are the only quantities that change online.  They are
collected into the latent state phi(t, mu), produced offline by a small
hyper-network h(t, mu).  Forward passes are written against the autodiff
ops, so the same code runs on plain arrays, on the reverse-mode tape and on
forward-mode duals.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .autodiff import ops
from .params import ParamStore

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# normalization


@dataclass
class Normalizer:
    """Input normalization: z-scored (t, mu) channels, spatial map to [0,1]^d."""

    t_mean: float = 0.0
    t_std: float = 1.0
    mu_mean: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mu_std: np.ndarray = field(default_factory=lambda: np.ones(1))
    x_lo: np.ndarray = field(default_factory=lambda: np.zeros(1))
    x_hi: np.ndarray = field(default_factory=lambda: np.ones(1))

    @classmethod
    def fit(cls, t_values, mu_values, x_lo, x_hi):
        t_values = np.asarray(t_values, dtype=np.float64)
        mu_values = np.atleast_2d(np.asarray(mu_values, dtype=np.float64))
        if mu_values.shape[0] == 1 and mu_values.ndim == 2 and mu_values.shape[1] > 1:
            mu_values = mu_values.T  # rows = samples
        t_std = float(np.std(t_values))
        mu_std = np.std(mu_values, axis=0)
        return cls(
            t_mean=float(np.mean(t_values)),
            t_std=t_std if t_std > 1e-12 else 1.0,
            mu_mean=np.mean(mu_values, axis=0),
            mu_std=np.where(mu_std > 1e-12, mu_std, 1.0),
            x_lo=np.asarray(x_lo, dtype=np.float64),
            x_hi=np.asarray(x_hi, dtype=np.float64),
        )

    def normalize_tmu(self, t, mu):
        t = np.asarray(t, dtype=np.float64)
        mu = np.asarray(mu, dtype=np.float64)
        return (t - self.t_mean) / self.t_std, (mu - self.mu_mean) / self.mu_std

    def denormalize_tmu(self, tn, mun):
        return tn * self.t_std + self.t_mean, mun * self.mu_std + self.mu_mean

    def to_dict(self):
        return {
            "t_mean": self.t_mean,
            "t_std": self.t_std,
            "mu_mean": self.mu_mean.tolist(),
            "mu_std": self.mu_std.tolist(),
            "x_lo": self.x_lo.tolist(),
            "x_hi": self.x_hi.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            t_mean=float(d["t_mean"]),
            t_std=float(d["t_std"]),
            mu_mean=np.asarray(d["mu_mean"], dtype=np.float64),
            mu_std=np.asarray(d["mu_std"], dtype=np.float64),
            x_lo=np.asarray(d["x_lo"], dtype=np.float64),
            x_hi=np.asarray(d["x_hi"], dtype=np.float64),
        )


# ---------------------------------------------------------------------------
# layer descriptors


@dataclass
class PeriodicLayer:
    """Periodic spatial embedding: unit i maps x to
    sum_k (a_i cos(x_k * 2 pi / period + c_i) + b_i)."""

    width: int
    in_dim: int
    period: float = 1.0


@dataclass
class CoLoRALayer:
    n_out: int
    n_in: int
    rank: int = 0  # 0 = plain affine layer
    mode: str = "diag"  # "scalar" | "diag"
    latent: Optional[tuple] = None  # (j0, j1) slice into phi

    def __post_init__(self):
        if self.rank > min(self.n_out, self.n_in):
            raise ValueError("rank exceeds min(n_out, n_in)")
        if self.latent is not None:
            j0, j1 = self.latent
            need = 1 if self.mode == "scalar" else self.rank
            if j1 - j0 != need:
                raise ValueError("latent slice width does not match mode")


Activation = Union[str, Callable]


@dataclass
class ColoraNet:
    layers: list
    acts: list  # activation applied after each layer ("identity" on the last)
    q: int
    spatial_dim: int
    n_fields: int
    x_lo: np.ndarray
    x_hi: np.ndarray


@dataclass
class HyperNet:
    dims: list  # [(n_in, n_out), ...]
    q: int
    mu_dim: int = 1


# ---------------------------------------------------------------------------
# architecture construction


@dataclass
class ArchConfig:
    spatial_dim: int
    q: int
    n_fields: int = 1
    depth: int = 8
    width: int = 25
    rank: int = 3
    latent_mode: str = "diag"
    mu_dim: int = 1
    hyper_depth: int = 3
    hyper_width: int = 15

    def to_dict(self):
        return {
            "spatial_dim": self.spatial_dim,
            "q": self.q,
            "n_fields": self.n_fields,
            "depth": self.depth,
            "width": self.width,
            "rank": self.rank,
            "latent_mode": self.latent_mode,
            "mu_dim": self.mu_dim,
            "hyper_depth": self.hyper_depth,
            "hyper_width": self.hyper_width,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def latent_layout(cfg: ArchConfig):
    """Latent entries per assignable layer, input-closest layers first.

    scalar mode: one entry per carrying layer (rank = cfg.rank each);
    diag mode: up to cfg.rank entries per layer, the layer's rank equal to
    its entry count.  Raises if q does not fit the architecture.
    """
    n_assignable = cfg.depth - 1  # everything after the periodic embed
    counts = []
    remaining = cfg.q
    for _ in range(n_assignable):
        if remaining <= 0:
            counts.append(0)
        elif cfg.latent_mode == "scalar":
            counts.append(1)
            remaining -= 1
        else:
            take = min(cfg.rank, remaining)
            counts.append(take)
            remaining -= take
    if remaining > 0:
        raise ValueError(
            f"q={cfg.q} does not fit: {n_assignable} layers, mode={cfg.latent_mode}, "
            f"rank={cfg.rank}"
        )
    return counts


def build_model(cfg: ArchConfig, x_lo=None, x_hi=None):
    """ColoraNet + HyperNet skeletons for an architecture config."""
    if x_lo is None:
        x_lo = np.zeros(cfg.spatial_dim)
    if x_hi is None:
        x_hi = np.ones(cfg.spatial_dim)
    counts = latent_layout(cfg)
    layers = [PeriodicLayer(cfg.width, cfg.spatial_dim)]
    acts = ["swish"]
    widths = [cfg.width] * (cfg.depth - 2) + [cfg.n_fields]
    n_in = cfg.width
    j0 = 0
    for i, n_out in enumerate(widths):
        cnt = counts[i]
        if cnt == 0:
            layers.append(CoLoRALayer(n_out, n_in))
        elif cfg.latent_mode == "scalar":
            layers.append(
                CoLoRALayer(n_out, n_in, rank=cfg.rank, mode="scalar", latent=(j0, j0 + 1))
            )
            j0 += 1
        else:
            layers.append(
                CoLoRALayer(n_out, n_in, rank=cnt, mode="diag", latent=(j0, j0 + cnt))
            )
            j0 += cnt
        acts.append("swish" if i < len(widths) - 1 else "identity")
        n_in = n_out
    net = ColoraNet(
        layers=layers,
        acts=acts,
        q=cfg.q,
        spatial_dim=cfg.spatial_dim,
        n_fields=cfg.n_fields,
        x_lo=np.asarray(x_lo, dtype=np.float64),
        x_hi=np.asarray(x_hi, dtype=np.float64),
    )
    hdims = []
    n_in = 1 + cfg.mu_dim
    for i in range(cfg.hyper_depth):
        n_out = cfg.q if i == cfg.hyper_depth - 1 else cfg.hyper_width
        hdims.append((n_in, n_out))
        n_in = n_out
    hyper = HyperNet(dims=hdims, q=cfg.q, mu_dim=cfg.mu_dim)
    return net, hyper


def param_names(net: ColoraNet, hyper: Optional[HyperNet] = None):
    names = []
    for i, layer in enumerate(net.layers):
        if isinstance(layer, PeriodicLayer):
            names += [f"net.layer{i}.a", f"net.layer{i}.c", f"net.layer{i}.b"]
        else:
            names += [f"net.layer{i}.W", f"net.layer{i}.b"]
            if layer.rank > 0:
                names += [f"net.layer{i}.A", f"net.layer{i}.B"]
    if hyper is not None:
        for i in range(len(hyper.dims)):
            names += [f"hyper.layer{i}.W", f"hyper.layer{i}.b"]
    return names


def init_params(net: ColoraNet, hyper: Optional[HyperNet], seed: int) -> ParamStore:
    """Gaussian fan-in init; B = 0 so the net starts independent of phi.

    Periodic-layer phases are uniform in (-pi, pi): with all phases equal
    the embedding units would be collinear.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for i, layer in enumerate(net.layers):
        if isinstance(layer, PeriodicLayer):
            arrays[f"net.layer{i}.a"] = rng.normal(
                0.0, 1.0 / math.sqrt(layer.in_dim), layer.width
            )
            arrays[f"net.layer{i}.c"] = rng.uniform(-math.pi, math.pi, layer.width)
            arrays[f"net.layer{i}.b"] = np.zeros(layer.width)
        else:
            arrays[f"net.layer{i}.W"] = rng.normal(
                0.0, 1.0 / math.sqrt(layer.n_in), (layer.n_out, layer.n_in)
            )
            arrays[f"net.layer{i}.b"] = np.zeros(layer.n_out)
            if layer.rank > 0:
                arrays[f"net.layer{i}.A"] = rng.normal(
                    0.0, layer.n_in**-0.25, (layer.n_out, layer.rank)
                )
                arrays[f"net.layer{i}.B"] = np.zeros((layer.rank, layer.n_in))
    if hyper is not None:
        for i, (n_in, n_out) in enumerate(hyper.dims):
            arrays[f"hyper.layer{i}.W"] = rng.normal(
                0.0, 1.0 / math.sqrt(n_in), (n_out, n_in)
            )
            arrays[f"hyper.layer{i}.b"] = np.zeros(n_out)
    names = param_names(net, hyper)
    return ParamStore(names, [arrays[n] for n in names])


# ---------------------------------------------------------------------------
# forward passes


def _act(name, h):
    if name == "identity" or name is None:
        return h
    if name == "swish":
        return ops.swish(h)
    if callable(name):
        return name(h)
    raise ValueError(f"unknown activation {name!r}")


def periodic_forward(layer: PeriodicLayer, x, a, c, b):
    """x: (n, d) normalized coordinates -> (n, width) features."""
    n = ops.value_of(x).shape[0]
    t = x * (TWO_PI / layer.period)
    arg = ops.reshape(t, (n, 1, layer.in_dim)) + ops.reshape(c, (layer.width, 1))
    summed = ops.sum(ops.cos(arg), axis=-1)  # (n, width)
    return summed * a + float(layer.in_dim) * b


def colora_forward(layer: CoLoRALayer, h, W, b, A=None, B=None, alpha=None):
    """One low-rank-adapted affine layer on a row batch h (n, n_in).

    alpha is None (plain layer), a scalar/length-r vector, or a per-row
    (n, 1)/(n, r) block when each row carries its own gains.
    """
    z = h @ ops_transpose(W) + b
    if layer.rank > 0 and alpha is not None:
        u = h @ ops_transpose(B)  # (n, r)
        if layer.mode == "scalar":
            z = z + (u @ ops_transpose(A)) * alpha
        else:
            z = z + (u * alpha) @ ops_transpose(A)
    return z


def ops_transpose(M):
    """Transpose a 2-D operand in any differentiation mode."""
    from .autodiff.dual import Dual2
    from .autodiff.tape import Var

    if isinstance(M, Var):
        x = M.value
        return M.tape._push(x.T.copy(), (M.idx,), lambda g: [g.T.copy()])
    if isinstance(M, Dual2):
        d2 = None if M.d2 is None else np.swapaxes(M.d2, -1, -2)
        return Dual2(np.swapaxes(M.val, -1, -2), np.swapaxes(M.d1, -1, -2), d2)
    return np.asarray(M, dtype=np.float64).T


def net_forward(net: ColoraNet, theta, phi, x):
    """Forward pass: x (n, d) raw coordinates, phi (q,) or per-row (n, q).

    theta maps parameter names to arrays / tape Vars.  Any of x, phi,
    theta-values may be Dual2 or Var; the ops layer dispatches.
    """
    span = net.x_hi - net.x_lo
    h = (x - net.x_lo) * (1.0 / span)
    for i, layer in enumerate(net.layers):
        if isinstance(layer, PeriodicLayer):
            h = periodic_forward(
                layer,
                h,
                theta[f"net.layer{i}.a"],
                theta[f"net.layer{i}.c"],
                theta[f"net.layer{i}.b"],
            )
        else:
            alpha = None
            A = B = None
            if layer.rank > 0 and layer.latent is not None:
                j0, j1 = layer.latent
                alpha = ops.slice_last(phi, j0, j1)
                A = theta[f"net.layer{i}.A"]
                B = theta[f"net.layer{i}.B"]
            h = colora_forward(
                layer, h, theta[f"net.layer{i}.W"], theta[f"net.layer{i}.b"], A, B, alpha
            )
        h = _act(net.acts[i], h)
    return h


def net_eval(net: ColoraNet, theta, phi, x):
    """Plain-array evaluation: returns (n, n_fields) float64."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.spatial_dim:
        x = x.reshape(-1, net.spatial_dim)
    out = net_forward(net, theta, np.asarray(phi, dtype=np.float64), x)
    return ops.value_of(out)


def hyper_forward(hyper: HyperNet, psi, tmu):
    """tmu: (g, 1 + mu_dim) already-normalized inputs -> (g, q)."""
    h = tmu
    last = len(hyper.dims) - 1
    for i in range(len(hyper.dims)):
        h = h @ ops_transpose(psi[f"hyper.layer{i}.W"]) + psi[f"hyper.layer{i}.b"]
        if i < last:
            h = ops.swish(h)
    return h


def hyper_eval(hyper: HyperNet, norm: Normalizer, t, mu, psi):
    """Latent state phi(t, mu) for scalar t (or an array of times)."""
    t = np.asarray(t, dtype=np.float64)
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    scalar = t.ndim == 0
    times = np.atleast_1d(t)
    tn, mun = norm.normalize_tmu(times, mu)
    inp = np.concatenate(
        [tn[:, None], np.broadcast_to(mun, (times.size, mu.size))], axis=1
    )
    out = ops.value_of(hyper_forward(hyper, psi, inp))
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# exact advection representation


def build_advection_net(u0):
    """Three-layer construction reproducing u0(x - t*mu) exactly.

    u0 must be written against the autodiff ops (it is used as an
    activation).  Returns (net, phi_rule) with phi_rule(t, mu) = [-t*mu].
    """
    layers = [
        CoLoRALayer(2, 1),  # x -> [x, 1]
        CoLoRALayer(1, 2, rank=1, mode="scalar", latent=(0, 1)),  # x - t*mu
        CoLoRALayer(1, 1),
        CoLoRALayer(1, 1),  # output weight c = 1
    ]
    acts = ["identity", u0, "identity", "identity"]
    net = ColoraNet(
        layers=layers,
        acts=acts,
        q=1,
        spatial_dim=1,
        n_fields=1,
        x_lo=np.zeros(1),
        x_hi=np.ones(1),
    )
    arrays = {
        "net.layer0.W": np.array([[1.0], [0.0]]),
        "net.layer0.b": np.array([0.0, 1.0]),
        "net.layer1.W": np.array([[1.0, 0.0]]),
        "net.layer1.b": np.array([0.0]),
        "net.layer1.A": np.array([[1.0]]),
        "net.layer1.B": np.array([[0.0, 1.0]]),
        "net.layer2.W": np.array([[1.0]]),
        "net.layer2.b": np.array([0.0]),
        "net.layer3.W": np.array([[1.0]]),
        "net.layer3.b": np.array([0.0]),
    }
    names = param_names(net)
    theta = ParamStore(names, [arrays[n] for n in names])

    def phi_rule(t, mu):
        return np.array([-(t * mu)])

    return net, theta, phi_rule
