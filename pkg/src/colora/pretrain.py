"""Offline optimization of the field network and its hyper-network.

The loss is the mean relative error over sampled (trajectory, time, point)
tuples; gradients with respect to all offline parameters come from one
reverse sweep; Adam with cosine-decayed learning rate does the update.
Minibatch sampling uses a counter-based RNG keyed on (seed, step), so a
resumed run continues the exact stream of a fresh one.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import TrainingDiverged
from .net import (
    ArchConfig,
    Normalizer,
    build_model,
    hyper_forward,
    net_forward,
)
from .autodiff import ops
from .autodiff.tape import Tape
from .params import ParamStore
from .pde.dataset import SnapshotSet

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    iterations: int
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    schedule: str = "cosine"  # "cosine" | "constant"
    n_x: int = 2048
    n_t: int = 16
    batch_trajectories: Optional[int] = None  # None = all
    seed: int = 0
    eps_rel_scale: float = 1e-8  # denominator floor = scale * max|u|^2 per field
    stop_at_loss: Optional[float] = None
    log_every: int = 500

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "schedule": self.schedule,
            "n_x": self.n_x,
            "n_t": self.n_t,
            "batch_trajectories": self.batch_trajectories,
            "seed": self.seed,
            "eps_rel_scale": self.eps_rel_scale,
            "stop_at_loss": self.stop_at_loss,
            "log_every": self.log_every,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Checkpoint:
    problem: str
    arch: ArchConfig
    params: ParamStore
    normalizer: Normalizer
    train_mus: np.ndarray
    eps_rel: np.ndarray  # per-field denominator floor
    loss_history: list = field(default_factory=list)  # rows (step, lr, loss)
    adam_m: Optional[np.ndarray] = None
    adam_v: Optional[np.ndarray] = None
    adam_steps: int = 0
    seed: int = 0
    field_indices: Optional[tuple] = None  # dataset fields the model predicts

    def model(self):
        return build_model(self.arch, self.normalizer.x_lo, self.normalizer.x_hi)


def cosine_lr(lr0, step, total):
    if total <= 0:
        return lr0
    return lr0 * 0.5 * (1.0 + np.cos(np.pi * step / total))


def adam_step(params, grads, state, step_index, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update, in place on the flat parameter vector.

    state is (m, v); step_index is 1-based for bias correction.  Returns
    (params, state) for call-site convenience.
    """
    m, v = state
    if params.shape != grads.shape or m.shape != params.shape or v.shape != params.shape:
        raise ValueError("parameter/gradient/state shape mismatch")
    kernels.adam_update(params, grads, m, v, step_index, lr, beta1, beta2, eps)
    return params, (m, v)


def relative_loss_value(pred, target, den):
    """Mean over samples and fields of |target - pred|^2 / den."""
    diff = pred - target
    return float(np.mean(diff * diff / den))


def _eps_rel_floor(snapshots: SnapshotSet, scale):
    maxes = np.stack([np.abs(tr.fields).reshape(tr.fields.shape[0], tr.n_fields, -1).max(axis=(0, 2)) for tr in snapshots.trajectories])
    return scale * maxes.max(axis=0) ** 2


def relative_loss(net, hyper, theta, batch, eps_rel):
    """Traced relative-error loss for one minibatch.

    theta maps parameter names (field net and hyper-net alike) to tape
    Vars; batch carries constants (normalized inputs, targets).  Returns
    the scalar loss Var.
    """
    tmu, X, target, n_x = batch
    den = np.maximum(target * target, eps_rel)
    phi = hyper_forward(hyper, theta, tmu)
    phi_rows = ops.repeat_rows(phi, n_x)
    pred = net_forward(net, theta, phi_rows, X)
    diff = pred - target
    ratio = diff * diff * (1.0 / den)
    return ops.sum(ratio) * (1.0 / ratio.value.size)


def _sample_batch(snapshots, cache, cfg, step, mu_dim, normalizer):
    rng = np.random.default_rng(np.random.Philox(key=np.array([cfg.seed, step], dtype=np.uint64)))
    m = len(snapshots)
    if cfg.batch_trajectories is None or cfg.batch_trajectories >= m:
        sel = np.arange(m)
    else:
        sel = np.sort(rng.choice(m, size=cfg.batch_trajectories, replace=False))
    t_grid = snapshots.t_grid
    points, flat_fields = cache
    P = points.shape[0]
    tmu_list = []
    X_list = []
    tgt_list = []
    for i in sel:
        tau = rng.integers(0, t_grid.size, cfg.n_t)
        pts = rng.integers(0, P, cfg.n_x)
        tn, mun = normalizer.normalize_tmu(t_grid[tau], np.atleast_1d(snapshots.trajectories[i].mu))
        tmu_list.append(np.concatenate([tn[:, None], np.broadcast_to(mun, (cfg.n_t, mu_dim))], axis=1))
        X_list.append(np.broadcast_to(points[pts], (cfg.n_t, cfg.n_x, points.shape[1])).reshape(-1, points.shape[1]))
        tgt_list.append(flat_fields[i][tau][:, :, pts].transpose(0, 2, 1).reshape(-1, flat_fields[i].shape[1]))
    tmu = np.concatenate(tmu_list, axis=0)
    X = np.ascontiguousarray(np.concatenate(X_list, axis=0))
    target = np.concatenate(tgt_list, axis=0)
    return tmu, X, target, cfg.n_x


def pretrain(
    snapshots: SnapshotSet,
    arch: ArchConfig,
    cfg: TrainConfig,
    checkpoint: Optional[Checkpoint] = None,
    field_indices=None,
) -> Checkpoint:
    """Optimize (theta, psi) against the snapshot set.

    Passing a previous checkpoint resumes: the optimizer state and the
    (seed, step)-keyed sample stream continue where they left off, so a
    resumed run is bit-identical to an uninterrupted one of the same total
    length.
    """
    if field_indices is not None:
        snapshots = snapshots.select_fields(field_indices)
    if len(snapshots) == 0:
        raise ValueError("empty snapshot set")
    if snapshots.n_fields != arch.n_fields:
        raise ValueError(
            f"architecture predicts {arch.n_fields} fields, dataset has {snapshots.n_fields}"
        )
    grid = snapshots.grid
    if checkpoint is None:
        normalizer = Normalizer.fit(
            snapshots.t_grid, snapshots.mus[:, None], np.array(grid.lo), np.array(grid.hi)
        )
        net, hyper = build_model(arch, normalizer.x_lo, normalizer.x_hi)
        from .net import init_params

        params = init_params(net, hyper, cfg.seed)
        flat = params.flat()
        adam_m = np.zeros_like(flat)
        adam_v = np.zeros_like(flat)
        start_step = 0
        loss_history = []
        eps_rel = _eps_rel_floor(snapshots, cfg.eps_rel_scale)
    else:
        normalizer = checkpoint.normalizer
        net, hyper = checkpoint.model()
        params = checkpoint.params
        flat = params.flat()
        adam_m = checkpoint.adam_m.copy()
        adam_v = checkpoint.adam_v.copy()
        start_step = checkpoint.adam_steps
        loss_history = list(checkpoint.loss_history)
        eps_rel = checkpoint.eps_rel

    points = grid.points()
    flat_fields = [
        tr.fields.reshape(tr.fields.shape[0], tr.n_fields, -1) for tr in snapshots.trajectories
    ]
    cache = (points, flat_fields)
    mu_dim = arch.mu_dim

    from . import fastpath

    trainer = fastpath.make_trainer(net, hyper, params.names)

    tape = Tape()
    last_good = flat.copy()
    step = start_step
    for step in range(start_step, cfg.iterations):
        lr = cosine_lr(cfg.lr, step, cfg.iterations) if cfg.schedule == "cosine" else cfg.lr
        batch = _sample_batch(snapshots, cache, cfg, step, mu_dim, normalizer)
        params_step = params.from_flat(flat)
        if trainer is not None:
            loss, grad_flat = trainer.loss_and_grad(
                params_step, batch, eps_rel, arch.n_fields, arch.q
            )
        else:
            tape.reset()
            theta = {name: tape.leaf(arr) for name, arr in params_step.items()}
            loss_var = relative_loss(net, hyper, theta, batch, eps_rel)
            loss = float(loss_var.value)
        if not np.isfinite(loss):
            ck = _make_checkpoint(
                snapshots, arch, params.from_flat(last_good), normalizer, eps_rel,
                loss_history, adam_m, adam_v, step, cfg, field_indices,
            )
            raise TrainingDiverged(f"non-finite loss at step {step}", ck)
        if trainer is None:
            tape.backward(loss_var)
            grad_flat = np.concatenate(
                [theta[name].grad.ravel() for name in params_step.names]
            )
        last_good = flat.copy()
        adam_step(flat, grad_flat, (adam_m, adam_v), step + 1, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        loss_history.append((step, lr, loss))
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d lr %.3e loss %.6e", step, lr, loss)
        if cfg.stop_at_loss is not None and loss < cfg.stop_at_loss:
            step += 1
            break
    else:
        step = cfg.iterations

    return _make_checkpoint(
        snapshots, arch, params.from_flat(flat), normalizer, eps_rel,
        loss_history, adam_m, adam_v, step, cfg, field_indices,
    )


def _make_checkpoint(snapshots, arch, params, normalizer, eps_rel, loss_history,
                     adam_m, adam_v, steps, cfg, field_indices):
    return Checkpoint(
        problem=snapshots.problem,
        arch=arch,
        params=params,
        normalizer=normalizer,
        train_mus=snapshots.mus.copy(),
        eps_rel=np.asarray(eps_rel, dtype=np.float64),
        loss_history=loss_history,
        adam_m=adam_m.copy(),
        adam_v=adam_v.copy(),
        adam_steps=steps,
        seed=cfg.seed,
        field_indices=tuple(field_indices) if field_indices is not None else None,
    )


def predict_frame(checkpoint: Checkpoint, net, hyper, t, mu, points, chunk=65536):
    """Field values at one (t, mu) over the given points, chunked."""
    from .net import hyper_eval

    phi = hyper_eval(hyper, checkpoint.normalizer, t, mu, checkpoint.params)
    outs = []
    for start in range(0, points.shape[0], chunk):
        xb = points[start : start + chunk]
        outs.append(ops.value_of(net_forward(net, checkpoint.params, phi, xb)))
    return np.concatenate(outs, axis=0)


def mean_relative_error(checkpoint: Checkpoint, snapshots: SnapshotSet) -> float:
    """The reported error metric: the loss formula over the full set."""
    if checkpoint.field_indices is not None and snapshots.n_fields != checkpoint.arch.n_fields:
        snapshots = snapshots.select_fields(checkpoint.field_indices)
    net, hyper = checkpoint.model()
    points = snapshots.grid.points()
    total = 0.0
    count = 0
    for tr in snapshots.trajectories:
        flat_fields = tr.fields.reshape(tr.fields.shape[0], tr.n_fields, -1)
        for k, t in enumerate(tr.t_grid):
            pred = predict_frame(checkpoint, net, hyper, t, tr.mu, points)
            target = flat_fields[k].T  # (P, F)
            den = np.maximum(target * target, checkpoint.eps_rel)
            total += float(np.sum((pred - target) ** 2 / den))
            count += target.size
    return total / count
