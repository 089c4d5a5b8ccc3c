"""Binary file formats.

SNP1 (one trajectory per file) and CKPT1 (trained checkpoint) share the
same envelope: a 4-byte magic, a little-endian uint32 header length, a
UTF-8 JSON header, then a contiguous little-endian float64 payload.  All
writes go through a temp-file rename so readers never observe a partial
file, and identical inputs produce byte-identical files.
"""

import json
import os
import struct
import tempfile

import numpy as np

from .errors import InvalidInputError
from .net import ArchConfig, Normalizer
from .params import ParamStore
from .pde.dataset import SnapshotSet, Trajectory
from .pde.grid import make_grid
from .pde.problems import get_problem
from .pretrain import Checkpoint

SNP_MAGIC = b"SNP1"
CKPT_MAGIC = b"CKP1"


def _dump_header(header):
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _atomic_write(path, blobs):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            for b in blobs:
                fh.write(b)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_envelope(path, magic):
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise InvalidInputError(f"{path}: bad magic {got!r}, expected {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return header, payload


# ---------------------------------------------------------------------------
# SNP1 trajectories


def write_snp1(path, problem_name, trajectory: Trajectory, field_names):
    fields = np.ascontiguousarray(trajectory.fields, dtype="<f8")
    header = {
        "problem": problem_name,
        "mu": float(trajectory.mu),
        "t_grid": [float(t) for t in trajectory.t_grid],
        "x_shape": list(fields.shape[2:]),
        "fields": list(field_names),
        "dtype": "f64",
        "layout": "t,field,row-major-x",
    }
    hb = _dump_header(header)
    _atomic_write(path, [SNP_MAGIC, struct.pack("<I", len(hb)), hb, fields.tobytes()])


def read_snp1(path):
    header, payload = _read_envelope(path, SNP_MAGIC)
    shape = (len(header["t_grid"]), len(header["fields"])) + tuple(header["x_shape"])
    expect = int(np.prod(shape))
    if payload.size != expect:
        raise InvalidInputError(
            f"{path}: payload holds {payload.size} values, header declares {expect}"
        )
    traj = Trajectory(
        float(header["mu"]), np.asarray(header["t_grid"]), payload.reshape(shape).copy()
    )
    return header, traj


def read_snapshot_set(paths, grid=None) -> SnapshotSet:
    headers = []
    trajs = []
    for p in sorted(paths):
        h, tr = read_snp1(p)
        headers.append(h)
        trajs.append(tr)
    if not trajs:
        raise InvalidInputError("no trajectory files given")
    name = headers[0]["problem"]
    if grid is None:
        prob = get_problem(name)
        grid = make_grid(prob.lo, prob.hi, headers[0]["x_shape"], periodic=True)
    return SnapshotSet(name, grid, trajs)


# ---------------------------------------------------------------------------
# CKPT1 checkpoints


def write_ckpt1(path, ck: Checkpoint):
    names = list(ck.params.names)
    header = {
        "problem": ck.problem,
        "arch": ck.arch.to_dict(),
        "normalizer": ck.normalizer.to_dict(),
        "params": [{"name": n, "shape": list(ck.params[n].shape)} for n in names],
        "train_mus": [float(m) for m in ck.train_mus],
        "eps_rel": [float(e) for e in np.atleast_1d(ck.eps_rel)],
        "loss_history": [[int(s), float(lr), float(ls)] for s, lr, ls in ck.loss_history],
        "optimizer": {"steps": int(ck.adam_steps), "arrays": ["adam_m", "adam_v"]},
        "seed": int(ck.seed),
        "field_indices": list(ck.field_indices) if ck.field_indices is not None else None,
    }
    hb = _dump_header(header)
    blobs = [CKPT_MAGIC, struct.pack("<I", len(hb)), hb]
    for n in names:
        blobs.append(np.ascontiguousarray(ck.params[n], dtype="<f8").tobytes())
    nparams = ck.params.size
    m = ck.adam_m if ck.adam_m is not None else np.zeros(nparams)
    v = ck.adam_v if ck.adam_v is not None else np.zeros(nparams)
    blobs.append(np.ascontiguousarray(m, dtype="<f8").tobytes())
    blobs.append(np.ascontiguousarray(v, dtype="<f8").tobytes())
    _atomic_write(path, blobs)


def read_ckpt1(path) -> Checkpoint:
    header, payload = _read_envelope(path, CKPT_MAGIC)
    names = []
    arrays = []
    pos = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        arrays.append(payload[pos : pos + size].reshape(shape).copy())
        names.append(entry["name"])
        pos += size
    params = ParamStore(names, arrays)
    n = params.size
    adam_m = payload[pos : pos + n].copy()
    adam_v = payload[pos + n : pos + 2 * n].copy()
    if pos + 2 * n != payload.size:
        raise InvalidInputError(f"{path}: payload length does not match header")
    fi = header.get("field_indices")
    return Checkpoint(
        problem=header["problem"],
        arch=ArchConfig.from_dict(header["arch"]),
        params=params,
        normalizer=Normalizer.from_dict(header["normalizer"]),
        train_mus=np.asarray(header["train_mus"], dtype=np.float64),
        eps_rel=np.asarray(header["eps_rel"], dtype=np.float64),
        loss_history=[(int(s), float(lr), float(ls)) for s, lr, ls in header["loss_history"]],
        adam_m=adam_m,
        adam_v=adam_v,
        adam_steps=int(header["optimizer"]["steps"]),
        seed=int(header["seed"]),
        field_indices=tuple(fi) if fi is not None else None,
    )
