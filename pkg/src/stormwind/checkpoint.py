"""Versioned binary checkpoint container.

Layout::

    b"STORMCKP" | u32 version | u64 header length | JSON header | raw arrays

The header is UTF-8 JSON with sorted keys. It carries architecture
descriptors, training state, rng state and an array table of
``(name, dtype, shape, offset, nbytes)`` entries. Offsets are relative to
the first byte after the header; arrays are stored little-endian and
C-contiguous. Nothing in the file depends on time or on the machine, so
saving the same state twice yields identical bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .nets import build_model, count_parameters, flat_parameters, load_flat_parameters
from .training import TrainState

MAGIC = b"STORMCKP"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


@dataclass
class Checkpoint:
    archs: dict
    params: dict
    ema: dict
    state: TrainState | None = None
    meta: dict = field(default_factory=dict)

    def model(self, name: str, use_ema: bool = True, dtype=torch.float32):
        """Instantiate model ``name`` with EMA (default) or raw weights."""
        if name not in self.archs:
            raise CheckpointError(f"checkpoint has no model {name!r} (has {sorted(self.archs)})")
        m = build_model(self.archs[name]).to(dtype)
        load_flat_parameters(m, (self.ema if use_ema else self.params)[name])
        m.eval()
        return m


def _tensor_to_array(t) -> np.ndarray:
    if isinstance(t, torch.Tensor):
        return t.detach().cpu().numpy()
    return np.asarray(t)


def _split_optimizer(opt_state: dict | None, arrays: dict) -> dict | None:
    if opt_state is None:
        return None
    per_param = {}
    for idx, entry in sorted(opt_state["state"].items()):
        keys = []
        for key, val in sorted(entry.items()):
            arrays[f"optim/{idx}/{key}"] = _tensor_to_array(val)
            keys.append(key)
        per_param[str(idx)] = keys
    groups = [{k: (list(v) if isinstance(v, tuple) else v) for k, v in g.items()} for g in opt_state["param_groups"]]
    return {"param_groups": groups, "state": per_param}


def _join_optimizer(desc: dict | None, arrays: dict) -> dict | None:
    if desc is None:
        return None
    state = {}
    for idx, keys in desc["state"].items():
        state[int(idx)] = {k: torch.from_numpy(arrays[f"optim/{idx}/{k}"].copy()) for k in keys}
    groups = [{k: (tuple(v) if k == "betas" else v) for k, v in g.items()} for g in desc["param_groups"]]
    return {"state": state, "param_groups": groups}


def save_checkpoint(path, archs: dict, params: dict, ema: dict, state: TrainState | None = None, meta=None) -> None:
    """Write a checkpoint; ``params``/``ema`` map model name to flat vectors."""
    if set(archs) != set(params) or set(archs) != set(ema):
        raise CheckpointError("archs, params and ema must name the same models")
    arrays: dict[str, np.ndarray] = {}
    for name in sorted(archs):
        arrays[f"params/{name}"] = np.asarray(params[name])
        arrays[f"ema/{name}"] = np.asarray(ema[name])
    header = {
        "archs": archs,
        "meta": meta or {},
        "state": None,
    }
    if state is not None:
        header["state"] = {
            "phase": state.phase,
            "epoch": state.epoch,
            "best": state.best,
            "bad_epochs": state.bad_epochs,
            "done": state.done,
            "ema_updates": state.ema_updates,
            "history": state.history,
            "rng_state": state.rng_state,
            "optimizer": _split_optimizer(state.optimizer, arrays),
        }
        for name, vec in state.ema.items():
            if name in ema and not np.array_equal(np.asarray(vec), np.asarray(ema[name])):
                raise CheckpointError(f"EMA vector for {name!r} disagrees with the training state")
    table = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        table.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header["arrays"] = table
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(head)))
        f.write(head)
        for raw in blobs:
            f.write(raw)
    tmp.replace(path)


def load_checkpoint(path, expected_archs: dict | None = None) -> Checkpoint:
    """Read a checkpoint, optionally insisting on specific architectures."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"{path}: truncated checkpoint")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a stormwind checkpoint")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = _PREFIX.size + head_len
    if start > len(data):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[_PREFIX.size : start].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    arrays = {}
    for entry in header["arrays"]:
        lo = start + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(data):
            raise CheckpointError(f"{path}: array {entry['name']} runs past end of file")
        arrays[entry["name"]] = np.frombuffer(data[lo:hi], dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()

    archs = header["archs"]
    if expected_archs is not None:
        for name, arch in expected_archs.items():
            if archs.get(name) != arch:
                raise CheckpointError(f"architecture mismatch for {name!r}: file has {archs.get(name)}, expected {arch}")
    params = {name: arrays[f"params/{name}"] for name in archs}
    ema = {name: arrays[f"ema/{name}"] for name in archs}
    for name, arch in archs.items():
        n = count_parameters(build_model(arch))
        if params[name].size != n or ema[name].size != n:
            raise CheckpointError(f"{name!r}: stored vector length does not match its architecture ({n})")

    state = None
    s = header.get("state")
    if s is not None:
        state = TrainState(
            phase=s["phase"],
            epoch=s["epoch"],
            best=s["best"],
            bad_epochs=s["bad_epochs"],
            done=s["done"],
            ema={k: v.copy() for k, v in ema.items()},
            ema_updates=s["ema_updates"],
            history=s["history"],
            optimizer=_join_optimizer(s["optimizer"], arrays),
            rng_state=s["rng_state"],
        )
    return Checkpoint(archs=archs, params=params, ema=ema, state=state, meta=header.get("meta", {}))


def checkpoint_from_models(models: dict, ema: dict | None = None, state: TrainState | None = None, meta=None) -> Checkpoint:
    params = {k: flat_parameters(m) for k, m in models.items()}
    return Checkpoint(
        archs={k: m.arch for k, m in models.items()},
        params=params,
        ema=ema if ema is not None else {k: v.copy() for k, v in params.items()},
        state=state,
        meta=meta or {},
    )
