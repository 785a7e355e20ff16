"""Binary checkpoints for one or more nets plus their Adam state.

Layout::

    NEGRL-CKPT 1\\n
    <one line of sorted-key JSON header>\\n
    <float64 little-endian arrays, row-major, in header order>

The header lists every array as ``[name, shape]``. For each net the order is
its parameters, then Adam first moments, then second moments. Sorted keys and
a fixed array order make identical states produce identical bytes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..protocol import ContractViolation
from .nets import net_from_architecture
from .optim import AdamState

MAGIC = b"NEGRL-CKPT 1\n"


class CheckpointError(ContractViolation):
    """The file is not a checkpoint or does not match the expected architecture."""


def save_checkpoint(path, nets: dict, adams: dict, seed: int, meta: dict | None = None,
                    overwrite: bool = True) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass overwrite to replace it")
    header = {"seed": int(seed), "meta": meta or {}, "nets": {}, "arrays": []}
    blobs = []
    for name in sorted(nets):
        net, adam = nets[name], adams[name]
        params = net.parameters()
        header["nets"][name] = {"architecture": net.architecture(),
                                "adam": {"lr": adam.lr, "step": adam.step}}
        for group, source in (("p", params), ("m", adam.m), ("v", adam.v)):
            for key in params:
                arr = np.asarray(source.get(key, np.zeros_like(params[key])), dtype="<f8")
                header["arrays"].append([f"{name}/{group}/{key}", list(arr.shape)])
                blobs.append(np.ascontiguousarray(arr).tobytes())
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for b in blobs:
            fh.write(b)
    os.replace(tmp, path)
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint")
        return json.loads(fh.readline())


def load_checkpoint(path):
    """Return ``(nets, adams, header)`` rebuilt from ``path``."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint")
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt header in {path}") from exc
        payload = fh.read()
    nets, adams = {}, {}
    for name, info in header["nets"].items():
        nets[name] = net_from_architecture(info["architecture"])
        adams[name] = AdamState(lr=info["adam"]["lr"], step=info["adam"]["step"])
    values = {n: {} for n in nets}
    offset = 0
    for key, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        if offset + 8 * count > len(payload):
            raise CheckpointError(f"{path}: payload truncated")
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        name, group, pkey = key.split("/", 2)
        if group == "p":
            values[name][pkey] = arr.astype(float)
        else:
            getattr(adams[name], group)[pkey] = arr.astype(float)
    if offset != len(payload):
        raise CheckpointError(f"{path}: payload size does not match header")
    for name, net in nets.items():
        net.load_parameters(values[name])
    return nets, adams, header
