"""Versioned binary checkpoint format: named parameter arrays with shape
headers. The byte layout is fully deterministic, so identical parameters
always produce identical files and round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ACRLCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, named_arrays):
    """Write an ordered mapping of name -> ndarray."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(named_arrays)))
        for name, arr in named_arrays.items():
            # np.ascontiguousarray would promote 0-d scalars to shape (1,),
            # so keep the original shape and only force C order for the bytes.
            arr = np.asarray(arr)
            nb = name.encode("utf-8")
            dt = arr.dtype.str.encode("ascii")  # e.g. '<f8'
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<H", len(dt)))
            fh.write(dt)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def load_arrays(path):
    """Read a checkpoint back into an ordered dict of arrays."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (dlen,) = struct.unpack("<H", fh.read(2))
            dtype = np.dtype(fh.read(dlen).decode("ascii"))
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0]
                          for _ in range(ndim))
            nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
            data = fh.read(nbytes)
            if len(data) != nbytes:
                raise CheckpointError(f"{path}: truncated array {name}")
            out[name] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
        return out


def state_to_arrays(policy, learner):
    """Flatten policy + representation parameters into a named dict."""
    named = {}
    for i, p in enumerate(policy.actor.params()):
        named[f"policy/actor/{i}"] = p
    for i, p in enumerate(policy.critic.params()):
        named[f"policy/critic/{i}"] = p
    if policy.log_std is not None:
        named["policy/log_std"] = policy.log_std
    for i, p in enumerate(learner.encoder.params()):
        named[f"repr/encoder/{i}"] = p
    for i, p in enumerate(learner.decoders.elbo_params()):
        named[f"repr/decoders/{i}"] = p
    for i, p in enumerate(learner.decoders.task_decoder.params()):
        named[f"repr/task_decoder/{i}"] = p
    return named


def arrays_to_state(named, policy, learner):
    """Load a named dict produced by :func:`state_to_arrays` back into
    freshly constructed policy/learner objects of matching architecture."""
    def group(prefix, n):
        arrs = []
        for i in range(n):
            key = f"{prefix}/{i}"
            if key not in named:
                raise CheckpointError(f"missing checkpoint array {key}")
            arrs.append(named[key])
        return arrs

    policy.actor.set_params(group("policy/actor", len(policy.actor.params())))
    policy.critic.set_params(group("policy/critic",
                                   len(policy.critic.params())))
    if policy.log_std is not None:
        policy.log_std[...] = named["policy/log_std"]
    learner.encoder.set_params(group("repr/encoder",
                                     len(learner.encoder.params())))
    learner.decoders.set_elbo_params(group(
        "repr/decoders", len(learner.decoders.elbo_params())))
    learner.decoders.task_decoder.set_params(group(
        "repr/task_decoder", len(learner.decoders.task_decoder.params())))
