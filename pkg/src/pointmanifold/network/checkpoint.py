"""Versioned model checkpoints.

A checkpoint is an ``.npz`` archive: one float32 entry per parameter and
batch-norm buffer, plus ``__meta__`` holding JSON with the format version,
the architecture, the augmentation tag and the ``(name, shape)`` listing.
Loading rebuilds the model from the stored architecture and refuses any
mismatch.
"""

import json

import numpy as np

from ..errors import CheckpointError
from .model import ArchitectureSpec, PointManifoldNet

FORMAT = "pointmanifold-checkpoint"
VERSION = 1


def _tensors(model):
    out = {f"param:{n}": p.value for n, p in model.named_parameters()}
    out.update({f"buffer:{n}": b for n, b in model.named_buffers()})
    return out


def save_checkpoint(path, model, extra=None):
    tensors = _tensors(model)
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "spec": model.spec.to_dict(),
        "augmentation": model.augmentation,
        "tensors": [[name, list(arr.shape)] for name, arr in tensors.items()],
        "extra": extra or {},
    }
    payload = {name: np.asarray(arr, dtype=np.float32) for name, arr in tensors.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **payload)


def read_meta(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from None
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown format {meta.get('format')!r}")
    if meta.get("version") != VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {meta.get('version')} is not supported (expected {VERSION})"
        )
    return meta


def load_checkpoint(path, spec=None, augmentation=None, dtype=np.float32):
    """Rebuild a model from ``path``.

    If ``spec`` or ``augmentation`` are given they must equal the stored ones.
    """
    meta = read_meta(path)
    stored_spec = ArchitectureSpec.from_dict(meta["spec"])
    if spec is not None and spec != stored_spec:
        raise CheckpointError(f"{path}: architecture mismatch: checkpoint {stored_spec}, requested {spec}")
    if augmentation is not None and augmentation != meta["augmentation"]:
        raise CheckpointError(
            f"{path}: augmentation mismatch: checkpoint {meta['augmentation']!r}, requested {augmentation!r}"
        )
    model = PointManifoldNet(stored_spec, meta["augmentation"], seed=0, dtype=dtype)
    targets = _tensors(model)
    listing = {name: tuple(shape) for name, shape in meta["tensors"]}
    if set(listing) != set(targets):
        missing = sorted(set(targets) - set(listing))
        unexpected = sorted(set(listing) - set(targets))
        raise CheckpointError(f"{path}: tensor set mismatch; missing {missing}, unexpected {unexpected}")
    with np.load(path, allow_pickle=False) as data:
        for name, target in targets.items():
            arr = data[name]
            if arr.shape != target.shape or listing[name] != target.shape:
                raise CheckpointError(f"{path}: {name} has shape {arr.shape}, model expects {target.shape}")
            target[...] = arr
    return model, meta
