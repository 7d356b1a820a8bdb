"""Binary checkpoint container: JSON header plus named raw tensor blobs.

Layout::

    8 bytes   magic  b"IEKG0001"
    8 bytes   header length (uint64, little endian)
    N bytes   UTF-8 JSON header
    ...       tensor blobs, row-major raw bytes, in header order

The header carries ``{"version", "config", "n_entities", "n_relations",
"meta", "tensors": [{"name", "dtype", "shape"}, ...]}``.  Loading
re-derives the expected parameter shapes from the config and refuses
mismatched files.  Writing the same state twice produces identical bytes.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, ModelParams, relation_rows

MAGIC = b"IEKG0001"
FORMAT_VERSION = 1

PARAM_TENSORS = ("entity", "relation", "filters", "proj", "entity_bias", "perms")


class CheckpointError(ValueError):
    """A checkpoint file that is malformed or inconsistent with its config."""


@dataclass
class Checkpoint:
    config: ModelConfig
    n_entities: int
    n_relations: int
    tensors: dict
    meta: dict

    def params(self) -> ModelParams:
        t = self.tensors
        return ModelParams(entity=t["entity"], relation=t["relation"],
                           filters=t["filters"], proj=t["proj"],
                           entity_bias=t.get("entity_bias"), perms=t["perms"])


def expected_param_shapes(config: ModelConfig, n_entities: int, n_relations: int) -> dict:
    shapes = {
        "entity": (n_entities, config.d),
        "relation": (relation_rows(config, n_relations), config.d),
        "filters": (config.n_filters, config.k, config.k),
        "proj": (config.flat_dim, config.d),
        "perms": (config.t, 2, config.d),
    }
    if config.entity_bias:
        shapes["entity_bias"] = (n_entities,)
    return shapes


def save_checkpoint(path, config: ModelConfig, n_entities: int, n_relations: int,
                    params: ModelParams, extras: dict | None = None,
                    meta: dict | None = None):
    """Write params (and optional extra named tensors) to ``path``."""
    tensors = {}
    for name in PARAM_TENSORS:
        value = getattr(params, name)
        if value is not None:
            tensors[name] = np.ascontiguousarray(value)
    for name, value in (extras or {}).items():
        if name in tensors:
            raise CheckpointError(f"extra tensor name {name!r} collides with a parameter")
        tensors[name] = np.ascontiguousarray(value)
    manifest = [{"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
                for name, arr in tensors.items()]
    header = {
        "version": FORMAT_VERSION,
        "config": config.to_dict(),
        "n_entities": int(n_entities),
        "n_relations": int(n_relations),
        "meta": meta or {},
        "tensors": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in tensors.values():
            fh.write(arr.tobytes())


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint and validate tensor shapes against its config."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
        if header.get("version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")
        config = ModelConfig.from_dict(header["config"])
        tensors = {}
        for entry in header["tensors"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise CheckpointError(f"{path}: truncated blob for {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    n_entities = int(header["n_entities"])
    n_relations = int(header["n_relations"])
    expect = expected_param_shapes(config, n_entities, n_relations)
    for name, shape in expect.items():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name!r}")
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"{path}: tensor {name!r} has shape {tensors[name].shape}, "
                f"config implies {shape}")
    return Checkpoint(config=config, n_entities=n_entities, n_relations=n_relations,
                      tensors=tensors, meta=header.get("meta", {}))
