"""Binary checkpoints: magic, JSON header, then little-endian float64 tensors.

Layout::

    b"SEHSSLCK" | uint32 LE header length | UTF-8 JSON header | tensor data

The header lists tensors as ``{"name", "shape"}`` in storage order together
with the format version, the training config and the random-stream state.
"""
import json
import logging
import struct
from dataclasses import dataclass

import numpy as np

from diffnum import parameter
from encoder import EncoderLayer, EncoderParams
from exceptions import (CheckpointCorruptError, CheckpointError, CheckpointVersionError,
                        ShapeMismatchError)
from objectives import DiscriminatorParams

MAGIC = b"SEHSSLCK"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")


@dataclass
class Checkpoint:
    config: dict
    tensors: dict
    rng_state: dict
    epochs_completed: int

    def encoder_params(self, in_dim=None):
        """Rebuild EncoderParams, checking the input width when given"""
        layers = []
        l = 0
        while f"layer{l}.theta_e" in self.tensors:
            layers.append(EncoderLayer(
                theta_e=parameter(self.tensors[f"layer{l}.theta_e"], name=f"layer{l}.theta_e"),
                theta_v=parameter(self.tensors[f"layer{l}.theta_v"], name=f"layer{l}.theta_v"),
                slope_e=parameter(self.tensors[f"layer{l}.slope_e"], name=f"layer{l}.slope_e"),
                slope_v=parameter(self.tensors[f"layer{l}.slope_v"], name=f"layer{l}.slope_v"),
            ))
            l += 1
        if not layers:
            raise CheckpointCorruptError("Checkpoint holds no encoder layers")
        params = EncoderParams(layers)
        if in_dim is not None and params.in_dim != in_dim:
            raise ShapeMismatchError(
                f"Checkpoint encoder expects {params.in_dim} input features, dataset has {in_dim}")
        return params

    def discriminator(self):
        if "disc.bilinear" not in self.tensors:
            raise CheckpointCorruptError("Checkpoint holds no discriminator")
        return DiscriminatorParams(parameter(self.tensors["disc.bilinear"], name="disc.bilinear"))

    def restore_into(self, named_tensors):
        """Copy stored values into existing tensors, requiring identical shapes"""
        for name, tensor in named_tensors.items():
            if name not in self.tensors:
                raise ShapeMismatchError(f"Checkpoint has no tensor {name}")
            stored = self.tensors[name]
            if stored.shape != tensor.shape:
                raise ShapeMismatchError(f"{name}: checkpoint shape {stored.shape}, expected {tensor.shape}")
            tensor.values = stored.copy()


def save_checkpoint(path, params: EncoderParams, disc: DiscriminatorParams, config: dict,
                    rng_state: dict, epochs_completed: int, logger=None):
    """Write all parameters with config and stream state to ``path``"""
    logger = logger or logging.getLogger('SEHSSL')
    named = {**params.named_parameters(), **disc.named_parameters()}
    header = {
        "version": FORMAT_VERSION,
        "config": config,
        "rng_state": rng_state,
        "epochs_completed": int(epochs_completed),
        "tensors": [{"name": name, "shape": list(t.shape)} for name, t in named.items()],
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(_LENGTH.pack(len(encoded)))
            f.write(encoded)
            for tensor in named.values():
                f.write(np.ascontiguousarray(tensor.values, dtype="<f8").tobytes())
    except OSError as e:
        logger.error(f"Failed to write checkpoint {path}: {e}")
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint written by save_checkpoint"""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    prefix = len(MAGIC) + _LENGTH.size
    if len(blob) < prefix or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointCorruptError(f"{path} is not a checkpoint or is truncated")
    (length,) = _LENGTH.unpack_from(blob, len(MAGIC))
    if len(blob) < prefix + length:
        raise CheckpointCorruptError(f"{path}: header truncated")
    try:
        header = json.loads(blob[prefix:prefix + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"{path}: unreadable header ({e})") from e

    version = header.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")

    tensors = {}
    offset = prefix + length
    for entry in header.get("tensors", []):
        try:
            name = entry["name"]
            shape = tuple(int(n) for n in entry["shape"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointCorruptError(f"{path}: malformed tensor entry {entry!r}") from e
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(blob):
            raise CheckpointCorruptError(f"{path}: tensor {name} truncated")
        tensors[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset = end
    if offset != len(blob):
        raise CheckpointCorruptError(f"{path}: {len(blob) - offset} trailing bytes")

    return Checkpoint(config=header.get("config", {}), tensors=tensors,
                      rng_state=header.get("rng_state", {}),
                      epochs_completed=int(header.get("epochs_completed", 0)))
