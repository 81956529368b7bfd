"""Binary model containers.

Layout: an 8-byte ASCII magic, a payload of little-endian fixed-width
fields and row-major float64 arrays, then an 8-byte checksum of the
payload (BLAKE2b with an 8-byte digest). Anything that does not parse
exactly, including a bad checksum or a payload whose length disagrees
with its header, is rejected.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import ModelFormatError
from .imf import ImfModel
from .model import NadeModel

NADE_MAGIC = b"NADECF01"
IMF_MAGIC = b"IMFCF001"

_ACT_TO_CODE = {"tanh": 0, "identity": 1}
_CODE_TO_ACT = {v: k for k, v in _ACT_TO_CODE.items()}


def _checksum(payload):
    return hashlib.blake2b(payload, digest_size=8).digest()


def _frame(magic, payload):
    return magic + payload + _checksum(payload)


def _unframe(blob, magic):
    if len(blob) < 8 or blob[:8] != magic:
        raise ModelFormatError("bad magic, not a recognized model file")
    if len(blob) < 16:
        raise ModelFormatError("file too short to hold a checksum")
    payload, stored = blob[8:-8], blob[-8:]
    if _checksum(payload) != stored:
        raise ModelFormatError("checksum mismatch, file is corrupt")
    return payload


def _array_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _take_array(payload, offset, shape):
    n = int(np.prod(shape))
    end = offset + 8 * n
    arr = np.frombuffer(payload[offset:end], dtype="<f8")
    return arr.astype(np.float64).reshape(shape), end


def nade_to_bytes(model):
    model.validate()
    header = struct.pack(
        "<III", model.n_items, model.n_hidden, _ACT_TO_CODE[model.activation]
    )
    payload = header + b"".join(
        _array_bytes(a) for a in (model.W, model.A, model.V, model.b, model.d)
    )
    return _frame(NADE_MAGIC, payload)


def nade_from_bytes(blob):
    payload = _unframe(blob, NADE_MAGIC)
    if len(payload) < 12:
        raise ModelFormatError("payload too short for a header")
    M, H, act_code = struct.unpack_from("<III", payload, 0)
    if M < 1 or H < 1:
        raise ModelFormatError(f"invalid dimensions {M} x {H}")
    if act_code not in _CODE_TO_ACT:
        raise ModelFormatError(f"unknown activation code {act_code}")
    expected = 12 + 8 * (2 * H * M + M * H + H + M)
    if len(payload) != expected:
        raise ModelFormatError(
            f"payload holds {len(payload)} bytes, header implies {expected}"
        )
    offset = 12
    W, offset = _take_array(payload, offset, (H, M))
    A, offset = _take_array(payload, offset, (H, M))
    V, offset = _take_array(payload, offset, (M, H))
    b, offset = _take_array(payload, offset, (H,))
    d, offset = _take_array(payload, offset, (M,))
    return NadeModel(W, A, V, b, d, _CODE_TO_ACT[act_code]).validate()


def imf_to_bytes(model):
    U, F = model.user_factors.shape
    M = model.item_factors.shape[0]
    header = struct.pack("<III", U, M, F)
    payload = (
        header
        + _array_bytes(model.user_factors)
        + _array_bytes(model.item_factors)
        + struct.pack("<dd", model.lam, model.alpha)
    )
    return _frame(IMF_MAGIC, payload)


def imf_from_bytes(blob):
    payload = _unframe(blob, IMF_MAGIC)
    if len(payload) < 12:
        raise ModelFormatError("payload too short for a header")
    U, M, F = struct.unpack_from("<III", payload, 0)
    if U < 1 or M < 1 or F < 1:
        raise ModelFormatError(f"invalid dimensions {U} x {M} x {F}")
    expected = 12 + 8 * (U * F + M * F + 2)
    if len(payload) != expected:
        raise ModelFormatError(
            f"payload holds {len(payload)} bytes, header implies {expected}"
        )
    offset = 12
    X, offset = _take_array(payload, offset, (U, F))
    Y, offset = _take_array(payload, offset, (M, F))
    lam, alpha = struct.unpack_from("<dd", payload, offset)
    return ImfModel(X, Y, float(lam), float(alpha))


def save_model(model, path):
    """Write a NadeModel or ImfModel to ``path`` in its binary container."""
    if isinstance(model, NadeModel):
        blob = nade_to_bytes(model)
    elif isinstance(model, ImfModel):
        blob = imf_to_bytes(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(blob)


def load_model(path):
    """Read either model container back, dispatching on the magic."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] == NADE_MAGIC:
        return nade_from_bytes(blob)
    if blob[:8] == IMF_MAGIC:
        return imf_from_bytes(blob)
    raise ModelFormatError("unrecognized model file")
