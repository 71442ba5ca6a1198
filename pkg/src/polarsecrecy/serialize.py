"""
File formats: channel specs, CodeSpec JSON, packed bit strings and reports.

Every written document carries ``schema`` and, where it applies, the code
hash and master seed. Reals are rounded to 12 significant digits before
encoding so reports compare byte for byte across reruns.
"""

import csv
import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from .bitchan import CodeSpec, EntropyProfile, SetPartition
from .probability import Pmf, ValidationError, WiretapChannel, bec_pair, bsc_cascade

SCHEMA_VERSION = 1
SIG_DIGITS = 12
VOLATILE_KEYS = ("created",)


# --- plain values -----------------------------------------------------------

def plain(obj):
    """Recursively convert numpy values to JSON-ready Python values.

    Floats keep 12 significant digits; NaN becomes ``None`` and infinities
    become the strings ``"inf"`` / ``"-inf"``.
    """
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(obj):
    return json.dumps(plain(obj), indent=2, sort_keys=True) + "\n"


def canonical(obj):
    return json.dumps(plain(obj), sort_keys=True, separators=(",", ":"))


def content_hash(obj, exclude=VOLATILE_KEYS):
    if isinstance(obj, dict):
        obj = {k: v for k, v in obj.items() if k not in exclude and k != "code_hash"}
    return hashlib.sha256(canonical(obj).encode()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc


def write_csv(path, rows, fields=None):
    rows = [plain(r) for r in rows]
    if fields is None:
        fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# --- bit strings ------------------------------------------------------------

def pack_bits(bits):
    """Little-endian packed bits behind a 4-byte little-endian length header."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    return struct.pack("<I", bits.size) + np.packbits(bits, bitorder="little").tobytes()


def unpack_bits(data):
    if len(data) < 4:
        raise ValidationError("bit string is missing its length header")
    (n,) = struct.unpack("<I", data[:4])
    body = np.frombuffer(data[4:], dtype=np.uint8)
    if body.size != (n + 7) // 8:
        raise ValidationError(f"bit string length header {n} does not match {body.size} bytes")
    return np.unpackbits(body, bitorder="little")[:n]


def bits_to_hex(bits):
    return pack_bits(bits).hex()


def bits_from_hex(text):
    try:
        return unpack_bits(bytes.fromhex(text.strip()))
    except ValueError as exc:
        raise ValidationError(f"bad hex bit string: {exc}") from exc


# --- channels ---------------------------------------------------------------

def channel_from_dict(d):
    """Build a :class:`WiretapChannel` from a spec dictionary.

    Explicit tables give ``x, y, z`` alphabet sizes, ``p_x`` and ``w`` with
    one row per input symbol holding ``P(y, z | x)`` in row-major ``(y, z)``
    order. Shorthand forms are ``{"kind": "bsc_cascade", "p1", "p2"}`` and
    ``{"kind": "bec_pair", "e1", "e2"}``, each with an optional ``p_one``.
    """
    if not isinstance(d, dict):
        raise ValidationError("channel spec must be a JSON object")
    kind = d.get("kind", "table")
    try:
        if kind == "bsc_cascade":
            return bsc_cascade(float(d["p1"]), float(d["p2"]), float(d.get("p_one", 0.5)))
        if kind == "bec_pair":
            return bec_pair(float(d["e1"]), float(d["e2"]), float(d.get("p_one", 0.5)))
        if kind != "table":
            raise ValidationError(f"unknown channel kind {kind!r}")
        nx, ny, nz = int(d["x"]), int(d["y"]), int(d["z"])
        w = np.asarray(d["w"], dtype=np.float64)
        p_x = np.asarray(d["p_x"], dtype=np.float64)
    except KeyError as exc:
        raise ValidationError(f"channel spec is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed channel spec: {exc}") from exc
    if w.size != nx * ny * nz:
        raise ValidationError(f"w has {w.size} entries, expected {nx * ny * nz}")
    if np.any(w < 0) or np.any(p_x < 0):
        raise ValidationError("probabilities must be non-negative")
    return WiretapChannel(w.reshape(nx, ny, nz), Pmf(p_x))


def channel_to_dict(channel):
    nx, ny, nz = channel.transition.shape
    return {"x": nx, "y": ny, "z": nz, "p_x": channel.input.probs,
            "w": channel.transition.reshape(nx, ny * nz)}


def load_channel(path):
    d = read_json(path)
    return channel_from_dict(d.get("channel", d))


def source_hash(source):
    """Hash of the joint table at 12 significant digits."""
    return content_hash({"joint": np.asarray(source.joint)})


# --- code specs -------------------------------------------------------------

def _profile_dict(p):
    return None if p is None else p.to_json()


def _profile(d):
    return None if d is None else EntropyProfile.from_json(
        {**d, "h": [0.0 if v is None else v for v in d["h"]]})


def code_to_dict(code, profiles=True, created=None):
    d = {
        "schema": SCHEMA_VERSION, "type": "code_spec",
        "L": code.L, "M": code.M, "eps1": code.eps1, "eps2": code.eps2,
        "mode": code.mode, "trials": code.trials, "seed": code.seed,
        "source_joint": code.source_joint,
        "source_hash": content_hash({"joint": np.asarray(code.source_joint)}),
        "inner": code.inner.to_json(), "outer_sets": [f.tolist() for f in code.outer_sets],
        "level_model": code.level_model, "meta": code.meta,
        "K": code.K, "J": code.J, "rate": code.rate,
    }
    if profiles:
        d["profiles"] = {
            "inner": _profile_dict(code.inner_profile),
            "eve": _profile_dict(code.eve_profile),
            "outer": [_profile_dict(p) for p in code.outer_profiles],
        }
    d["code_hash"] = content_hash(d)
    if created is not None:
        d["created"] = created
    return d


def code_from_dict(d, check_hash=True):
    if d.get("type") != "code_spec":
        raise ValidationError("document is not a code spec")
    if d.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported code spec schema {d.get('schema')!r}")
    if check_hash and d.get("code_hash") != content_hash(d):
        raise ValidationError("code spec content hash mismatch")
    prof = d.get("profiles") or {}
    outer = prof.get("outer") or [None] * len(d["outer_sets"])
    models = [{"depth": m["depth"],
               "p1": [math.nan if v is None else v for v in m["p1"]]} for m in d["level_model"]]
    code = CodeSpec(
        L=int(d["L"]), M=int(d["M"]), eps1=float(d["eps1"]), eps2=float(d["eps2"]),
        mode=d["mode"], trials=int(d["trials"]), seed=int(d["seed"]),
        source_joint=np.asarray(d["source_joint"], dtype=np.float64),
        inner=SetPartition.from_json(d["inner"]),
        inner_profile=_profile(prof.get("inner")), eve_profile=_profile(prof.get("eve")),
        outer_profiles=[_profile(p) for p in outer],
        outer_sets=[np.array(f, dtype=np.int64) for f in d["outer_sets"]],
        level_model=models, source_hash=d.get("source_hash", ""), meta=dict(d.get("meta", {})))
    code.verify()
    return code


def save_code(path, code, created=None):
    d = code_to_dict(code, created=created)
    write_json(path, d)
    return d["code_hash"]


def load_code(path):
    return code_from_dict(read_json(path))


def code_hash(code):
    return code_to_dict(code)["code_hash"]
