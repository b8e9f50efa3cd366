"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, and repeating a key builds a
list::

    kind = gsm-curve
    beta = 2
    s = 1.5
    theta_exponent = 0.5
    n = 256
    n = 512

A numeric value may also be an inclusive range ``start:stop:step``. Seeds are
either listed with repeated ``seeds`` keys or derived from a master ``seed``
and a ``replicates`` count through :func:`featlab._random.derive_seed`.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from ._random import derive_seed
from .errors import InputError

KINDS = ("rates", "gsm-curve", "opgsm-sim", "kgf-vs-gsm", "net-align", "kernel-curve")

REQUIRED = object()


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    return None if text.strip().lower() in ("none", "") else float(text)


# name -> (parser, default, is_list); a list default may be empty only if the key is optional
_SCHEMAS = {
    "rates": {
        "regime": (str, ["fixed-d"], True),
        "s": (float, REQUIRED, True),
        "beta": (float, [], True),
        "gamma": (float, [], True),
        "theta": (float, [], True),
        "estimator": (str, "KGF", False),
    },
    "gsm-curve": {
        "beta": (float, REQUIRED, False),
        "s": (_optional_float, REQUIRED, False),
        "theta_exponent": (float, REQUIRED, True),
        "n": (int, REQUIRED, True),
        "t_scale": (float, 1.0, False),
        "N": (int, None, False),
        "noise_var": (float, 1.0, False),
        "drop_smallest": (int, 0, False),
    },
    "opgsm-sim": {
        "N": (int, 500, False),
        "n": (int, 4000, False),
        "eta": (float, 0.5, False),
        "steps": (int, 2000, False),
        "p": (int, [10, 100, 300], True),
        "freeze_A": (_bool, False, False),
        "freeze_D": (_bool, False, False),
        "record_every": (int, 1, False),
    },
    "kgf-vs-gsm": {
        "n": (int, REQUIRED, True),
        "t": (float, REQUIRED, True),
        "sigma": (float, 0.1, False),
        "kernel": (str, "k1", False),
        "risk_method": (str, "basis", False),
        "mc_points": (int, 200_000, False),
    },
    "net-align": {
        "d": (int, 20, False),
        "m": (int, 200, False),
        "n": (int, 1000, False),
        "eta": (float, 0.5, False),
        "steps": (int, 500, False),
        "p": (int, [10], True),
        "noise": (float, 0.0, False),
        "init": (str, "symmetric", False),
        "record_every": (int, 10, False),
    },
    "kernel-curve": {
        "kernel": (str, REQUIRED, False),
        "n": (int, REQUIRED, True),
        "sigma": (float, 0.1, False),
        "t_scale": (float, 1000.0, False),
        "theta_exponent": (_optional_float, None, False),
        "drop_smallest": (int, 0, False),
    },
}

_COMMON = {
    "kind": (str, None, False),
    "seed": (int, 0, False),
    "seeds": (int, [], True),
    "replicates": (int, 1, False),
    "out": (str, None, False),
    "workers": (int, 1, False),
}


def _expand(text, parser):
    parts = text.split(":")
    if len(parts) == 3 and parser in (int, float):
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 12) for i in range(count)]
        return [parser(v) if parser is float else int(round(v)) for v in vals]
    return [parser(text)]


def parse_pairs(text):
    """``key = value`` lines to a dict of raw string lists (comments stripped)."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InputError(f"line {lineno}: empty key")
        pairs.setdefault(key, []).append(value)
    return pairs


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict = field(repr=False)
    seeds: tuple = (0,)
    out: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if not self.seeds:
            raise InputError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise InputError("seeds must be distinct")
        if self.workers < 1:
            raise InputError("workers must be at least 1")

    def __getitem__(self, key):
        return self.params[key]

    def config_hash(self):
        """SHA-256 over kind, parameters and seeds (output path and workers excluded)."""
        blob = json.dumps({"kind": self.kind, "params": {k: _canon(v) for k, v in sorted(self.params.items())},
                           "seeds": list(self.seeds)}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _canon(v):
    if isinstance(v, (list, tuple)):
        return [_canon(x) for x in v]
    if isinstance(v, float):
        return repr(v)
    return v


def build_config(pairs, kind=None, seed=None, out=None, workers=None):
    """Validate raw pairs against the schema of ``kind`` and resolve seeds."""
    file_kind = pairs.get("kind", [None])[-1]
    if kind and file_kind and kind != file_kind:
        raise InputError(f"command asks for {kind!r} but the config declares {file_kind!r}")
    kind = kind or file_kind
    if kind not in _SCHEMAS:
        raise InputError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    schema = {**_COMMON, **_SCHEMAS[kind]}
    unknown = sorted(set(pairs) - set(schema))
    if unknown:
        raise InputError(f"unknown keys for {kind}: {', '.join(unknown)}")
    values = {}
    for key, (parser, default, is_list) in schema.items():
        if key not in pairs:
            if default is REQUIRED:
                raise InputError(f"{kind} requires '{key}'")
            values[key] = list(default) if is_list else default
            continue
        raw = pairs[key]
        if not is_list and len(raw) > 1:
            raise InputError(f"'{key}' is given {len(raw)} times but takes a single value")
        try:
            items = [v for text in raw if text for v in _expand(text, parser)]
        except ValueError as exc:
            raise InputError(f"bad value for '{key}': {exc}") from None
        if is_list:
            if not items:
                raise InputError(f"'{key}' must be a non-empty list")
            values[key] = items
        else:
            if not raw[0] and parser is not _optional_float:
                raise InputError(f"'{key}' has no value")
            values[key] = items[0] if items else None
    master = values.pop("seed") if seed is None else int(seed)
    listed = values.pop("seeds")
    replicates = values.pop("replicates")
    if replicates < 1:
        raise InputError("replicates must be at least 1")
    seeds = tuple(listed) if listed else tuple(derive_seed(master, i) for i in range(replicates))
    cfg_out = values.pop("out")
    cfg_workers = values.pop("workers")
    values.pop("kind")
    return ExperimentConfig(kind, values, seeds, out if out is not None else cfg_out,
                            int(workers) if workers is not None else cfg_workers)


def load_config(path, **overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    return build_config(parse_pairs(text), **overrides)
