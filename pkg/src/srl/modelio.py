"""JSON model documents.

Layout::

    {"format_version": 1, "dim_input": d, "atoms": [[a, [w_1, ..., w_{d+1}]], ...],
     "canonical": {"ridge": [[c, [v...]], ...], "linear": [w...]}}   # optional

Floats are written with Python's shortest round-trip ``repr`` so a
write/read cycle is bit exact.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import ConfigError, ParseError
from .network import Parameterization

FORMAT_VERSION = 1


def net_to_dict(net: Parameterization) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "dim_input": net.dim_input,
        "atoms": [[float(a), [float(v) for v in w]] for a, w in zip(net.outer, net.inner)],
    }


def net_from_dict(doc: Any) -> Parameterization:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    for key in ("dim_input", "atoms"):
        if key not in doc:
            raise ParseError(f"model document is missing field '{key}'")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version!r}")
    d = doc["dim_input"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ParseError(f"field 'dim_input': expected a positive integer, got {d!r}")
    atoms = doc["atoms"]
    if not isinstance(atoms, list):
        raise ParseError("field 'atoms': expected a list")
    parsed = []
    for i, atom in enumerate(atoms):
        try:
            a, w = atom
            a = _number(a)
            w = [_number(v) for v in w]
        except (TypeError, ValueError) as exc:
            raise ParseError(f"field 'atoms[{i}]': expected [a, [w...]] ({exc})") from None
        if len(w) != d + 1:
            raise ParseError(f"field 'atoms[{i}]': inner vector has length {len(w)}, expected {d + 1}")
        parsed.append((a, w))
    return Parameterization.from_atoms(d, parsed)


def _number(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{v!r} is not a number")
    return float(v)


def dumps(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def save_model(net: Parameterization, path, extra: dict[str, Any] | None = None) -> None:
    doc = net_to_dict(net)
    if extra:
        doc.update(extra)
    Path(path).write_text(dumps(doc))


def load_model_doc(path) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read model {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_model(path) -> Parameterization:
    return net_from_dict(load_model_doc(path))
