"""File formats: plant and pattern JSON, reports, traces, flat configs.

A plant file stores one realization as row-major nested lists under the
keys n, m, p, E, A, B, C, D.  A pattern file stores the binary entries
matrix.  Reports are plain dicts dumped with sorted keys so that a rerun
with the same config and seed produces byte-identical output; anything
nondeterministic (wall-clock times in particular) stays out of them.
"""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np
from scipy import signal

from .errors import DimensionMismatch
from .patterns import SparsityPattern
from .pencil import minimal_realization, state_space_form
from .realization import DescriptorRealization

__all__ = [
    "realization_to_dict",
    "realization_from_dict",
    "load_plant",
    "save_plant",
    "pattern_to_dict",
    "pattern_from_dict",
    "load_pattern",
    "save_pattern",
    "transfer_entry",
    "transfer_entries",
    "dump_report",
    "write_trace",
    "parse_config_text",
    "load_config",
]

_MATS = ("E", "A", "B", "C", "D")


def realization_to_dict(G: DescriptorRealization) -> dict:
    out = {"n": G.n, "m": G.m, "p": G.p}
    for key in _MATS:
        out[key] = np.asarray(getattr(G, key), dtype=float).tolist()
    return out


def realization_from_dict(data: dict) -> DescriptorRealization:
    """Inverse of :func:`realization_to_dict`, with shape validation."""
    missing = [k for k in ("n", "m", "p", *_MATS) if k not in data]
    if missing:
        raise DimensionMismatch(f"plant data lacks keys {missing}")
    n, m, p = (int(data[k]) for k in ("n", "m", "p"))
    shapes = {"E": (n, n), "A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m)}
    mats = {}
    for key, want in shapes.items():
        arr = np.asarray(data[key], dtype=float)
        if arr.size != want[0] * want[1]:
            raise DimensionMismatch(f"{key} has {arr.size} entries, expected {want}")
        mats[key] = arr.reshape(want)
    return DescriptorRealization(**mats)


def load_plant(path) -> DescriptorRealization:
    with open(path, "r", encoding="utf-8") as fh:
        return realization_from_dict(json.load(fh))


def save_plant(path, G: DescriptorRealization) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_report(realization_to_dict(G)))


def pattern_to_dict(P: SparsityPattern) -> dict:
    return {"entries": P.entries.tolist()}


def pattern_from_dict(data: dict) -> SparsityPattern:
    if "entries" not in data:
        raise DimensionMismatch("pattern data lacks the 'entries' key")
    return SparsityPattern(np.asarray(data["entries"], dtype=int))


def load_pattern(path) -> SparsityPattern:
    with open(path, "r", encoding="utf-8") as fh:
        return pattern_from_dict(json.load(fh))


def save_pattern(path, P: SparsityPattern) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_report(pattern_to_dict(P)))


def _round_sig(x: float, digits: int) -> float:
    if x == 0.0 or not np.isfinite(x):
        return float(x)
    return float(np.format_float_positional(x, precision=digits, fractional=False))


def transfer_entry(G: DescriptorRealization, i: int, j: int, digits: int = 10) -> dict:
    """Entry (i, j) as numerator/denominator coefficients, denominator monic.

    Coefficients are rounded to ``digits`` significant figures; the raw
    realization remains the precise record, this form is for reading.
    Requires the entry to be proper.
    """
    ent = DescriptorRealization(
        G.E, G.A, G.B[:, [j]], G.C[[i], :], G.D[[i], [j]].reshape(1, 1)
    )
    ent = state_space_form(minimal_realization(ent))
    if ent.n == 0:
        num, den = np.array([[ent.D[0, 0]]]), np.array([1.0])
    else:
        num, den = signal.ss2tf(ent.A, ent.B, ent.C, ent.D)
    num = np.atleast_2d(num)[0]
    scale = den[0]
    num, den = num / scale, den / scale
    lead = np.flatnonzero(np.abs(num) > 1e-12 * max(1.0, np.abs(num).max()))
    num = num[lead[0] :] if lead.size else np.zeros(1)
    return {
        "row": i,
        "col": j,
        "num": [_round_sig(c, digits) for c in num],
        "den": [_round_sig(c, digits) for c in den],
    }


def transfer_entries(G: DescriptorRealization, support=None, digits: int = 10) -> list:
    """Readable per-entry fractions over a support set (default: all entries)."""
    if support is None:
        support = [(i, j) for i in range(G.p) for j in range(G.m)]
    return [transfer_entry(G, i, j, digits=digits) for i, j in sorted(support)]


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_trace(path, trace: Iterable[dict]) -> None:
    """One JSON object per line: {k, f, nuclear_residual, theta_side, solve_time_ms}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _coerce(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; bare words stay strings."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = _coerce(value.strip())
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
