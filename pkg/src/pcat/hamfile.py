"""JSON matrix files: ``{"n": int, "re": [[...]], "im": [[...]], "label": str?}``."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class HamiltonianFile:
    n: int
    re: tuple[tuple[float, ...], ...]
    im: tuple[tuple[float, ...], ...]
    label: str | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.re, dtype=float) + 1j * np.array(self.im, dtype=float)

    @classmethod
    def from_matrix(cls, M, label: str | None = None) -> "HamiltonianFile":
        M = np.asarray(M, dtype=np.complex128)
        re = tuple(tuple(float(x) for x in row) for row in M.real)
        im = tuple(tuple(float(x) for x in row) for row in M.imag)
        return cls(M.shape[0], re, im, label)

    def to_dict(self) -> dict:
        d = {"n": self.n, "re": [list(r) for r in self.re], "im": [list(r) for r in self.im]}
        if self.label is not None:
            d["label"] = self.label
        return d


def _grid(doc: dict, key: str, n: int) -> tuple[tuple[float, ...], ...]:
    rows = doc.get(key)
    if not isinstance(rows, list) or len(rows) != n:
        raise ParseError(f"'{key}' must be a list of {n} rows")
    out = []
    for row in rows:
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"every row of '{key}' must have {n} entries")
        vals = []
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ParseError(f"'{key}' holds a non-finite or non-numeric entry: {x!r}")
            vals.append(float(x))
        out.append(tuple(vals))
    return tuple(out)


def parse(doc) -> HamiltonianFile:
    if not isinstance(doc, dict):
        raise ParseError("matrix file must hold a JSON object")
    n = doc.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError("'n' must be a positive integer")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError("'label' must be a string")
    return HamiltonianFile(n, _grid(doc, "re", n), _grid(doc, "im", n), label)


def loads(text: str) -> HamiltonianFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return parse(doc)


def load(path) -> HamiltonianFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return loads(text)


def dumps(hf: HamiltonianFile) -> str:
    return json.dumps(hf.to_dict())


def dump(hf: HamiltonianFile, path) -> None:
    Path(path).write_text(dumps(hf) + "\n", encoding="utf-8")
