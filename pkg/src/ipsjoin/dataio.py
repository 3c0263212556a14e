"""Text dataset format shared by every subcommand.

One vector per line after a header::

    # domain=binary dim=4 count=2
    0110
    1001

Binary vectors are written as ``0``/``1`` characters, sign vectors as
``+``/``-`` characters and real vectors as comma-separated decimals. Reals use
the shortest round-tripping representation, so read(write(x)) == x exactly.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass

import numpy as np

from .core import Domain, DomainError, infer_domain

_HEADER = re.compile(r"^#\s*domain=(\w+)\s+dim=(\d+)\s+count=(\d+)\s*$")
_SIGN_CHARS = {"+": 1, "-": -1}


class FormatError(ValueError):
    pass


@dataclass
class Dataset:
    domain: Domain
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


def format_dataset(vectors, domain: Domain | str | None = None) -> str:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2:
        raise FormatError("a dataset is a 2-D array of vectors")
    domain = infer_domain(vectors) if domain is None else Domain(domain)
    n, d = vectors.shape
    out = io.StringIO()
    out.write(f"# domain={domain.value} dim={d} count={n}\n")
    if domain is Domain.BINARY:
        if not np.all((vectors == 0) | (vectors == 1)):
            raise DomainError("binary dataset has entries outside {0,1}")
        for row in vectors.astype(np.int8):
            out.write("".join("1" if v else "0" for v in row) + "\n")
    elif domain is Domain.SIGN:
        if not np.all((vectors == 1) | (vectors == -1)):
            raise DomainError("sign dataset has entries outside {-1,1}")
        for row in vectors:
            out.write("".join("+" if v > 0 else "-" for v in row) + "\n")
    else:
        for row in vectors.astype(np.float64):
            out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


def parse_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty dataset file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise FormatError(f"bad header line: {lines[0]!r}")
    try:
        domain = Domain(m.group(1))
    except ValueError:
        raise FormatError(f"unknown domain {m.group(1)!r}") from None
    d, n = int(m.group(2)), int(m.group(3))
    body = [ln.strip() for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise FormatError(f"header announces {n} vectors, found {len(body)}")

    if domain is Domain.REAL:
        rows = np.zeros((n, d), dtype=np.float64)
        for i, ln in enumerate(body):
            fields = ln.split(",")
            if len(fields) != d:
                raise FormatError(f"line {i + 2}: expected {d} values, got {len(fields)}")
            rows[i] = [float(f) for f in fields]
        return Dataset(domain, rows)

    rows = np.zeros((n, d), dtype=np.int8)
    for i, ln in enumerate(body):
        if len(ln) != d:
            raise FormatError(f"line {i + 2}: expected {d} symbols, got {len(ln)}")
        try:
            if domain is Domain.BINARY:
                rows[i] = [{"0": 0, "1": 1}[ch] for ch in ln]
            else:
                rows[i] = [_SIGN_CHARS[ch] for ch in ln]
        except KeyError as e:
            raise FormatError(f"line {i + 2}: bad symbol {e.args[0]!r} for {domain.value}") from None
    return Dataset(domain, rows)


def write_dataset(path: str | os.PathLike, vectors, domain: Domain | str | None = None) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_dataset(vectors, domain))


def read_dataset(path: str | os.PathLike) -> Dataset:
    with open(path) as fh:
        return parse_dataset(fh.read())
