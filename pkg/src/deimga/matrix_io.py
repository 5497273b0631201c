"""Text matrix and index file formats shared by every command.

Matrix files::

    # rows=<R> cols=<C> field=<real|complex>
    1.0000000000000000,2.0000000000000000,...

Complex rows interleave real and imaginary parts. Values are written with 17
significant digits so float64 data round-trips exactly.

Index files hold one 1-based index per line in selection order.
"""

import re

import numpy as np

from .errors import MatrixFormatError, ValidationError

_HEADER = re.compile(r"^#\s*rows=(\d+)\s+cols=(\d+)\s+field=(real|complex)\s*$")


def _fmt(v):
    return format(float(v), ".17g")


def write_matrix(path, A):
    A = np.asarray(A)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValidationError("only 1-D or 2-D arrays can be written")
    is_complex = np.iscomplexobj(A)
    rows, cols = A.shape
    lines = [f"# rows={rows} cols={cols} field={'complex' if is_complex else 'real'}"]
    for row in A:
        if is_complex:
            vals = np.empty(2 * cols)
            vals[0::2] = row.real
            vals[1::2] = row.imag
        else:
            vals = row
        lines.append(",".join(_fmt(v) for v in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path, field=None):
    """Read a matrix file; ``field`` ("real"/"complex") asserts the header's field."""
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text:
        raise MatrixFormatError(f"{path}: empty file", kind="header", line=1)
    m = _HEADER.match(text[0].strip())
    if not m:
        raise MatrixFormatError(f"{path}:1: malformed header {text[0]!r}", kind="header", line=1)
    rows, cols, kind = int(m.group(1)), int(m.group(2)), m.group(3)
    if field is not None and field != kind:
        raise MatrixFormatError(f"{path}:1: expected field={field}, header says {kind}",
                                kind="header", line=1)
    body = [ln for ln in text[1:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != rows:
        raise MatrixFormatError(
            f"{path}:{len(body) + 2}: expected {rows} rows, found {len(body)}",
            kind="ragged", line=len(body) + 2)
    width = 2 * cols if kind == "complex" else cols
    out = np.empty((rows, width))
    for i, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != width:
            raise MatrixFormatError(
                f"{path}:{i + 2}: expected {width} values, found {len(parts)}",
                kind="ragged", line=i + 2)
        try:
            out[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise MatrixFormatError(f"{path}:{i + 2}: {exc}", kind="parse", line=i + 2) from None
        if not np.all(np.isfinite(out[i])):
            raise MatrixFormatError(f"{path}:{i + 2}: non-finite entry",
                                    kind="nonfinite", line=i + 2)
    if kind == "complex":
        # assign parts directly; re + 1j*im would lose signed zeros
        z = np.empty((rows, cols), dtype=complex)
        z.real = out[:, 0::2]
        z.imag = out[:, 1::2]
        return z
    return out


def write_indices(path, indices):
    with open(path, "w") as fh:
        fh.write("".join(f"{int(i)}\n" for i in indices))


def read_indices(path):
    vals = []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, 1):
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            try:
                vals.append(int(ln))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: not an integer: {ln!r}") from None
    return vals
