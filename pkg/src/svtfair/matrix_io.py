"""CSV matrix format shared by every module.

One matrix row per line, comma-separated decimal values, missing entries
written as the literal token ``NA``.  An optional first line
``# rows=<m> cols=<n>`` declares the shape.  Values round-trip exactly
(full float64 precision via ``repr``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import ObservationMatrix, as_matrix

__all__ = [
    "write_matrix",
    "read_matrix",
    "load_dense",
    "load_observations",
    "write_observations",
]

_NA = "NA"


def write_matrix(path, values, mask=None, header: bool = True) -> None:
    """Write a dense matrix, or an observation matrix when ``mask`` is given."""
    a = as_matrix(values)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise ValidationError("mask shape does not match values shape")
    lines = []
    if header:
        lines.append(f"# rows={a.shape[0]} cols={a.shape[1]}")
    for i in range(a.shape[0]):
        if mask is None:
            lines.append(",".join(repr(float(v)) for v in a[i]))
        else:
            lines.append(
                ",".join(
                    repr(float(v)) if ok else _NA for v, ok in zip(a[i], mask[i])
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_observations(path, obs: ObservationMatrix, header: bool = True) -> None:
    write_matrix(path, obs.values, mask=obs.mask, header=header)


def read_matrix(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read the CSV format; returns (values, mask) with mask=None if fully dense.

    Missing cells come back as 0.0 in ``values`` with ``mask`` False there.
    """
    text = Path(path).read_text()
    rows: list[list[float]] = []
    mask_rows: list[list[bool]] = []
    saw_na = False
    declared: tuple[int, int] | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            declared = _parse_header(line, lineno)
            continue
        vals, ok = [], []
        for tok in line.split(","):
            tok = tok.strip()
            if tok == _NA:
                vals.append(0.0)
                ok.append(False)
                saw_na = True
            else:
                try:
                    vals.append(float(tok))
                except ValueError as exc:
                    raise ValidationError(
                        f"{path}: line {lineno}: bad value {tok!r}"
                    ) from exc
                ok.append(True)
        if rows and len(vals) != len(rows[0]):
            raise ValidationError(
                f"{path}: line {lineno}: expected {len(rows[0])} columns, got {len(vals)}"
            )
        rows.append(vals)
        mask_rows.append(ok)
    if not rows:
        raise ValidationError(f"{path}: no matrix rows found")
    values = np.array(rows, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValidationError(f"{path}: matrix contains non-finite values")
    if declared is not None and declared != values.shape:
        raise ValidationError(
            f"{path}: header declares {declared}, file has {values.shape}"
        )
    mask = np.array(mask_rows, dtype=bool) if saw_na else None
    return values, mask


def load_dense(path) -> np.ndarray:
    """Read a matrix that must be fully observed."""
    values, mask = read_matrix(path)
    if mask is not None:
        raise ValidationError(f"{path}: unexpected NA entries in dense matrix")
    return values


def load_observations(path) -> ObservationMatrix:
    """Read a matrix with (possibly zero) NA entries as an ObservationMatrix."""
    values, mask = read_matrix(path)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    return ObservationMatrix.from_observed(values, mask)


def _parse_header(line: str, lineno: int) -> tuple[int, int]:
    parts = dict(
        kv.split("=", 1) for kv in line.lstrip("#").split() if "=" in kv
    )
    try:
        return int(parts["rows"]), int(parts["cols"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"line {lineno}: malformed header {line!r}") from exc
