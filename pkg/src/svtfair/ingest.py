"""MovieLens 1M ratings loader.

Parses the distributed ``ratings.dat`` wire format (UTF-8 lines,
``UserID::MovieID::Rating::Timestamp``) into an ObservationMatrix.  The
5-point ratings are normalized to [0, 1] via (r - 1) / 4, which is
invertible on the rating grid.  Users or movies without any ratings stay
as all-missing rows/columns.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import ObservationMatrix

__all__ = [
    "MOVIELENS_SHAPE",
    "normalize_rating",
    "denormalize_rating",
    "load_movielens",
]

MOVIELENS_SHAPE = (6040, 3952)


def normalize_rating(r):
    """Map a rating in {1..5} to [0, 1]."""
    return (np.asarray(r, dtype=np.float64) - 1.0) / 4.0


def denormalize_rating(v):
    """Inverse of normalize_rating, exact on the 5-point grid."""
    return np.asarray(v, dtype=np.float64) * 4.0 + 1.0


def load_movielens(
    path,
    subsample: tuple[int, int, int] | None = None,
    shape: tuple[int, int] = MOVIELENS_SHAPE,
) -> tuple[ObservationMatrix, dict]:
    """Parse a ratings file into a (users x movies) observation matrix.

    ``subsample=(max_users, max_movies, seed)`` keeps a seeded random
    subset of user rows and movie columns (drawn from the full id range,
    whether or not they have ratings).  Duplicate (user, movie) lines keep
    the last value; the count is reported in the returned provenance dict.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"{path} not found; download the MovieLens 1M archive from "
            "https://grouplens.org/datasets/movielens/1m/ and point at ratings.dat"
        )
    n_users, n_movies = shape
    values = np.zeros(shape)
    mask = np.zeros(shape, dtype=bool)
    duplicates = 0
    n_lines = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ValidationError(
                    f"{path}: line {lineno}: expected 4 '::'-separated fields"
                )
            try:
                user, movie, rating = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ValidationError(
                    f"{path}: line {lineno}: non-integer id or rating"
                ) from exc
            if not 1 <= user <= n_users:
                raise ValidationError(
                    f"{path}: line {lineno}: user id {user} outside [1, {n_users}]"
                )
            if not 1 <= movie <= n_movies:
                raise ValidationError(
                    f"{path}: line {lineno}: movie id {movie} outside [1, {n_movies}]"
                )
            if not 1 <= rating <= 5:
                raise ValidationError(
                    f"{path}: line {lineno}: rating {rating} outside [1, 5]"
                )
            i, j = user - 1, movie - 1
            if mask[i, j]:
                duplicates += 1
            values[i, j] = normalize_rating(rating)
            mask[i, j] = True
            n_lines += 1

    info = {
        "path": str(path),
        "lines_parsed": n_lines,
        "duplicates": duplicates,
        "shape": list(shape),
    }
    if subsample is not None:
        max_users, max_movies, seed = subsample
        if not (1 <= max_users <= n_users and 1 <= max_movies <= n_movies):
            raise ValidationError("subsample sizes exceed the matrix shape")
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n_users, size=max_users, replace=False))
        cols = np.sort(rng.choice(n_movies, size=max_movies, replace=False))
        values = values[np.ix_(rows, cols)]
        mask = mask[np.ix_(rows, cols)]
        info["subsample"] = {
            "max_users": max_users,
            "max_movies": max_movies,
            "seed": seed,
        }
    obs = ObservationMatrix.from_observed(values, mask)
    info["p_hat"] = obs.p_hat
    return obs, info
