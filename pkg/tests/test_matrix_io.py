import numpy as np
import pytest

from svtfair import ObservationMatrix, ValidationError
from svtfair.matrix_io import (
    load_dense,
    load_observations,
    read_matrix,
    write_matrix,
    write_observations,
)


def test_dense_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.uniform(-1, 1, (5, 7))
    path = tmp_path / "m.csv"
    write_matrix(path, m)
    values, mask = read_matrix(path)
    np.testing.assert_array_equal(values, m)
    assert mask is None
    assert path.read_text().splitlines()[0] == "# rows=5 cols=7"


def test_observation_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.uniform(-1, 1, (4, 6))
    mask = rng.random((4, 6)) < 0.5
    obs = ObservationMatrix.from_observed(values, mask)
    path = tmp_path / "z.csv"
    write_observations(path, obs)
    assert "NA" in path.read_text()
    loaded = load_observations(path)
    np.testing.assert_array_equal(loaded.values, obs.values)
    np.testing.assert_array_equal(loaded.mask, obs.mask)


def test_headerless_file(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    values, mask = read_matrix(path)
    np.testing.assert_array_equal(values, [[1.0, 2.0], [3.0, 4.0]])
    assert mask is None


def test_load_dense_rejects_na(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,NA\n0.0,0.2\n")
    with pytest.raises(ValidationError):
        load_dense(path)
    obs = load_observations(path)
    assert obs.n_observed == 3


def test_bad_token_reports_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n1.0,oops\n")
    with pytest.raises(ValidationError, match="line 2"):
        read_matrix(path)


def test_ragged_rows_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n1.0\n")
    with pytest.raises(ValidationError, match="columns"):
        read_matrix(path)


def test_header_shape_mismatch(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("# rows=3 cols=2\n1.0,2.0\n")
    with pytest.raises(ValidationError, match="header"):
        read_matrix(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("\n")
    with pytest.raises(ValidationError):
        read_matrix(path)
