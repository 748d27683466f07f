"""Artifact round-trips: binary matrices, CSV, manifests, run locks."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from memprior.errors import ConfigError
from memprior import io


class TestMatrixFormat:
    def test_header_layout(self, tmp_path):
        path = io.write_matrix(tmp_path / "a.mpst", np.arange(6.0).reshape(2, 3))
        raw = path.read_bytes()
        assert raw[:4] == b"MPST"
        version, dtype_code, ndim = struct.unpack("<III", raw[4:16])
        assert (version, dtype_code, ndim) == (1, 1, 2)
        assert struct.unpack("<2Q", raw[16:32]) == (2, 3)
        payload = np.frombuffer(raw[32:], dtype="<f8")
        assert payload.tolist() == [0, 1, 2, 3, 4, 5]  # row-major

    @settings(max_examples=25, deadline=None)
    @given(
        arrays(
            dtype=np.float64,
            shape=array_shapes(min_dims=1, max_dims=3, min_side=1, max_side=4),
            elements=st.floats(-1e6, 1e6, allow_nan=False),
        )
    )
    def test_round_trip(self, tmp_path_factory, arr):
        path = tmp_path_factory.mktemp("mat") / "m.mpst"
        io.write_matrix(path, arr)
        back = io.read_matrix(path)
        assert back.dtype == arr.dtype
        assert back.shape == arr.shape
        assert np.array_equal(back, arr)

    def test_complex_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        io.write_matrix(tmp_path / "c.mpst", arr)
        back = io.read_matrix(tmp_path / "c.mpst")
        assert back.dtype == np.complex128
        assert np.array_equal(back, arr)

    def test_integers_promote_to_float(self, tmp_path):
        io.write_matrix(tmp_path / "i.mpst", np.array([[1, 2]], dtype=np.int32))
        back = io.read_matrix(tmp_path / "i.mpst")
        assert back.dtype == np.float64

    def test_bad_magic_rejected(self, tmp_path):
        bad = tmp_path / "bad.mpst"
        bad.write_bytes(b"XXXX" + b"\0" * 28)
        with pytest.raises(ValueError, match="magic"):
            io.read_matrix(bad)

    def test_truncated_payload_rejected(self, tmp_path):
        path = io.write_matrix(tmp_path / "t.mpst", np.ones((4, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            io.read_matrix(path)

    def test_object_dtype_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unsupported dtype"):
            io.write_matrix(tmp_path / "o.mpst", np.array(["a", "b"]))


class TestCsv:
    def test_round_trip(self, tmp_path):
        rows = [[0, 1, 0.5], [1, 0, 1.25]]
        path = io.write_csv(tmp_path / "r.csv", ["sample_id", "nearest_idx", "ratio"], rows)
        header, back = io.read_csv(path)
        assert header == ["sample_id", "nearest_idx", "ratio"]
        assert back == [["0", "1", "0.5"], ["1", "0", "1.25"]]


class TestManifest:
    def test_checksums_cover_artifacts_but_not_manifest(self, tmp_path):
        io.write_matrix(tmp_path / "x.mpst", np.ones(3))
        (tmp_path / "sub").mkdir()
        io.write_csv(tmp_path / "sub" / "y.csv", ["a"], [[1]])
        manifest = io.write_manifest(tmp_path, {"kind": "demo"}, {"master": 7}, "0.1.0")
        assert set(manifest["files"]) == {"x.mpst", "sub/y.csv"}
        assert manifest["files"]["x.mpst"] == io.sha256_file(tmp_path / "x.mpst")
        on_disk = io.read_manifest(tmp_path)
        assert on_disk == manifest
        assert on_disk["seeds"] == {"master": 7}

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError):
            io.read_manifest(tmp_path)


class TestRunLock:
    def test_concurrent_writers_refused(self, tmp_path):
        with io.run_lock(tmp_path / "run"):
            with pytest.raises(ConfigError, match="locked"):
                with io.run_lock(tmp_path / "run"):
                    pass
        # released on exit
        with io.run_lock(tmp_path / "run"):
            pass

    def test_lock_released_on_error(self, tmp_path):
        with pytest.raises(RuntimeError):
            with io.run_lock(tmp_path / "run"):
                raise RuntimeError("boom")
        assert not (tmp_path / "run" / ".lock").exists()


class TestConfigHelpers:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            io.validate_keys({"a": 1, "zz": 2}, {"a", "b"}, "demo config")
        io.validate_keys({"a": 1}, {"a", "b"}, "demo config")

    def test_load_json_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n": 3}))
        assert io.load_json_config(path) == {"n": 3}
        with pytest.raises(ConfigError, match="not found"):
            io.load_json_config(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            io.load_json_config(bad)
        lst = tmp_path / "list.json"
        lst.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            io.load_json_config(lst)
