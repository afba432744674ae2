import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallucbench.tensor_store import (
    AttentionTensor,
    CorruptFileError,
    EmbeddingMatrix,
    FeatureGrid,
    TensorFile,
    TensorFormatError,
    TensorValidationError,
    UnsupportedFormatError,
    read_jsonl,
    read_tensor,
    validate_attention,
    write_jsonl,
    write_tensor,
)


def _tensor(values, dims=None, **kw):
    arr = np.asarray(values, dtype=np.float32)
    if dims is not None:
        arr = arr.reshape(dims)
    return TensorFile.from_array(arr, **kw)


class TestCodec:
    def test_scalar_file_is_24_bytes(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([0.0], dims=(1,)))
        assert path.stat().st_size == 24

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], dims=(2, 3)))
        raw = path.read_bytes()
        assert raw[:4] == b"VHTN"
        version, = struct.unpack_from("<I", raw, 4)
        assert version == 1
        assert raw[8] == 0  # dtype float32
        ndim, = struct.unpack_from("<I", raw, 12)
        assert ndim == 2
        assert struct.unpack_from("<2I", raw, 16) == (2, 3)
        assert np.frombuffer(raw, dtype="<f4", offset=24).tolist() == [1, 2, 3, 4, 5, 6]

    def test_round_trip_identity(self, tmp_path):
        t = _tensor(np.arange(6, dtype=np.float32), dims=(2, 3))
        path = tmp_path / "t.vhtn"
        write_tensor(path, t)
        back = read_tensor(path)
        assert back.dims == t.dims
        assert back.values.tobytes() == t.values.tobytes()

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_round_trip_random_shapes(self, tmp_path_factory, data):
        ndim = data.draw(st.integers(1, 4))
        dims = tuple(data.draw(st.integers(1, 5)) for _ in range(ndim))
        flat = data.draw(
            st.lists(
                st.floats(width=32, allow_nan=False, allow_infinity=False),
                min_size=int(np.prod(dims)),
                max_size=int(np.prod(dims)),
            )
        )
        t = _tensor(flat, dims=dims)
        path = tmp_path_factory.mktemp("rt") / "t.vhtn"
        write_tensor(path, t)
        back = read_tensor(path)
        assert back.dims == dims
        assert back.values.tobytes() == t.values.tobytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([1.0], dims=(1,)))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedFormatError):
            read_tensor(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([1.0], dims=(1,)))
        raw = bytearray(path.read_bytes())
        struct.pack_into("<I", raw, 4, 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedFormatError):
            read_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([1.0, 2.0], dims=(2,)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-1])
        with pytest.raises(CorruptFileError):
            read_tensor(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "t.vhtn"
        write_tensor(path, _tensor([1.0], dims=(1,)))
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CorruptFileError):
            read_tensor(path)

    def test_golden_bytes_parse(self, tmp_path):
        # Hand-assembled file: fixed little-endian layout must parse the
        # same on every platform.
        raw = (
            b"VHTN"
            + struct.pack("<I", 1)
            + bytes([0, 0, 0, 0])
            + struct.pack("<I", 1)
            + struct.pack("<I", 2)
            + struct.pack("<2f", 1.5, -2.25)
        )
        path = tmp_path / "golden.vhtn"
        path.write_bytes(raw)
        t = read_tensor(path)
        assert t.dims == (2,)
        assert t.values.tolist() == [1.5, -2.25]

    def test_float64_rejected(self):
        with pytest.raises(TensorFormatError, match="float32"):
            TensorFile.from_array(np.zeros(3, dtype=np.float64))

    def test_dims_payload_mismatch(self):
        with pytest.raises(TensorFormatError):
            TensorFile(dims=(4,), values=np.zeros(3, dtype=np.float32))

    def test_nonfinite_needs_flag(self, tmp_path):
        with pytest.raises(TensorValidationError):
            _tensor([np.nan], dims=(1,))
        t = _tensor([np.nan, np.inf], dims=(2,), allow_nonfinite=True)
        path = tmp_path / "nf.vhtn"
        write_tensor(path, t)
        back = read_tensor(path)
        assert back.allow_nonfinite
        assert back.values.tobytes() == t.values.tobytes()

    def test_nonfinite_file_without_flag_rejected(self, tmp_path):
        path = tmp_path / "nf.vhtn"
        write_tensor(path, _tensor([1.0], dims=(1,)))
        raw = bytearray(path.read_bytes())
        raw[-4:] = struct.pack("<f", np.nan)
        path.write_bytes(bytes(raw))
        with pytest.raises(TensorValidationError):
            read_tensor(path)


class TestViews:
    def test_embedding_rejects_zero_row(self):
        values = np.ones((3, 4), dtype=np.float32)
        values[1] = 0.0
        with pytest.raises(TensorValidationError, match="frame index \\[1\\]"):
            EmbeddingMatrix(values=values)

    def test_embedding_shape_properties(self):
        m = EmbeddingMatrix(values=np.ones((3, 4), dtype=np.float32))
        assert (m.frames, m.dim) == (3, 4)

    def test_attention_shape_checks(self):
        with pytest.raises(TensorValidationError):
            AttentionTensor(values=np.ones((2, 3, 4), dtype=np.float32))
        with pytest.raises(TensorValidationError):
            AttentionTensor(values=np.ones((2, 1, 1), dtype=np.float32))
        a = AttentionTensor(values=np.full((2, 3, 3), 1 / 3, dtype=np.float32))
        assert (a.heads, a.seq_len) == (2, 3)

    def test_feature_grid(self):
        g = FeatureGrid(values=np.ones((2, 3, 5), dtype=np.float32))
        assert (g.height, g.width, g.channels) == (2, 3, 5)
        with pytest.raises(TensorValidationError):
            FeatureGrid(values=np.ones((2, 3), dtype=np.float32))


class TestValidateAttention:
    def test_uniform_rows_clean(self):
        a = AttentionTensor(values=np.full((2, 5, 5), 0.2, dtype=np.float32))
        assert validate_attention(a) == []

    def test_scaled_row_reported(self):
        values = np.full((2, 5, 5), 0.2, dtype=np.float64)
        values[1, 3] *= 2.0
        violations = validate_attention(AttentionTensor(values=values))
        assert any("head 1 row 3" in v for v in violations)

    def test_out_of_range_entry_reported(self):
        values = np.full((1, 3, 3), 1 / 3, dtype=np.float64)
        values[0, 0, 0] = -0.1
        values[0, 0, 1] = 1.0 - 1 / 3 + 0.1  # keep the row sum at 1
        violations = validate_attention(AttentionTensor(values=values))
        assert any("outside [0, 1]" in v for v in violations)
        assert not any("deviates" in v for v in violations)

    def test_random_softmax_rows_clean(self):
        # Oracle construction: exponentiate-and-normalize always yields
        # rows that sum to 1 with entries in [0, 1].
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((4, 10, 10))
        expd = np.exp(logits)
        soft = (expd / expd.sum(axis=2, keepdims=True)).astype(np.float32)
        assert validate_attention(AttentionTensor(values=soft)) == []


class TestManifests:
    def test_jsonl_round_trip(self, tmp_path):
        path = tmp_path / "m.jsonl"
        records = [{"b": 1, "a": "x"}, {"scene": "in a café"}]
        write_jsonl(path, records)
        assert read_jsonl(path) == records
        text = path.read_text(encoding="utf-8")
        assert text.count("\n") == 2
        assert "café" in text

    def test_jsonl_rejects_bad_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"ok": 1}\nnot json\n', encoding="utf-8")
        with pytest.raises(ValueError, match=":2:"):
            read_jsonl(path)
