import numpy as np
import pytest

from segkit.errors import LoadError
from segkit.tensorio import (
    feat_bytes,
    parse_feat_bytes,
    read_feat,
    read_sections,
    write_feat,
    write_sections,
)


def test_roundtrip_bytes():
    array = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    out = parse_feat_bytes(feat_bytes(array))
    assert out.shape == (2, 3, 4)
    assert out.dtype == np.float32
    np.testing.assert_array_equal(out, array)


def test_serialization_is_deterministic():
    array = np.random.default_rng(0).normal(size=(5, 7)).astype(np.float32)
    assert feat_bytes(array) == feat_bytes(array)


def test_header_layout():
    # magic | version | rank | dims, all little-endian u32
    data = feat_bytes(np.zeros((2, 3), dtype=np.float32))
    assert data[:4] == b"FEAT"
    assert int.from_bytes(data[4:8], "little") == 1
    assert int.from_bytes(data[8:12], "little") == 2
    assert int.from_bytes(data[12:16], "little") == 2
    assert int.from_bytes(data[16:20], "little") == 3
    assert len(data) == 20 + 2 * 3 * 4


def test_file_roundtrip(tmp_path):
    path = tmp_path / "x.feat"
    array = np.linspace(-1, 1, 30, dtype=np.float32).reshape(5, 6)
    write_feat(path, array)
    np.testing.assert_array_equal(read_feat(path), array)
    # idempotent: rewriting produces identical bytes
    before = path.read_bytes()
    write_feat(path, array)
    assert path.read_bytes() == before


def test_truncated_payload_names_missing_bytes():
    data = feat_bytes(np.zeros(10, dtype=np.float32))
    with pytest.raises(LoadError, match="12 bytes missing"):
        parse_feat_bytes(data[:-12])


def test_truncated_header():
    with pytest.raises(LoadError, match="truncated header"):
        parse_feat_bytes(b"FEAT\x01")


def test_bad_magic():
    with pytest.raises(LoadError, match="bad magic"):
        parse_feat_bytes(b"NOPE" + bytes(20))


def test_trailing_bytes_rejected():
    data = feat_bytes(np.zeros(3, dtype=np.float32)) + b"xx"
    with pytest.raises(LoadError, match="trailing"):
        parse_feat_bytes(data)


def test_sections_roundtrip(tmp_path):
    path = tmp_path / "ckpt.fsec"
    tensors = {
        "a": np.arange(6, dtype=np.float32).reshape(2, 3),
        "b": np.array([1.5], dtype=np.float32),
    }
    write_sections(path, tensors)
    out = read_sections(path)
    assert set(out) == {"a", "b"}
    np.testing.assert_array_equal(out["a"], tensors["a"])
    np.testing.assert_array_equal(out["b"], tensors["b"])


def test_sections_reject_non_section_file(tmp_path):
    path = tmp_path / "bad.fsec"
    path.write_bytes(b"FEAT" + bytes(16))
    with pytest.raises(LoadError, match="not a section file"):
        read_sections(path)
