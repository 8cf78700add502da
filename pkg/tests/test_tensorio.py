import numpy as np
import pytest

from picnn.tensorio import save_tensor, load_tensor, TensorFormatError


def test_roundtrip_bit_exact_f64(tmp_path):
    rng = np.random.default_rng(7)
    arr = rng.normal(size=(3, 4, 5))
    path = tmp_path / "a.ptns"
    save_tensor(path, arr)
    back = load_tensor(path)
    assert back.dtype == np.float64
    assert back.shape == arr.shape
    assert np.array_equal(back.view(np.uint64), arr.view(np.uint64))


def test_roundtrip_f32_and_scalar(tmp_path):
    arr = np.float32(np.pi).reshape(())
    path = tmp_path / "s.ptns"
    save_tensor(path, arr)
    back = load_tensor(path)
    assert back.dtype == np.float32
    assert back.shape == ()
    assert back.view(np.uint32) == arr.view(np.uint32)


def test_header_layout(tmp_path):
    path = tmp_path / "h.ptns"
    save_tensor(path, np.zeros((2, 3)))
    blob = path.read_bytes()
    assert blob[:4] == b"PTNS"
    assert int.from_bytes(blob[4:8], "little") == 1      # version
    assert int.from_bytes(blob[8:12], "little") == 1     # f64 tag
    assert int.from_bytes(blob[12:16], "little") == 2    # ndim
    assert int.from_bytes(blob[16:20], "little") == 2
    assert int.from_bytes(blob[20:24], "little") == 3
    assert len(blob) == 24 + 6 * 8


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ptns"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(TensorFormatError):
        load_tensor(path)


def test_rejects_truncated_payload(tmp_path):
    path = tmp_path / "t.ptns"
    save_tensor(path, np.zeros(4))
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(TensorFormatError):
        load_tensor(path)


def test_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(TensorFormatError):
        save_tensor(tmp_path / "i.ptns", np.zeros(3, dtype=np.int32))
