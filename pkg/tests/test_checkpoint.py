import numpy as np
import pytest

from cgunwarp.errors import FormatError
from cgunwarp.nn import CGUNet, CGUNetConfig, load_checkpoint, save_checkpoint
from cgunwarp.nn.checkpoint import decode_checkpoint, encode_checkpoint


def test_round_trip_bit_exact(tmp_path):
    m = CGUNet(CGUNetConfig.tiny(), seed=7)
    save_checkpoint(tmp_path / "m.cguc", m, {"step": 3})
    back, meta = load_checkpoint(tmp_path / "m.cguc")
    assert meta["step"] == 3
    assert back.config == m.config
    for k in m.params:
        assert back.params[k].data.tobytes() == m.params[k].data.tobytes()
    assert encode_checkpoint(back, {"step": 3}) == (tmp_path / "m.cguc").read_bytes()


@pytest.mark.parametrize(
    "mutate",
    [lambda d: b"XXXX" + d[4:], lambda d: d[:-1], lambda d: d + b"\0", lambda d: d[:10], lambda d: d[:8] + b"X" + d[9:]],
)
def test_corrupt_checkpoints_rejected(mutate):
    data = encode_checkpoint(CGUNet(CGUNetConfig.tiny()))
    with pytest.raises(FormatError):
        decode_checkpoint(mutate(data))


def test_loaded_model_predicts_identically(rng):
    m = CGUNet(CGUNetConfig.tiny(), seed=2)
    back, _ = decode_checkpoint(encode_checkpoint(m))
    x = rng.random((1, 3, 64, 48)).astype(np.float32)
    assert np.array_equal(m.forward(x)[0].data, back.forward(x)[0].data)
