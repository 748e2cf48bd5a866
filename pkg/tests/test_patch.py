import numpy as np
import pytest

from adkit.data import Patch, decode_pgm, encode_pgm, read_patch, write_patch
from adkit.exceptions import FormatError


def _pgm(width, height, payload, maxval=255):
    return b"P5\n%d %d\n%d\n" % (width, height, maxval) + bytes(payload)


class TestPatch:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Patch.from_array(np.full((4, 4), 1.5))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Patch(4, 4, np.zeros((3, 4)))

    def test_quantization_rounds_half_up(self):
        # k/255 + half a step must round up to k + 1
        vals = np.array([[0.0, (0.5) / 255.0, (1.5) / 255.0, 1.0]])
        assert Patch.from_array(vals).quantized().tolist() == [[0, 1, 2, 255]]


class TestPgmCodec:
    def test_encode_matches_hand_built_bytes(self):
        q = np.array([[0, 128, 255], [7, 8, 9]], dtype=np.uint8)
        patch = Patch.from_array(q / 255.0)
        assert encode_pgm(patch) == _pgm(3, 2, [0, 128, 255, 7, 8, 9])

    def test_decode_hand_built_bytes(self):
        p = decode_pgm(_pgm(2, 2, [0, 51, 102, 255]))
        assert (p.width, p.height) == (2, 2)
        np.testing.assert_array_equal(p.quantized(), [[0, 51], [102, 255]])

    def test_round_trip_bit_exact(self, rng, tmp_path):
        for i in range(20):
            q = rng.integers(0, 256, size=(16, 16))
            patch = Patch.from_array(q / 255.0)
            path = tmp_path / f"p{i}.pgm"
            write_patch(patch, path)
            back = read_patch(path)
            np.testing.assert_array_equal(back.quantized(), q)
            assert encode_pgm(back) == path.read_bytes()

    @pytest.mark.parametrize(
        "data, field",
        [
            (b"P2\n2 2\n255\n" + bytes(4), "magic"),
            (b"P5\nx 2\n255\n" + bytes(4), "width"),
            (b"P5\n2 y\n255\n" + bytes(4), "height"),
            (b"P5\n2 2\n65535\n" + bytes(8), "maxval"),
            (b"P5\n2 2\n255\n" + bytes(3), "payload"),
            (b"P5\n2 2\n255\n" + bytes(5), "payload"),
            (b"P5\n# c\n2 2\n255\n" + bytes(4), "width"),
        ],
    )
    def test_malformed_names_field(self, data, field):
        with pytest.raises(FormatError, match=field):
            decode_pgm(data)
