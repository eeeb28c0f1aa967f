import math

import numpy as np
import pytest

from evtm.core import Frame
from evtm.errors import GeometryMismatch, TooSmall
from evtm.metrics import charbonnier, psnr, rmse, ssim


def _texture(seed=0, shape=(16, 16), lo=0.2, hi=0.8):
    rng = np.random.default_rng(seed)
    return Frame(lo + (hi - lo) * rng.random(shape))


class TestPsnr:
    def test_identical_is_infinite(self):
        a = _texture()
        assert math.isinf(psnr(a, a))

    def test_uniform_offset_closed_form(self):
        a = Frame(np.full((8, 8), 0.5))
        b = Frame(np.full((8, 8), 0.6))
        assert psnr(a, b) == pytest.approx(20.0, rel=1e-9)

    def test_small_offset_closed_form(self):
        a = Frame(np.full((8, 8), 0.5))
        b = Frame(np.full((8, 8), 0.51))
        assert psnr(a, b) == pytest.approx(40.0, rel=1e-9)

    def test_geometry_mismatch(self):
        with pytest.raises(GeometryMismatch):
            psnr(Frame(np.zeros((2, 2))), Frame(np.zeros((3, 2))))


class TestSsim:
    def test_identical_is_one(self):
        a = _texture(1)
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_constant_frames_are_one(self):
        a = Frame(np.full((8, 8), 0.37))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_texture_reference_formula(self):
        a = _texture(2)
        b = Frame(1.0 - a.intensity)
        # direct formula on 8x8 patches, stride 1
        c1, c2 = 0.01**2, 0.03**2
        vals = []
        for i in range(a.height - 7):
            for j in range(a.width - 7):
                pa = a.intensity[i:i + 8, j:j + 8]
                pb = b.intensity[i:i + 8, j:j + 8]
                mu_a, mu_b = pa.mean(), pb.mean()
                va = (pa * pa).mean() - mu_a**2
                vb = (pb * pb).mean() - mu_b**2
                cov = (pa * pb).mean() - mu_a * mu_b
                vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                            / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2)))
        expected = float(np.mean(vals))
        got = ssim(a, b)
        assert got == pytest.approx(expected, rel=1e-9)
        assert got < 0.5

    def test_too_small_frame(self):
        with pytest.raises(TooSmall):
            ssim(Frame(np.zeros((4, 4))), Frame(np.zeros((4, 4))))

    def test_symmetry(self):
        a, b = _texture(3), _texture(4)
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)


class TestCharbonnier:
    def test_identical_gives_epsilon(self):
        a = _texture(5)
        assert charbonnier(a, a, epsilon=1e-3) == pytest.approx(1e-3, rel=1e-12)

    def test_uniform_offset_closed_form(self):
        a = Frame(np.full((4, 4), 0.4))
        b = Frame(np.full((4, 4), 0.5))
        assert charbonnier(a, b, epsilon=1e-3) == pytest.approx(
            math.sqrt(0.01 + 1e-6), rel=1e-9
        )

    def test_small_epsilon_approaches_mae(self):
        a, b = _texture(6), _texture(7)
        mae = float(np.mean(np.abs(a.intensity - b.intensity)))
        assert charbonnier(a, b, epsilon=1e-12) == pytest.approx(mae, rel=1e-9)


class TestRmse:
    def test_identical_is_zero(self):
        a = _texture(8)
        assert rmse(a, a) == 0.0

    def test_uniform_offset(self):
        a = Frame(np.full((4, 4), 0.3))
        b = Frame(np.full((4, 4), 0.4))
        assert rmse(a, b) == pytest.approx(0.1, rel=1e-12)

    def test_hand_2x2_case(self):
        a = Frame(np.zeros((2, 2)))
        b = Frame(np.array([[0.2, 0.0], [0.0, 0.0]]))
        assert rmse(a, b) == pytest.approx(0.1, rel=1e-12)


def test_all_metrics_symmetric():
    a, b = _texture(9), _texture(10)
    assert psnr(a, b) == pytest.approx(psnr(b, a), rel=1e-12)
    assert charbonnier(a, b) == pytest.approx(charbonnier(b, a), rel=1e-12)
    assert rmse(a, b) == pytest.approx(rmse(b, a), rel=1e-12)
