"""Reference-quality metrics on [0, 1] frames: PSNR, SSIM, Charbonnier, RMSE."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Frame, require_same_geometry
from .errors import TooSmall


def psnr(a: Frame, b: Frame) -> float:
    """Peak signal-to-noise ratio in dB; identical frames give float('inf')."""
    require_same_geometry(a, b, "frames")
    mse = float(np.mean((a.intensity - b.intensity) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def ssim(a: Frame, b: Frame, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM over uniform ``window x window`` patches, stride 1.

    Uniform (not Gaussian) windows keep every patch statistic exactly
    hand-computable.  Variances are population variances over the patch;
    the dynamic range is 1.
    """
    require_same_geometry(a, b, "frames")
    if a.height < window or a.width < window:
        raise TooSmall(f"frames must be at least {window}x{window}")
    c1 = k1 * k1
    c2 = k2 * k2
    pa = sliding_window_view(a.intensity, (window, window))
    pb = sliding_window_view(b.intensity, (window, window))
    mu_a = pa.mean(axis=(2, 3))
    mu_b = pb.mean(axis=(2, 3))
    var_a = (pa * pa).mean(axis=(2, 3)) - mu_a * mu_a
    var_b = (pb * pb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (pa * pb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def charbonnier(a: Frame, b: Frame, epsilon: float = 1e-3) -> float:
    """Mean Charbonnier distance sqrt((a-b)^2 + epsilon^2)."""
    require_same_geometry(a, b, "frames")
    d = a.intensity - b.intensity
    return float(np.mean(np.sqrt(d * d + epsilon * epsilon)))


def rmse(a: Frame, b: Frame) -> float:
    require_same_geometry(a, b, "frames")
    d = a.intensity - b.intensity
    return float(np.sqrt(np.mean(d * d)))
