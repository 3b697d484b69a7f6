"""Reconstruction quality metrics: MAE, masked MAE, PSNR and SSIM.

Inputs are images normalized to [0,1] (float arrays, HxW or HxWx3).
SSIM follows the canonical parameterisation: 11x11 Gaussian window with
sigma 1.5 and stabilizers C1=0.01^2, C2=0.03^2 on unit dynamic range.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class MetricValue:
    mean: float
    std: float

    def as_dict(self):
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class MetricReport:
    """Mean +- std of each metric over an image set."""

    mae: MetricValue
    masked_mae: MetricValue
    psnr_db: MetricValue
    ssim: MetricValue

    def as_dict(self):
        return {
            "mae": self.mae.as_dict(),
            "masked_mae": self.masked_mae.as_dict(),
            "psnr_db": self.psnr_db.as_dict(),
            "ssim": self.ssim.as_dict(),
        }


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("image dimensions differ")
    return a, b


def mae(a, b) -> float:
    """Mean absolute per-pixel per-channel difference."""
    a, b = _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def masked_mae(a, b, mask) -> float:
    """MAE restricted to pixels where ``mask`` is set."""
    a, b = _check_pair(a, b)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != a.shape[:2]:
        raise ValueError("mask dimensions differ from images")
    if not mask.any():
        raise ValueError("undefined masked metric: empty mask")
    diff = np.abs(a - b)
    if diff.ndim == 3:
        return float(np.mean(diff[mask, :]))
    return float(np.mean(diff[mask]))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB, peak value 1.0.

    Identical images are reported as +infinity.
    """
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def to_gray(image) -> np.ndarray:
    """RGB to luma with 0.299/0.587/0.114 weights; grayscale passes through."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    r, g, b = LUMA_WEIGHTS
    return r * image[..., 0] + g * image[..., 1] + b * image[..., 2]


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _valid_filter(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = (len(kernel) - 1) // 2
    out = correlate1d(image, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[r:-r, r:-r] if r else out


def ssim(a, b) -> float:
    """Structural similarity, mean over valid local windows."""
    a, b = _check_pair(a, b)
    x = to_gray(a)
    y = to_gray(b)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = _valid_filter(x, kernel)
    mu_y = _valid_filter(y, kernel)
    xx = _valid_filter(x * x, kernel) - mu_x * mu_x
    yy = _valid_filter(y * y, kernel) - mu_y * mu_y
    xy = _valid_filter(x * y, kernel) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (xx + yy + SSIM_C2)
    return float(np.mean(num / den))


def aggregate(values) -> MetricValue:
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        return MetricValue(math.nan, math.nan)
    with np.errstate(invalid="ignore"):
        # infinite members (e.g. PSNR of identical images) make std nan
        return MetricValue(float(arr.mean()), float(arr.std()))


def report(pairs, masks) -> MetricReport:
    """Build a MetricReport from parallel lists of (a, b) pairs and masks."""
    maes, mmaes, psnrs, ssims = [], [], [], []
    for (a, b), mask in zip(pairs, masks):
        maes.append(mae(a, b))
        mmaes.append(masked_mae(a, b, mask))
        psnrs.append(psnr(a, b))
        ssims.append(ssim(a, b))
    return MetricReport(
        mae=aggregate(maes),
        masked_mae=aggregate(mmaes),
        psnr_db=aggregate(psnrs),
        ssim=aggregate(ssims),
    )
