"""Regenerates the committed metric fixtures.

The expected values printed here are frozen into metrics_test.cpp; rerun and
update both together if the arrays ever change.
"""
import numpy as np
from skimage.metrics import structural_similarity


def main():
    rng = np.random.default_rng(20240817)
    yy, xx = np.meshgrid(np.linspace(0, 1, 64), np.linspace(0, 1, 64), indexing="ij")
    ref = 0.5 + 0.3 * np.sin(6.0 * xx) * np.cos(4.0 * yy) + 0.15 * xx
    ref = np.clip(ref, 0.0, 1.0)
    noisy = np.clip(ref + 0.08 * rng.standard_normal(ref.shape), 0.0, 1.0)
    rough = np.clip(rng.uniform(size=ref.shape), 0.0, 1.0)

    np.save("ssim_ref.npy", ref)
    np.save("ssim_noisy.npy", noisy)
    np.save("ssim_rough.npy", rough)

    for name, img in [("noisy", noisy), ("rough", rough)]:
        s = structural_similarity(
            img, ref, win_size=11, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0)
        mse = float(np.mean((img - ref) ** 2))
        psnr = 10.0 * np.log10(1.0 / mse)
        print(f"{name}: ssim={s:.12f} mse={mse:.17g} psnr={psnr:.12f}")


if __name__ == "__main__":
    main()
