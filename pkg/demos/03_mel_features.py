"""Turn frames into the gain-invariant log-mel grids the models consume.

The grid is 64 mel bands x 37 time columns in [0, 1]. Because each grid is
normalised to its own peak before the log, recording level cancels out
completely: the same bark at half the gain produces the identical grid.
"""

import numpy as np

from barkspace import FeatureConfig, log_mel
from barkspace.features import mel_center_frequencies

SR = 22050
cfg = FeatureConfig()
centers = mel_center_frequencies(SR, cfg)


def tone_frame(freq):
    return np.sin(2 * np.pi * freq * np.arange(5120) / SR)


def ascii_render(grid, rows=16):
    """Coarse top-down view: one character per pooled cell."""
    shades = " .:-=+*#%@"
    pooled = grid.reshape(rows, grid.shape[0] // rows, -1).max(axis=1)
    lines = []
    for r in range(rows - 1, -1, -1):
        row = "".join(shades[int(v * (len(shades) - 1))] for v in pooled[r])
        lines.append(row)
    return "\n".join(lines)


for freq in (250.0, 1000.0, 4000.0):
    grid = log_mel(tone_frame(freq), cfg, SR)
    peak_band = int(grid.mean(axis=1).argmax())
    print(f"{freq:6.0f} Hz tone -> grid {grid.shape}, peak mel band {peak_band} "
          f"(center {centers[peak_band]:.0f} Hz)")

grid = log_mel(tone_frame(1000.0) + 0.2 * tone_frame(3000.0), cfg, SR)
half = log_mel(0.5 * (tone_frame(1000.0) + 0.2 * tone_frame(3000.0)), cfg, SR)
print(f"\ngain invariance: half-gain grid identical bit-for-bit: "
      f"{np.array_equal(grid, half)}")
print(f"value range [{grid.min():.2f}, {grid.max():.2f}] "
      f"(floor 0 = {abs(cfg.db_floor):.0f} dB below the per-grid peak)\n")
print("1 kHz + 3 kHz frame, frequency upward:")
print(ascii_render(grid))
