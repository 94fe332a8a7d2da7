"""Turn one heartbeat into a Gramian Angular Field image.

Run from the repository root:  python3 demos/01_encode_heartbeat.py
Writes a PNG of each field type into demos/out/.
"""

# %%
from __future__ import annotations

from pathlib import Path

import numpy as np

from ecg_gaf import gaf
from ecg_gaf.signal_io import synthetic_heartbeats

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# %% A synthetic beat: 187 samples in [0, 1], zero-padded at the tail.
beats = synthetic_heartbeats([1, 1, 1, 1, 1], seed=0)
beat = beats[2]
print("label", beat.label, "range", beat.samples.min(), beat.samples.max())

# %% Rescale onto [-1, 1] and read off the polar angles.
ns = gaf.rescale(beat.samples)
print("angles in [0, pi]:", ns.angles.min() >= 0, ns.angles.max() <= np.pi)

# %% Full-resolution fields. GASF is symmetric, GADF antisymmetric.
s = gaf.gasf(ns).entries
d = gaf.gadf(ns).entries
print("gasf", s.shape, "symmetric:", np.array_equal(s, s.T))
print("gadf zero diagonal:", not np.diag(d).any())

# %% Downsample to the 32x32x3 network input, two ways.
for reduction in ("bilinear", "paa"):
    cfg = gaf.EncoderConfig(kind="gasf", reduction=reduction, target_size=32)
    img = gaf.encode(beat, cfg)
    print(reduction, img.pixels.shape, "value range", img.pixels.min().round(3), img.pixels.max().round(3))
    gaf.export_image(img, out / f"beat_{reduction}.png")

# %% And the difference field at full size, one channel.
cfg = gaf.EncoderConfig(kind="gadf", target_size=187, channels=1)
gaf.export_image(gaf.encode(beat, cfg), out / "beat_gadf_full.png")
print("images in", out)
