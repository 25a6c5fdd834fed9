"""Compare volume-normalized sensitivity and proton SNR across the presets.

Run: python3 demos/sensitivity_and_snr.py
"""
import numpy as np

from defectnmr.params import PRESET_NAMES, preset
from defectnmr.sensitivity import sensitivity_at
from defectnmr.snr import default_sample, sweep_snr

freqs = np.array([1e5, 1e6, 1e7])

print("eta (T Hz^-1/2 um^3/2) and optimal pulse count")
for name in PRESET_NAMES:
    pts = [sensitivity_at(f, preset(name)) for f in freqs]
    cells = "  ".join(f"{p.eta_vol:9.3g} (k={p.k:3d})" for p in pts)
    print(f"{name:14s} {cells}")

# SNR in 1 s of averaging, half-space sample vs a 1 nm film on top of the sensor
for label, sample in (("half-space", default_sample()), ("1 nm film", default_sample(1e-9))):
    print(f"\nSNR, {label}")
    for name in PRESET_NAMES:
        snr = sweep_snr(preset(name), sample, freqs)["snr"]
        print(f"{name:14s} " + "  ".join(f"{s:9.3g}" for s in snr))
