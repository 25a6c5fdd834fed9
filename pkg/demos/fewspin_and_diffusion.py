"""A proton approaching a V_B defect, then the statistical-polarization dip.

Run: python3 demos/fewspin_and_diffusion.py
"""
from defectnmr import diffusion as df
from defectnmr import fewspin as fs
from defectnmr.figures import fig7_configs
from defectnmr.params import RunOptions

print("proton peak (Hz) vs height above the defect, m_s = +1 / -1")
for z in (3.5e-9, 5e-9, 10e-9, 20e-9):
    s = fs.proton_system((0.0, 0.0, z))
    up = fs.spectrum_of(fs.simulate_fid(s, 1)).peak
    down = fs.spectrum_of(fs.simulate_fid(s, -1)).peak
    print(f"  z = {z * 1e9:4.1f} nm: {up:9.1f} {down:9.1f}")

vb, nv = fig7_configs(RunOptions())
for name, cfg in (("V_B", vb), ("NV", nv)):
    curve = df.contrast_curve(cfg)
    print(f"{name}: dip depth {curve.peak_dip:.3f}, width {curve.dip_fwhm_hz() / 1e3:.1f} kHz")
