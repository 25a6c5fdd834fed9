"""Back-action broadening of the sample NMR line by a single shallow defect.

Run: python3 demos/backaction_linewidth.py
"""
from defectnmr import backaction as ba
from defectnmr.params import MAGIC_ANGLE

lattice_kw = {"n_sites": 300_000}


def nv(depth):
    return ba.DefectLayout.single(depth, MAGIC_ANGLE, 2.003)


for d in (1e-9, 5e-9):
    spec = ba.lineshape(nv(d), ba.SampleLattice(d, **lattice_kw))
    print(f"NV at {d * 1e9:.0f} nm: FWHM {spec.fwhm:8.1f} Hz, mean shift {spec.mean_shift:9.1f} Hz")

fit = ba.linewidth_vs_depth(nv, [1e-9, 2e-9, 3e-9, 5e-9], lattice_kw)
print(f"power law FWHM ~ d^{fit.exponent:.2f}")
