"""Where the transparency dips sit, and how fast they narrow as g shrinks.

With q = 0 and v_c = 0 a one-channel line shape vanishes exactly at the two
dressed-state energies.  The dip at the dark-level side narrows roughly as
g**2, which is what makes these configurations hard to sample and to fit.
"""
import numpy as np
from scipy.optimize import brentq

from fano3 import LineShapeParams, ModelConfig, dressed_energies, line_shape, line_shape_amplitude, v_from_gamma

params = LineShapeParams({3: 0.0}, 0.0)
print(f"{'g':>6} {'dressed -':>12} {'dressed +':>12} {'zero found':>12} {'half width':>12}")
for g in (0.4, 0.2, 0.1, 0.05):
    config = ModelConfig("lambda", "middle", {1: -1.0, 3: 0.0}, {3: v_from_gamma(0.4)}, g)
    lo, hi = dressed_energies(config)

    def amp(e):
        return line_shape_amplitude(config, params, e)

    zero = brentq(amp, lo - 0.05, lo + 0.05, xtol=1e-14)
    # width of the dip: where R climbs back to half the nearby background
    fine = np.linspace(lo - 0.2, lo + 0.2, 40001)
    r = line_shape(config, params, fine)
    half = 0.5 * max(r[0], r[-1])
    below = fine[r < half]
    print(f"{g:6.2f} {lo:12.6f} {hi:12.6f} {zero:12.6f} {0.5 * np.ptp(below):12.2e}")
