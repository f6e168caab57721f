"""Tour of the line shapes: one preset per layout family, printed as a coarse table.

Run with ``python3 demos/01_line_shapes.py [outdir]``; with an output directory
every curve of every preset is also written as CSV.
"""
import sys
from pathlib import Path

import numpy as np

from fano3 import write_curve
from fano3.presets import preset, preset_names, run_preset

PROBE = np.array([-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0])


def table(name: str) -> None:
    p = preset(name)
    print(f"\n{name}: {p.kind}-{p.position}, scanning level {p.swept_level}, "
          f"level {p.fixed_level} held at {p.fixed_detuning} MHz")
    print("  q".ljust(22) + "".join(f"{e:>9.1f}" for e in PROBE))
    for c in run_preset(name, grid=PROBE):
        q = ",".join(f"{v:g}" for v in c.meta["lineshape"]["q"].values())
        print(f"  q=({q})".ljust(22) + "".join(f"{r:9.4f}" for r in c.r_values))


# Two continuum channels: the profile equals the other channel's q squared
# on each resonance, so the q=(0,0) row vanishes at both levels.
table("fig4a")

# One channel plus a dark level: the q=0 curve has two transparency zeros at
# the dressed energies, and v_c tilts the whole profile.
table("fig4b")
table("fig8c")

if len(sys.argv) > 1:
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    for name in preset_names():
        for i, c in enumerate(run_preset(name)):
            write_curve(c, out / f"{name}_{i}.csv")
    print(f"\nwrote {len(preset_names())} presets to {out}")
