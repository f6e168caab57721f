"""Named parameter sets for the eighteen reference plots, and their sweeps.

Each preset scans one bound level's detuning while the other detuning is
held at ``fixed_detuning`` on the scanned level's resonance.  In the energy
picture used here the scanned level sits at 0 MHz, so the grid is both the
stationary-state energy and the scanned detuning, and the held level sits
at ``-fixed_detuning`` (standard convention, detuning = energy - level).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._pool import pmap
from .errors import UnknownPreset
from .lineshape import LineShapeParams, SpectralCurve, curve
from .model import ModelConfig, v_from_gamma

DEFAULT_GRID = (-10.0, 10.0, 2001)


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str
    position: str
    gammas: dict[int, float]
    swept_level: int
    fixed_level: int
    fixed_detuning: float
    q_list: tuple[dict[int, float], ...]
    g: float | None = None
    v_c: float | None = None
    grid_spec: tuple[float, float, int] = DEFAULT_GRID
    notes: str = ""

    def config(self, convention: str = "standard") -> ModelConfig:
        """Energy-picture configuration reproducing the held detuning."""
        sign = -1.0 if convention == "standard" else 1.0
        energies = {self.swept_level: 0.0, self.fixed_level: sign * self.fixed_detuning}
        couplings = {n: v_from_gamma(gam) for n, gam in self.gammas.items()}
        return ModelConfig(self.kind, self.position, energies, couplings, self.g)

    @property
    def params_list(self) -> list[LineShapeParams]:
        return [LineShapeParams(q, self.v_c) for q in self.q_list]

    @property
    def grid(self) -> np.ndarray:
        lo, hi, n = self.grid_spec
        return np.linspace(lo, hi, n)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "position": self.position,
            "gammas": {str(k): v for k, v in self.gammas.items()},
            "g": self.g,
            "v_c": self.v_c,
            "swept_level": self.swept_level,
            "fixed": {str(self.fixed_level): self.fixed_detuning},
            "q": [{str(k): v for k, v in q.items()} for q in self.q_list],
            "grid": list(self.grid_spec),
            "notes": self.notes,
        }


def _single(channel, values=(0.0, 1.0, 2.0, 3.0)):
    return tuple({channel: q} for q in values)


def _pairs(first, second, pairs):
    return tuple({first: a, second: b} for a, b in pairs)


_RAMP = ((0.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, 3.0))
_RAMP_FIRST = ((0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0))
_VC_UNIT = "v_c carries an MHz unit in the plot caption; it is dimensionless here."

_PRESETS = [
    Preset("fig4a", "lambda", "upper", {1: 0.5, 2: 0.4}, 1, 2, 1.0, _pairs(1, 2, _RAMP),
           notes="q=(0,0) reference curve followed by q1=1 with q2=1,2,3."),
    Preset("fig4b", "lambda", "middle", {3: 0.4}, 3, 1, 1.0, _single(3), g=0.2, v_c=0.1),
    Preset("fig4c", "lambda", "lower", {3: 0.4}, 3, 2, 1.0, _single(3), g=0.2, v_c=0.1),
    Preset("fig5a", "lambda", "upper", {1: 0.5, 2: 0.4}, 2, 1, 0.1, _pairs(1, 2, _RAMP),
           notes="Modified profile: level-1 detuning held, level-2 detuning scanned."),
    Preset("fig5b", "lambda", "middle", {3: 0.4}, 1, 3, 1.0, _single(3), g=0.2, v_c=0.2,
           notes="Modified profile: level-3 detuning held."),
    Preset("fig5c", "lambda", "lower", {3: 0.4}, 2, 3, 1.0, _single(3), g=0.2, v_c=0.1,
           notes="Modified profile: level-3 detuning held. " + _VC_UNIT),
    Preset("fig6a", "cascade", "upper", {2: 0.4}, 2, 1, 1.0, _single(2), g=0.2, v_c=0.1),
    Preset("fig6b", "cascade", "middle", {1: 0.1, 3: 0.7}, 3, 1, 1.0, _pairs(1, 3, _RAMP),
           notes="q=(0,0) reference curve followed by q1=1 with q3=1,2,3."),
    Preset("fig6c", "cascade", "lower", {2: 0.4}, 2, 3, 1.0, _single(2), g=0.2, v_c=0.1,
           notes=_VC_UNIT),
    Preset("fig7a", "cascade", "upper", {2: 0.4}, 1, 2, 1.0, _single(2), g=0.2, v_c=0.1,
           notes="The plot caption names the lambda-lower formula for this panel; "
                 "the cascade-upper line shape is used. " + _VC_UNIT),
    Preset("fig7b", "cascade", "middle", {1: 0.1, 3: 0.7}, 1, 3, 0.1, _pairs(1, 3, _RAMP),
           notes="Modified profile: level-3 detuning held at 0.1 MHz."),
    Preset("fig7c", "cascade", "lower", {2: 0.4}, 3, 2, 1.0, _single(2), g=0.2, v_c=0.1,
           notes="Modified profile: level-2 detuning held."),
    Preset("fig8a", "vee", "upper", {1: 0.4}, 1, 2, 1.0, _single(1), g=0.2, v_c=0.1),
    Preset("fig8b", "vee", "middle", {1: 0.4}, 1, 3, 1.0, _single(1), g=0.2, v_c=0.1),
    Preset("fig8c", "vee", "lower", {2: 0.5, 3: 0.4}, 2, 3, 1.0, _pairs(2, 3, _RAMP_FIRST),
           notes="q=(0,0) reference curve followed by q3=1 with q2=1,2,3."),
    Preset("fig9a", "vee", "upper", {1: 0.4}, 2, 1, 1.0, _single(1), g=0.2, v_c=0.2,
           notes="Modified profile: level-1 detuning held. " + _VC_UNIT),
    Preset("fig9b", "vee", "middle", {1: 0.4}, 3, 1, 1.0, _single(1), g=0.2, v_c=0.1,
           notes="Modified profile: level-1 detuning held. " + _VC_UNIT),
    Preset("fig9c", "vee", "lower", {2: 0.5, 3: 0.4}, 3, 2, 0.1, _pairs(2, 3, _RAMP_FIRST),
           notes="Modified profile: level-2 detuning held at 0.1 MHz."),
]

PRESETS: dict[str, Preset] = {p.name: p for p in _PRESETS}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"no preset named {name!r}") from None


def run_preset(name: str, convention: str = "standard", grid=None) -> list[SpectralCurve]:
    """One curve per asymmetry setting of the preset, over its grid."""
    p = preset(name)
    config = p.config(convention)
    energies = p.grid if grid is None else np.asarray(grid, dtype=float)

    def one(item):
        index, params = item
        meta = {
            "preset": p.name,
            "curve": index,
            "swept_level": p.swept_level,
            "fixed": {str(p.fixed_level): p.fixed_detuning},
        }
        return curve(config, params, energies, convention=convention, meta=meta)

    return pmap(one, enumerate(p.params_list))
