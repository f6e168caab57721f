"""Fano line shapes of the nine configurations.

The line shape ``R`` is the squared dipole amplitude into the stationary
state, normalized by the direct amplitude into the bare continuum.  It is
evaluated from the ``pi``/``V``/``Z`` form with denominators cleared, so the
removable singularity of ``Z`` at the dark-level resonance never surfaces.

Two-channel layouts take two asymmetry indices.  Each index multiplies its
own level's detuning and the *other* channel's coupling, so on resonance
with level ``i`` the line shape equals the other index squared.  One-channel
layouts take a single index ``q`` plus the dipole ratio ``v_c`` of the dark
level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import EmptyGrid, Fano3Error, MismatchedStructure, PoleAtEnergy
from .model import (
    PI2,
    POLE_RTOL,
    ModelConfig,
    _prep,
    _out,
    _probabilities,
    _terms,
    detunings,
)

PI = math.pi


class InvalidGrid(Fano3Error):
    kind = "InvalidGrid"


@dataclass(frozen=True)
class LineShapeParams:
    """Asymmetry indices keyed by channel level, plus the dark-level dipole ratio."""

    q: Mapping[int, float]
    v_c: float | None = None

    def __post_init__(self):
        try:
            q = {int(k): float(v) for k, v in self.q.items()}
        except (TypeError, ValueError, AttributeError):
            raise MismatchedStructure(f"bad asymmetry indices {self.q!r}") from None
        object.__setattr__(self, "q", q)
        if self.v_c is not None:
            object.__setattr__(self, "v_c", float(self.v_c))

    def check(self, config: ModelConfig) -> "LineShapeParams":
        lay = config.layout
        if set(self.q) != set(lay.channels):
            raise MismatchedStructure(
                f"{config.label}: asymmetry indices must be keyed by {list(lay.channels)}, got {sorted(self.q)}"
            )
        if lay.two_channel and self.v_c is not None:
            raise MismatchedStructure(f"{config.label}: v_c only applies to one-channel layouts")
        if not lay.two_channel and self.v_c is None:
            raise MismatchedStructure(f"{config.label}: v_c is required")
        return self

    @classmethod
    def from_raw(cls, raw: Mapping[str, Any], config: ModelConfig) -> "LineShapeParams":
        q = raw.get("q")
        if q is None:
            raise MismatchedStructure("line shape block lacks 'q'")
        if not isinstance(q, Mapping):
            if config.layout.two_channel:
                raise MismatchedStructure(f"{config.label}: needs one q per channel")
            q = {config.layout.channel: q}
        return cls(q, raw.get("v_c")).check(config)

    def to_dict(self) -> dict[str, Any]:
        return {"q": {str(k): v for k, v in self.q.items()}, "v_c": self.v_c}


def two_channel_amplitude(d_i, d_j, v_i, v_j, q_i, q_j):
    """Signed amplitude whose square is the two-channel line shape."""
    vi2, vj2 = v_i * v_i, v_j * v_j
    num = d_i * d_j + PI * q_i * d_i * vj2 + PI * q_j * d_j * vi2
    mix = d_i * vj2 + d_j * vi2
    den = d_i * d_i * d_j * d_j + PI2 * mix * mix
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / np.sqrt(den)


def one_channel_amplitude(d_dark, d_chan, v, g, q, v_c):
    """Signed amplitude whose square is the one-channel line shape.

    ``d_dark``/``d_chan`` are the detunings of the dark and continuum-coupled
    levels; the ``v_c`` term enters through the dark level's admixture.
    """
    n = d_dark * d_chan - g * g
    v2 = v * v
    num = PI * q * d_dark * v2 + n + PI * g * v_c * v
    den = PI2 * d_dark * d_dark * v2 * v2 + n * n
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / np.sqrt(den)


def two_channel_gamma_form(d_i, d_j, gamma_i, gamma_j, q_i, q_j):
    num = 2.0 * d_i * d_j + q_i * d_i * gamma_j + q_j * d_j * gamma_i
    mix = d_i * gamma_j + d_j * gamma_i
    return num * num / (4.0 * d_i * d_i * d_j * d_j + mix * mix)


def one_channel_gamma_form(d_dark, d_chan, gamma, g, q, v_c):
    n = d_dark * d_chan - g * g
    num = q * d_dark * gamma + 2.0 * n + g * v_c * np.sqrt(2.0 * PI * gamma)
    return num * num / (d_dark * d_dark * gamma * gamma + 4.0 * n * n)


def fano_profile(reduced, q):
    """Textbook single-resonance profile ``(q + e)**2 / (1 + e**2)``."""
    return (q + reduced) ** 2 / (1.0 + reduced * reduced)


def reduced_detuning(config: ModelConfig, energy, channel: int):
    """``2*Delta/gamma`` of a continuum-coupled level."""
    if channel not in config.couplings:
        raise MismatchedStructure(f"{config.label}: level {channel} has no continuum coupling")
    eps, scalar = _prep(energy)
    d = detunings(config, eps)[channel]
    v = config.couplings[channel]
    return _out(d / (PI * v * v), scalar)


def _singular(config: ModelConfig, eps: np.ndarray, d: dict) -> np.ndarray:
    lay = config.layout
    size = {n: np.abs(eps) + abs(e) for n, e in config.bound_energies.items()}
    small = {n: np.abs(d[n]) <= POLE_RTOL * size[n] for n in d}
    if lay.two_channel:
        i, j = lay.channels
        return small[i] & small[j]
    k, j = lay.channel, lay.dark
    g2 = config.g * config.g
    n = d[j] * d[k] - g2
    return small[j] & (np.abs(n) <= POLE_RTOL * (size[j] * size[k] + g2))


def _amplitude(config, params, eps, convention):
    lay = config.layout
    d = detunings(config, eps, convention)
    if lay.two_channel:
        i, j = lay.channels
        amp = two_channel_amplitude(
            d[i], d[j], config.couplings[i], config.couplings[j], params.q[i], params.q[j]
        )
    else:
        k, j = lay.channel, lay.dark
        amp = one_channel_amplitude(d[j], d[k], config.couplings[k], config.g, params.q[k], params.v_c)
    singular = _singular(config, eps, d)
    return np.where(singular, np.nan, amp), singular


def line_shape_amplitude(config: ModelConfig, params: LineShapeParams, energy, convention="standard"):
    """Signed transition amplitude; its square is :func:`line_shape`."""
    params.check(config)
    eps, scalar = _prep(energy)
    amp, singular = _amplitude(config, params, eps, convention)
    if np.any(singular):
        raise PoleAtEnergy(f"{config.label}: line shape is singular on the requested energies")
    return _out(amp, scalar)


def line_shape(config: ModelConfig, params: LineShapeParams, energy, convention="standard"):
    """Fano line shape ``R`` (dimensionless, >= 0)."""
    amp = line_shape_amplitude(config, params, energy, convention)
    return amp * amp


def line_shape_gamma_form(config: ModelConfig, params: LineShapeParams, energy):
    """The same line shape written in linewidths; kept for cross-checking."""
    params.check(config)
    lay = config.layout
    eps, scalar = _prep(energy)
    d = detunings(config, eps)
    gam = config.gammas
    with np.errstate(divide="ignore", invalid="ignore"):
        if lay.two_channel:
            i, j = lay.channels
            r = two_channel_gamma_form(d[i], d[j], gam[i], gam[j], params.q[i], params.q[j])
        else:
            k, j = lay.channel, lay.dark
            r = one_channel_gamma_form(d[j], d[k], gam[k], config.g, params.q[k], params.v_c)
    return _out(r, scalar)


@dataclass
class SpectralCurve:
    """Line shape (and optionally bound densities) sampled on an energy grid.

    Singular points are gaps, stored as NaN.
    """

    grid: np.ndarray
    r_values: np.ndarray
    prob_densities: dict[int, np.ndarray] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.r_values = np.asarray(self.r_values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size == 0:
            raise EmptyGrid("curve needs a non-empty one-dimensional grid")
        if np.any(np.diff(self.grid) <= 0.0):
            raise InvalidGrid("grid must be strictly increasing")
        if self.r_values.shape != self.grid.shape:
            raise InvalidGrid("line shape values do not match the grid")
        if np.any(self.r_values < 0.0):
            raise InvalidGrid("negative line shape value")
        if self.prob_densities is not None:
            self.prob_densities = {int(n): np.asarray(p, dtype=float) for n, p in self.prob_densities.items()}
            for n, p in self.prob_densities.items():
                if p.shape != self.grid.shape:
                    raise InvalidGrid(f"density of level {n} does not match the grid")

    @property
    def gaps(self) -> int:
        return int(np.count_nonzero(np.isnan(self.r_values)))


def energy_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo+step, ..., hi``."""
    if not step > 0.0:
        raise InvalidGrid("grid step must be positive")
    if not hi > lo:
        raise InvalidGrid("grid upper end must exceed the lower end")
    n = int(round((hi - lo) / step))
    if abs(lo + n * step - hi) > 1e-9 * max(1.0, abs(hi), abs(lo)):
        raise InvalidGrid(f"step {step} does not divide [{lo}, {hi}]")
    return np.linspace(lo, hi, n + 1)


def curve(
    config: ModelConfig,
    params: LineShapeParams,
    grid,
    convention: str = "standard",
    with_probabilities: bool = True,
    meta: Mapping[str, Any] | None = None,
) -> SpectralCurve:
    params.check(config)
    eps = np.asarray(grid, dtype=float)
    if eps.ndim != 1 or eps.size == 0:
        raise EmptyGrid("energy grid is empty")
    if np.any(np.diff(eps) <= 0.0):
        raise InvalidGrid("energy grid must be strictly increasing")
    amp, _ = _amplitude(config, params, eps, convention)
    r = amp * amp
    probs = None
    if with_probabilities:
        probs = _probabilities(_terms(config, eps, convention))
    info = {"config": config.to_dict(), "lineshape": params.to_dict(), "convention": convention}
    info.update(meta or {})
    out = SpectralCurve(eps, r, probs, info)
    out.meta["gaps"] = out.gaps
    return out
