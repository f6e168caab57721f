"""Configuration taxonomy and closed-form bound-state quantities.

A three-level system with one level replaced by a flat continuum comes in
nine variants: the transition topology (lambda, cascade, vee) times the
position of the continuum (upper, middle, lower).  Three of them couple both
bound levels to the continuum ("two-channel": lambda-upper, cascade-middle,
vee-lower); the other six couple one bound level to the continuum and the
other to it through a bound-bound coupling ``g`` ("one-channel").

Energies are in MHz with hbar = 1, so bound-continuum couplings ``V`` carry
MHz**0.5 and the linewidth is ``gamma = 2*pi*V**2``.

All functions accept a scalar energy or a numpy array of energies.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import (
    DegenerateDenominator,
    MismatchedStructure,
    MissingCoupling,
    NonPositiveLinewidth,
    PoleAtEnergy,
)

PI2 = math.pi**2

# |denominator| below POLE_RTOL * (size of the terms it is built from) is a pole
POLE_RTOL = 1e-12

CONVENTIONS = ("standard", "reversed")


class SystemKind(str, enum.Enum):
    LAMBDA = "lambda"
    CASCADE = "cascade"
    VEE = "vee"


class ContinuumPosition(str, enum.Enum):
    UPPER = "upper"
    MIDDLE = "middle"
    LOWER = "lower"


@dataclass(frozen=True)
class Layout:
    """Which levels are bound, which couple to the continuum, which pair has ``g``."""

    continuum: int
    bound: tuple[int, int]
    channels: tuple[int, ...]
    g_pair: tuple[int, int] | None

    @property
    def two_channel(self) -> bool:
        return len(self.channels) == 2

    @property
    def channel(self) -> int:
        """The continuum-coupled level of a one-channel layout."""
        if self.two_channel:
            raise MismatchedStructure("two-channel layout has no single channel")
        return self.channels[0]

    @property
    def dark(self) -> int:
        """The bound level reached only through ``g`` (one-channel layouts)."""
        if self.two_channel:
            raise MismatchedStructure("two-channel layout has no dark level")
        (j,) = [n for n in self.bound if n not in self.channels]
        return j


_L, _X, _V = SystemKind.LAMBDA, SystemKind.CASCADE, SystemKind.VEE
_U, _M, _D = ContinuumPosition.UPPER, ContinuumPosition.MIDDLE, ContinuumPosition.LOWER

LAYOUTS: dict[tuple[SystemKind, ContinuumPosition], Layout] = {
    (_L, _U): Layout(3, (1, 2), (1, 2), None),
    (_L, _M): Layout(2, (1, 3), (3,), (1, 3)),
    (_L, _D): Layout(1, (2, 3), (3,), (2, 3)),
    (_X, _U): Layout(3, (1, 2), (2,), (1, 2)),
    (_X, _M): Layout(2, (1, 3), (1, 3), None),
    (_X, _D): Layout(1, (2, 3), (2,), (2, 3)),
    (_V, _U): Layout(3, (1, 2), (1,), (1, 2)),
    (_V, _M): Layout(2, (1, 3), (1,), (1, 3)),
    (_V, _D): Layout(1, (2, 3), (2, 3), None),
}


def gamma_from_v(v: float) -> float:
    return 2.0 * math.pi * v * v


def v_from_gamma(gamma: float) -> float:
    return math.sqrt(gamma / (2.0 * math.pi))


def _parse_kind(value) -> SystemKind:
    try:
        return SystemKind(value)
    except ValueError:
        raise MismatchedStructure(f"unknown system kind {value!r}") from None


def _parse_position(value) -> ContinuumPosition:
    try:
        return ContinuumPosition(value)
    except ValueError:
        raise MismatchedStructure(f"unknown continuum position {value!r}") from None


def _level_map(raw: Mapping, what: str) -> dict[int, float]:
    out = {}
    for key, value in raw.items():
        try:
            out[int(key)] = float(value)
        except (TypeError, ValueError):
            raise MismatchedStructure(f"{what}: bad entry {key!r}: {value!r}") from None
    return out


@dataclass(frozen=True)
class ModelConfig:
    """One of the nine configurations with its bound energies and couplings.

    ``couplings`` maps each continuum-coupled bound level to its flat
    coupling ``V`` (> 0).  ``g`` is the bound-bound coupling, present exactly
    for the one-channel layouts.  Construction validates the structure.
    """

    kind: SystemKind
    position: ContinuumPosition
    bound_energies: Mapping[int, float]
    couplings: Mapping[int, float]
    g: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", _parse_kind(self.kind))
        object.__setattr__(self, "position", _parse_position(self.position))
        energies = _level_map(self.bound_energies, "bound_energies")
        couplings = _level_map(self.couplings, "couplings")
        layout = self.layout

        if set(energies) != set(layout.bound):
            raise MismatchedStructure(
                f"{self.label}: bound levels must be {list(layout.bound)}, got {sorted(energies)}"
            )
        for n, e in energies.items():
            if not math.isfinite(e):
                raise MismatchedStructure(f"{self.label}: energy of level {n} is not finite")

        extra = set(couplings) - set(layout.channels)
        if extra:
            raise MismatchedStructure(
                f"{self.label}: level(s) {sorted(extra)} have no continuum coupling in this layout"
            )
        for n in layout.channels:
            if n not in couplings or couplings[n] == 0.0:
                raise MissingCoupling(f"{self.label}: channel {n} needs a nonzero continuum coupling")
            if not math.isfinite(couplings[n]):
                raise MismatchedStructure(f"{self.label}: coupling of channel {n} is not finite")
            if couplings[n] < 0.0:
                raise NonPositiveLinewidth(f"{self.label}: channel {n} coupling V must be positive")

        g = self.g
        if layout.g_pair is None:
            if g is not None:
                raise MismatchedStructure(f"{self.label}: layout has no bound-bound coupling")
        else:
            if g is None:
                raise MissingCoupling(f"{self.label}: bound-bound coupling g is required")
            g = float(g)
            if not math.isfinite(g):
                raise MismatchedStructure(f"{self.label}: g is not finite")

        object.__setattr__(self, "bound_energies", {n: energies[n] for n in layout.bound})
        object.__setattr__(self, "couplings", {n: couplings[n] for n in layout.channels})
        object.__setattr__(self, "g", g)

    @property
    def layout(self) -> Layout:
        return LAYOUTS[(self.kind, self.position)]

    @property
    def label(self) -> str:
        return f"{self.kind.value}-{self.position.value}"

    @property
    def gammas(self) -> dict[int, float]:
        return {n: gamma_from_v(v) for n, v in self.couplings.items()}

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "position": self.position.value,
            "bound_energies": {str(n): e for n, e in self.bound_energies.items()},
            "bound_bound_coupling": self.g,
            "couplings": {str(n): {"V": v} for n, v in self.couplings.items()},
        }


def validate_config(raw: Mapping[str, Any]) -> ModelConfig:
    """Build a :class:`ModelConfig` from a parsed record.

    Each entry of ``raw["couplings"]`` is either a bare number (taken as
    ``V``) or a mapping holding exactly one of ``"V"`` or ``"gamma"``.
    """
    if not isinstance(raw, Mapping):
        raise MismatchedStructure("configuration must be a mapping")
    for key in ("kind", "position", "bound_energies"):
        if key not in raw:
            raise MismatchedStructure(f"configuration lacks {key!r}")

    couplings = {}
    for key, entry in (raw.get("couplings") or {}).items():
        if isinstance(entry, Mapping):
            given = [k for k in ("V", "gamma") if entry.get(k) is not None]
            if len(given) != 1:
                raise MismatchedStructure(f"channel {key}: give exactly one of 'V' or 'gamma'")
            try:
                value = float(entry[given[0]])
            except (TypeError, ValueError):
                raise MismatchedStructure(f"channel {key}: coupling is not a number") from None
            if given[0] == "gamma":
                if not value > 0.0:
                    raise NonPositiveLinewidth(f"channel {key}: gamma must be positive")
                value = v_from_gamma(value)
        else:
            try:
                value = float(entry)
            except (TypeError, ValueError):
                raise MismatchedStructure(f"channel {key}: coupling is not a number") from None
        couplings[key] = value

    g = raw.get("bound_bound_coupling", raw.get("g"))
    if isinstance(raw["bound_energies"], Mapping):
        energies = raw["bound_energies"]
    else:
        raise MismatchedStructure("bound_energies must map level index to energy")
    return ModelConfig(raw["kind"], raw["position"], energies, couplings, g)


def _prep(energy):
    arr = np.asarray(energy, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def detunings(config: ModelConfig, energy, convention: str = "standard") -> dict[int, Any]:
    """Detunings of every bound level; ``standard`` is ``energy - e_i``."""
    if convention not in CONVENTIONS:
        raise MismatchedStructure(f"unknown detuning convention {convention!r}")
    eps, scalar = _prep(energy)
    if convention == "standard":
        out = {n: eps - e for n, e in config.bound_energies.items()}
    else:
        out = {n: e - eps for n, e in config.bound_energies.items()}
    return {n: _out(d, scalar) for n, d in out.items()}


@dataclass
class _Terms:
    amps: dict[int, np.ndarray]       # unnormalized bound amplitudes
    amp_scale: dict[int, np.ndarray]  # size of the terms each amplitude is built from
    den: np.ndarray                   # common probability denominator
    z_num: np.ndarray
    z_den: np.ndarray
    z_den_scale: np.ndarray


def _terms(config: ModelConfig, eps: np.ndarray, convention: str = "standard") -> _Terms:
    lay = config.layout
    d = {n: np.asarray(x, dtype=float) for n, x in detunings(config, eps, convention).items()}
    size = {n: np.abs(eps) + abs(e) for n, e in config.bound_energies.items()}
    if lay.two_channel:
        i, j = lay.channels
        vi, vj = config.couplings[i], config.couplings[j]
        vi2, vj2 = vi * vi, vj * vj
        di, dj = d[i], d[j]
        z_den = di * vj2 + dj * vi2
        return _Terms(
            amps={i: vi * dj, j: vj * di},
            amp_scale={i: vi * size[j], j: vj * size[i]},
            den=di * di * dj * dj + PI2 * z_den * z_den,
            z_num=di * dj,
            z_den=z_den,
            z_den_scale=vi2 * size[j] + vj2 * size[i],
        )
    k, j = lay.channel, lay.dark
    v, g = config.couplings[k], config.g
    v2 = v * v
    dk, dj = d[k], d[j]
    n = dj * dk - g * g
    ones = np.ones_like(eps)
    return _Terms(
        amps={k: v * dj, j: v * g * ones},
        amp_scale={k: v * size[j], j: v * abs(g) * ones},
        den=PI2 * dj * dj * v2 * v2 + n * n,
        z_num=n,
        z_den=dj * v2,
        z_den_scale=v2 * size[j],
    )


def _z(terms: _Terms) -> tuple[np.ndarray, np.ndarray]:
    pole = np.abs(terms.z_den) <= POLE_RTOL * terms.z_den_scale
    with np.errstate(divide="ignore", invalid="ignore"):
        z = terms.z_num / terms.z_den
    z = np.where(pole, np.inf, z)
    return z, pole


def z_factor(config: ModelConfig, energy):
    """Weight ``Z`` of the delta-function part of the continuum amplitude.

    Raises :class:`PoleAtEnergy` if the denominator vanishes at any energy.
    """
    eps, scalar = _prep(energy)
    z, pole = _z(_terms(config, eps))
    if np.any(pole):
        raise PoleAtEnergy(f"{config.label}: Z has a pole at energy {np.asarray(eps)[pole].ravel()[0]!r}")
    return _out(z, scalar)


def _probabilities(terms: _Terms) -> dict[int, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        return {n: np.where(terms.den > 0.0, a * a / terms.den, np.nan) for n, a in terms.amps.items()}


def bound_probabilities(config: ModelConfig, energy, convention: str = "standard") -> dict[int, Any]:
    """Energy-normalized probability densities (1/MHz) of the two bound levels."""
    eps, scalar = _prep(energy)
    terms = _terms(config, eps, convention)
    if np.any(terms.den <= 0.0):
        raise DegenerateDenominator(f"{config.label}: probability denominator vanishes")
    return {n: _out(p, scalar) for n, p in _probabilities(terms).items()}


def _ratio(terms: _Terms, first: int, second: int) -> tuple[np.ndarray, np.ndarray]:
    top, bottom = terms.amps[first], terms.amps[second]
    pole = np.abs(bottom) <= POLE_RTOL * terms.amp_scale[second]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = top / bottom
    return np.where(pole, np.inf, ratio), pole


def amplitude_ratio(config: ModelConfig, energy):
    """Ratio of the lower-indexed bound amplitude to the higher-indexed one."""
    eps, scalar = _prep(energy)
    first, second = config.layout.bound
    ratio, pole = _ratio(_terms(config, eps), first, second)
    if np.any(pole):
        raise PoleAtEnergy(f"{config.label}: amplitude of level {second} vanishes")
    return _out(ratio, scalar)


def normalization_residual(config: ModelConfig, energy):
    """``|S**2 (pi**2 + Z**2) - 1|`` where ``S`` is the continuum-coupled combination.

    The amplitudes are rebuilt from the probabilities and the amplitude
    ratio.  Returns NaN exactly at a pole of ``Z``.
    """
    eps, scalar = _prep(energy)
    terms = _terms(config, eps)
    probs = _probabilities(terms)
    first, second = config.layout.bound
    ratio, _ = _ratio(terms, first, second)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big_first = probs[first] >= probs[second]
        a_first = np.where(big_first, np.sqrt(probs[first]), np.sqrt(probs[second]) * ratio)
        a_second = np.where(big_first, np.sqrt(probs[first]) / ratio, np.sqrt(probs[second]))
        amps = {first: a_first, second: a_second}
        s = sum(amps[n] * v for n, v in config.couplings.items())
        z, pole = _z(terms)
        res = np.abs(s * s * (PI2 + z * z) - 1.0)
    return _out(np.where(pole, np.nan, res), scalar)


def dressed_energies(config: ModelConfig) -> tuple[float, float]:
    """Roots of ``(e - e_j)(e - e_k) = g**2`` for a one-channel layout."""
    lay = config.layout
    if lay.two_channel:
        raise MismatchedStructure(f"{config.label}: no bound-bound coupling")
    ej, ek = config.bound_energies[lay.dark], config.bound_energies[lay.channel]
    mid = 0.5 * (ej + ek)
    half = math.sqrt(0.25 * (ej - ek) ** 2 + config.g**2)
    return mid - half, mid + half
