"""Discretized-continuum diagonalization, used to check the closed forms.

The continuum is cut to ``[lo, hi]`` and split into ``bins`` uniform bins of
width ``delta``.  Each bin is a state at its center energy, coupled to a
bound level by ``V*sqrt(delta)``.  Bound levels occupy the first rows of the
matrix in ascending level order.

Density estimate: with a flat coupling the extra density of states equals
the summed bound-level density, so eigenstate ``k`` with bound weights
``w_nk`` and total bound weight ``W_k`` gives ``rho_n(E_k) = w_nk /
(delta * (1 - W_k))``.  This is exact for an infinite uniform bin lattice;
the only systematic error left is the level shift from cutting the band,
which falls off as ``1/(hi - lo)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import ConvergenceFailure, GridOutsideSpan, MismatchedStructure, SpanTooNarrow
from .model import ModelConfig, bound_probabilities

# span must exceed this multiple of the widest spectral scale of the system
SPAN_FACTOR = 20.0
# query points must stay this fraction of the span away from either edge
EDGE_MARGIN = 0.10


@dataclass(frozen=True)
class DiscretizationSpec:
    lo: float
    hi: float
    bins: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise MismatchedStructure(f"span [{self.lo}, {self.hi}] is empty")
        if int(self.bins) != self.bins or self.bins < 2:
            raise MismatchedStructure(f"need at least 2 bins, got {self.bins}")
        object.__setattr__(self, "bins", int(self.bins))

    @classmethod
    def centered(cls, center: float, width: float, bins: int) -> "DiscretizationSpec":
        return cls(center - 0.5 * width, center + 0.5 * width, bins)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def delta(self) -> float:
        return self.width / self.bins

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.bins) + 0.5) * self.delta

    def central(self, fraction: float = 0.7) -> tuple[float, float]:
        pad = 0.5 * (1.0 - fraction) * self.width
        return self.lo + pad, self.hi - pad


def spectral_scale(config: ModelConfig) -> float:
    energies = list(config.bound_energies.values())
    scales = [max(config.gammas.values()), abs(energies[0] - energies[1])]
    if config.g is not None:
        scales.append(2.0 * abs(config.g))
    return max(scales)


def check_span(config: ModelConfig, spec: DiscretizationSpec) -> None:
    need = SPAN_FACTOR * spectral_scale(config)
    if spec.width < need:
        raise SpanTooNarrow(f"span width {spec.width:g} MHz < required {need:g} MHz for {config.label}")
    lo, hi = spec.central(1.0 - 2.0 * EDGE_MARGIN)
    for n, e in config.bound_energies.items():
        if not lo <= e <= hi:
            raise SpanTooNarrow(f"bound level {n} at {e:g} MHz is within 10% of the span edge")


def assemble_hamiltonian(config: ModelConfig, spec: DiscretizationSpec) -> np.ndarray:
    check_span(config, spec)
    levels = config.layout.bound
    nb = len(levels)
    dim = nb + spec.bins
    h = np.zeros((dim, dim))
    cont = np.arange(nb, dim)
    h[cont, cont] = spec.centers
    root_delta = math.sqrt(spec.delta)
    for row, n in enumerate(levels):
        h[row, row] = config.bound_energies[n]
        if n in config.couplings:
            h[row, nb:] = h[nb:, row] = config.couplings[n] * root_delta
    if config.g is not None:
        a, b = (levels.index(n) for n in config.layout.g_pair)
        h[a, b] = h[b, a] = config.g
    return h


@dataclass
class EigenData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    trace: float

    def orthonormality_residual(self) -> float:
        q = self.eigenvectors
        return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))

    def trace_residual(self) -> float:
        return abs(float(self.eigenvalues.sum()) - self.trace) / max(abs(self.trace), 1.0)


def diagonalize(matrix: np.ndarray) -> EigenData:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MismatchedStructure("matrix must be square")
    if not np.array_equal(m, m.T):
        raise MismatchedStructure("matrix must be symmetric")
    try:
        vals, vecs = scipy.linalg.eigh(m, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
    return EigenData(vals, vecs, float(np.trace(m)))


def bound_weights(raw: EigenData, levels: Sequence[int]) -> dict[int, np.ndarray]:
    """``|<n|E_k>|**2`` for every bound level ``n`` and eigenstate ``k``."""
    return {n: raw.eigenvectors[row] ** 2 for row, n in enumerate(levels)}


def state_densities(raw: EigenData, spec: DiscretizationSpec, levels: Sequence[int]) -> dict[int, np.ndarray]:
    """Bound-level density at each eigenvalue."""
    w = bound_weights(raw, levels)
    total = sum(w.values())
    cont = np.clip(1.0 - total, np.finfo(float).tiny, None)
    return {n: wn / (spec.delta * cont) for n, wn in w.items()}


def _check_query(spec: DiscretizationSpec, grid: np.ndarray) -> None:
    lo, hi = spec.central(1.0 - 2.0 * EDGE_MARGIN)
    if grid.size and (grid.min() < lo or grid.max() > hi):
        raise GridOutsideSpan(f"query energies must lie in [{lo:g}, {hi:g}] MHz")


def reconstruct_density(
    raw: EigenData, spec: DiscretizationSpec, query_grid, levels: Sequence[int]
) -> dict[int, np.ndarray]:
    """Bound densities interpolated linearly onto ``query_grid``.

    Features narrower than the eigenvalue spacing are not resolved between
    eigenvalues; :func:`compare` evaluates at the eigenvalues for that reason.
    """
    grid = np.asarray(query_grid, dtype=float)
    _check_query(spec, grid)
    dens = state_densities(raw, spec, levels)
    return {n: np.interp(grid, raw.eigenvalues, d) for n, d in dens.items()}


@dataclass
class OracleResult:
    eigenvalues: np.ndarray
    bound_weights: dict[int, np.ndarray]
    densities: dict[int, np.ndarray]
    grid: np.ndarray
    spec: DiscretizationSpec
    raw: EigenData = field(repr=False)

    def completeness_residual(self) -> float:
        return max(abs(float(w.sum()) - 1.0) for w in self.bound_weights.values())

    def sum_rule(self) -> dict[int, float]:
        """Trapezoid integral of each density over the eigenvalues.

        Only meaningful when every feature spans several eigenvalues; a
        dressed state narrower than a bin is sampled by one or two points
        and the integral overshoots.
        """
        levels = list(self.bound_weights)
        dens = state_densities(self.raw, self.spec, levels)
        return {n: float(scipy.integrate.trapezoid(d, self.eigenvalues)) for n, d in dens.items()}


def run_oracle(config: ModelConfig, spec: DiscretizationSpec, query_grid=None, central: float = 0.7) -> OracleResult:
    """Assemble, diagonalize and reconstruct densities.

    Without a query grid the densities are reported at the eigenvalues that
    fall in the central ``central`` fraction of the span.
    """
    levels = config.layout.bound
    raw = diagonalize(assemble_hamiltonian(config, spec))
    if query_grid is None:
        lo, hi = spec.central(central)
        keep = (raw.eigenvalues >= lo) & (raw.eigenvalues <= hi)
        grid = raw.eigenvalues[keep]
        dens = {n: d[keep] for n, d in state_densities(raw, spec, levels).items()}
    else:
        grid = np.asarray(query_grid, dtype=float)
        dens = reconstruct_density(raw, spec, grid, levels)
    return OracleResult(raw.eigenvalues, bound_weights(raw, levels), dens, grid, spec, raw)


@dataclass
class Comparison:
    """Closed form versus oracle, deviations scaled by each level's peak density."""

    label: str
    spec: DiscretizationSpec
    per_level: dict[int, float]
    max_deviation: float
    median_deviation: float
    n_points: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation < self.tolerance)

    def summary(self) -> str:
        levels = " ".join(f"level{n}={d:.3e}" for n, d in self.per_level.items())
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.label} bins={self.spec.bins} span=[{self.spec.lo:g},{self.spec.hi:g}] "
            f"points={self.n_points} max={self.max_deviation:.3e} median={self.median_deviation:.3e} "
            f"tol={self.tolerance:g} {levels}"
        )


def compare(
    config: ModelConfig,
    spec: DiscretizationSpec,
    grid=None,
    tol: float = 0.02,
    central: float = 0.7,
) -> Comparison:
    result = run_oracle(config, spec, grid, central)
    exact = bound_probabilities(config, result.grid)
    per_level, all_dev = {}, []
    for n, d in result.densities.items():
        dev = np.abs(d - exact[n]) / np.max(exact[n])
        per_level[n] = float(dev.max())
        all_dev.append(dev)
    dev = np.concatenate(all_dev)
    return Comparison(
        config.label, spec, per_level, float(dev.max()), float(np.median(dev)), int(result.grid.size), tol
    )


def refinement_pair(
    config: ModelConfig, spec: DiscretizationSpec, tol: float = 0.02
) -> tuple[Comparison, Comparison]:
    """Compare at ``spec`` and at half the bins over a span narrower by sqrt(2).

    Halving the bins alone leaves the band-cutoff shift untouched; shrinking
    both the bin width and the cutoff error is the path along which the
    discretization converges to the continuum.
    """
    center = 0.5 * (spec.lo + spec.hi)
    coarse = DiscretizationSpec.centered(center, spec.width / math.sqrt(2.0), spec.bins // 2)
    return compare(config, coarse, tol=tol), compare(config, spec, tol=tol)
