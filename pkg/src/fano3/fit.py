"""Least-squares recovery of line-shape parameters from sampled spectra.

The forward model is ``A * R(eps; theta) + B`` with ``R`` the closed-form
line shape, ``A`` an overall scale and ``B`` a flat baseline.  Parameters
are addressed by name:

``e<n>``      bound energy of level n (MHz)
``gamma<n>``  linewidth of channel n (MHz, > 0)
``g``         bound-bound coupling (MHz, one-channel layouts)
``q<n>``      asymmetry index of channel n
``v_c``       dark-level dipole ratio (one-channel layouts)
``A``, ``B``  scale and baseline

The solver is a bounded Levenberg-Marquardt loop: trial steps are projected
onto the bounds, accepted when the cost drops, and the damping is raised
otherwise.  Because the line shape is a ratio of polynomials in the energy,
a starting point can be computed from the data by linear least squares
(:func:`rational_start`); grid scans aimed at narrow resonances handle what
that misses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ._pool import max_workers, pmap
from .errors import MismatchedStructure, NotConverged
from .lineshape import LineShapeParams, one_channel_amplitude, two_channel_amplitude
from .model import ModelConfig, v_from_gamma

GTOL = 1e-10
XTOL = 1e-12
MAX_ITER = 500
# iteration budget of each exploratory local solve; the winner is polished to MAX_ITER
EXPLORE_ITER = 40
# rounds of scan-driven restarts, and rungs on the ladder of trial g values
REFINE_ROUNDS = 2
RUNGS = 3
FD_STEP = 1e-6
# residual assigned to points where the model is singular or undefined
PENALTY = 1e6


@dataclass
class Spectrum:
    """Measured or synthetic spectrum; ``sigma`` of None means unit weights."""

    energies: np.ndarray
    values: np.ndarray
    sigma: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.energies.ndim != 1 or self.energies.shape != self.values.shape:
            raise MismatchedStructure("spectrum energies and values must be matching 1-d arrays")
        if not (np.all(np.isfinite(self.energies)) and np.all(np.isfinite(self.values))):
            raise MismatchedStructure("spectrum contains non-finite entries")
        if np.unique(self.energies).size != self.energies.size:
            raise MismatchedStructure("spectrum energies must be distinct")
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.values.shape).copy()
            if not np.all(self.sigma > 0.0):
                raise MismatchedStructure("spectrum sigma must be positive")

    def __len__(self) -> int:
        return self.energies.size

    @property
    def weights(self) -> np.ndarray:
        return np.ones_like(self.values) if self.sigma is None else 1.0 / self.sigma


def parameter_names(config: ModelConfig) -> list[str]:
    lay = config.layout
    names = [f"e{n}" for n in lay.bound] + [f"gamma{n}" for n in lay.channels]
    if not lay.two_channel:
        names.append("g")
    names += [f"q{n}" for n in lay.channels]
    if not lay.two_channel:
        names.append("v_c")
    return names + ["A", "B"]


def pack(config: ModelConfig, params: LineShapeParams, scale: float = 1.0, baseline: float = 0.0) -> dict[str, float]:
    out = {f"e{n}": e for n, e in config.bound_energies.items()}
    out.update({f"gamma{n}": gm for n, gm in config.gammas.items()})
    if config.g is not None:
        out["g"] = config.g
    out.update({f"q{n}": q for n, q in params.q.items()})
    if params.v_c is not None:
        out["v_c"] = params.v_c
    out["A"], out["B"] = float(scale), float(baseline)
    return out


def unpack(template: ModelConfig, values: Mapping[str, float]) -> tuple[ModelConfig, LineShapeParams, float, float]:
    lay = template.layout
    config = ModelConfig(
        template.kind,
        template.position,
        {n: values[f"e{n}"] for n in lay.bound},
        {n: v_from_gamma(values[f"gamma{n}"]) for n in lay.channels},
        None if lay.two_channel else values["g"],
    )
    params = LineShapeParams({n: values[f"q{n}"] for n in lay.channels}, None if lay.two_channel else values["v_c"])
    return config, params, values["A"], values["B"]


def default_bounds(name: str, value: float, energies: np.ndarray) -> tuple[float, float]:
    span = float(np.ptp(energies)) if energies.size else 1.0
    if name.startswith("e"):
        return float(energies.min()) - span, float(energies.max()) + span
    if name.startswith("gamma"):
        return 1e-9, max(100.0, 10.0 * value)
    if name in ("A",):
        return -1e6, 1e6
    big = max(1e3, 10.0 * abs(value))
    return -big, big


@dataclass
class FitProblem:
    """Model family, starting point, free mask and bounds.

    ``free`` names the parameters to adjust; by default all are free.
    ``bounds`` overrides the default box for individual parameters.
    """

    config: ModelConfig
    params: LineShapeParams
    scale: float = 1.0
    baseline: float = 0.0
    free: Sequence[str] | None = None
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    convention: str = "standard"

    def __post_init__(self):
        self.params.check(self.config)
        self.names = parameter_names(self.config)
        self.start = pack(self.config, self.params, self.scale, self.baseline)
        free = list(self.names if self.free is None else self.free)
        unknown = [p for p in free if p not in self.names]
        if unknown:
            raise MismatchedStructure(f"{self.config.label}: unknown parameter(s) {unknown}; have {self.names}")
        if not free:
            raise MismatchedStructure("at least one parameter must be free")
        self.free = [p for p in self.names if p in free]
        for name, (lo, hi) in self.bounds.items():
            if name not in self.names:
                raise MismatchedStructure(f"bound given for unknown parameter {name!r}")
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise MismatchedStructure(f"bounds for {name} must be finite and ordered")
            if name.startswith("gamma") and lo <= 0.0:
                raise MismatchedStructure(f"bounds for {name} must be strictly positive")

    def box(self, spectrum: Spectrum) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = [], []
        for name in self.free:
            b = self.bounds.get(name) or default_bounds(name, self.start[name], spectrum.energies)
            lo.append(b[0])
            hi.append(b[1])
        return np.array(lo), np.array(hi)

    def theta0(self) -> np.ndarray:
        return np.array([self.start[p] for p in self.free])

    def full(self, theta: np.ndarray) -> dict[str, float]:
        values = dict(self.start)
        values.update(zip(self.free, (float(t) for t in theta)))
        return values


def _detuning(values, n, eps, convention):
    d = eps - values[f"e{n}"]
    return d if convention == "standard" else -d


def _coupling(gamma):
    """``v_from_gamma`` for scalars or arrays; NaN for negative widths."""
    with np.errstate(invalid="ignore"):
        return np.sqrt(gamma / (2.0 * math.pi))


def _shape(problem: FitProblem, values: Mapping[str, float], eps: np.ndarray) -> np.ndarray:
    """Line shape straight from the kernels, skipping configuration validation."""
    lay = problem.config.layout
    conv = problem.convention
    if lay.two_channel:
        i, j = lay.channels
        amp = two_channel_amplitude(
            _detuning(values, i, eps, conv),
            _detuning(values, j, eps, conv),
            _coupling(values[f"gamma{i}"]),
            _coupling(values[f"gamma{j}"]),
            values[f"q{i}"],
            values[f"q{j}"],
        )
    else:
        k, j = lay.channel, lay.dark
        amp = one_channel_amplitude(
            _detuning(values, j, eps, conv),
            _detuning(values, k, eps, conv),
            _coupling(values[f"gamma{k}"]),
            values["g"],
            values[f"q{k}"],
            values["v_c"],
        )
    return amp * amp


def model(problem: FitProblem, energies: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``A*R + B`` at ``theta``; non-finite where the line shape is singular."""
    values = problem.full(theta)
    with np.errstate(all="ignore"):
        return values["A"] * _shape(problem, values, np.asarray(energies, dtype=float)) + values["B"]


def residuals(problem: FitProblem, spectrum: Spectrum, theta) -> np.ndarray:
    """Weighted residuals ``(A*R + B - y)/sigma``; singular points get a large finite penalty."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(all="ignore"):
        r = (model(problem, spectrum.energies, theta) - spectrum.values) * spectrum.weights
    return np.where(np.isfinite(r), r, PENALTY)


def _steps(theta: np.ndarray) -> np.ndarray:
    return FD_STEP * np.maximum(np.abs(theta), 1.0)


def jacobian(problem: FitProblem, spectrum: Spectrum, theta, r0=None, box=None) -> np.ndarray:
    """Forward-difference Jacobian of :func:`residuals`, one column per free parameter.

    Steps that would leave the box are taken backwards instead.
    """
    theta = np.asarray(theta, dtype=float)
    if r0 is None:
        r0 = residuals(problem, spectrum, theta)
    return _fd(lambda t: residuals(problem, spectrum, t), theta, r0, None if box is None else box[1])


def central_jacobian(problem: FitProblem, spectrum: Spectrum, theta) -> np.ndarray:
    """Central-difference Jacobian, for checking :func:`jacobian`."""
    theta = np.asarray(theta, dtype=float)
    h = _steps(theta)
    jac = np.empty((len(spectrum), theta.size))
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h[i]
        down[i] -= h[i]
        jac[:, i] = (residuals(problem, spectrum, up) - residuals(problem, spectrum, down)) / (2.0 * h[i])
    return jac


def flat_columns(jac: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Boolean mask of Jacobian columns that are (numerically) zero."""
    norms = np.linalg.norm(jac, axis=0)
    top = norms.max() if norms.size else 0.0
    return norms <= rtol * max(top, 1.0)


@dataclass
class FitResult:
    best_params: dict[str, float]
    free: list[str]
    residual_norm: float
    iterations: int
    converged: bool
    covariance_estimate: np.ndarray
    gradient_norm: float
    stop_reason: str
    unidentifiable: list[str] = field(default_factory=list)
    cost_history: list[float] = field(default_factory=list, repr=False)

    @property
    def standard_errors(self) -> dict[str, float]:
        diag = np.diag(self.covariance_estimate)
        return {p: float(math.sqrt(d)) if d >= 0.0 else math.nan for p, d in zip(self.free, diag)}

    def config(self, template: ModelConfig):
        """Best-fit configuration, line-shape parameters, scale and baseline."""
        return unpack(template, self.best_params)

    def report(self) -> str:
        se = self.standard_errors
        lines = [
            f"converged={self.converged} reason={self.stop_reason} iterations={self.iterations} "
            f"residual_norm={self.residual_norm:.6g} gradient_norm={self.gradient_norm:.3g}"
        ]
        for p, v in self.best_params.items():
            tag = ""
            if p in self.unidentifiable:
                tag = "  unidentifiable"
            elif p in se:
                tag = f"  +- {se[p]:.3g}"
            elif p not in self.free:
                tag = "  fixed"
            lines.append(f"  {p:<8s} {v:.10g}{tag}")
        return "\n".join(lines)


class _Projected:
    """Residual over the nonlinear free parameters with free ``A``/``B`` solved linearly.

    For fixed shape parameters the best scale and baseline follow from a
    two-column weighted linear fit, so the damped iteration never has to
    walk them in from a poor start.
    """

    def __init__(self, problem: FitProblem, spectrum: Spectrum, theta: np.ndarray):
        self.problem = problem
        self.eps = spectrum.energies
        self.w = spectrum.weights
        self.yw = spectrum.values * self.w
        self.linear = [p for p in ("A", "B") if p in problem.free]
        self.names = [p for p in problem.free if p not in ("A", "B")]
        self.base = problem.full(theta)

    def x0(self, theta: np.ndarray) -> np.ndarray:
        values = self.problem.full(theta)
        return np.array([values[p] for p in self.names])

    def evaluate(self, x) -> tuple[np.ndarray, dict[str, float]]:
        values = dict(self.base)
        values.update(zip(self.names, (float(v) for v in x)))
        with np.errstate(all="ignore"):
            shape = _shape(self.problem, values, self.eps)
        if not np.all(np.isfinite(shape)):
            return np.full(self.eps.size, PENALTY), values
        target = self.yw.copy()
        cols = []
        if "A" in self.linear:
            cols.append(shape * self.w)
        else:
            target -= values["A"] * shape * self.w
        if "B" in self.linear:
            cols.append(self.w)
        else:
            target -= values["B"] * self.w
        if not cols:
            return -target, values
        if len(cols) == 2:
            # centered closed form of the two-column fit (shape*w, w)
            sw, w = cols
            ww = w @ w
            s_c = sw - w * ((sw @ w) / ww)
            ss = s_c @ s_c
            if ss > 0.0:
                a = (s_c @ target) / ss
                b = (target - a * sw) @ w / ww
                coef = np.array([a, b])
                values.update(zip(self.linear, (float(c) for c in coef)))
                return a * sw + b * w - target, values
        basis = np.column_stack(cols)
        coef = np.linalg.lstsq(basis, target, rcond=None)[0]
        values.update(zip(self.linear, (float(c) for c in coef)))
        return basis @ coef - target, values

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    def batch(self, xs: np.ndarray) -> np.ndarray:
        """Residual rows for each row of ``xs`` in one kernel call."""
        if self.linear != ["A", "B"]:
            return np.array([self(x) for x in xs])
        values = dict(self.base)
        for i, name in enumerate(self.names):
            values[name] = xs[:, i, None]
        with np.errstate(all="ignore"):
            shapes = _shape(self.problem, values, self.eps)
        sw = shapes * self.w
        w = self.w
        ww = w @ w
        s_c = sw - np.outer(sw @ w / ww, w)
        ss = np.einsum("mn,mn->m", s_c, s_c)
        with np.errstate(all="ignore"):
            a = (s_c @ self.yw) / ss
            b = (self.yw @ w - a * (sw @ w)) / ww
        r = a[:, None] * sw + b[:, None] * w - self.yw
        bad = ~np.all(np.isfinite(r), axis=1) | (ss <= 0.0)
        for i in np.flatnonzero(bad):
            r[i] = self(xs[i])
        return r

    def batch_cost(self, shapes: np.ndarray, values: Mapping[str, float]) -> np.ndarray:
        """Projected cost for each row of ``shapes`` (candidate line shapes).

        Uses the normal-equation form of the projection, which loses a few
        digits to cancellation; it ranks candidates, callers re-evaluate the
        winner with :meth:`evaluate`.
        """
        rows = shapes * self.w
        w, yw = self.w, self.yw
        fit_a, fit_b = "A" in self.linear, "B" in self.linear
        if fit_a and fit_b:
            s11 = np.einsum("mn,mn->m", rows, rows)
            s12, b1 = rows @ w, rows @ yw
            s22, b2, yy = w @ w, w @ yw, yw @ yw
            det = s11 * s22 - s12 * s12
            with np.errstate(all="ignore"):
                cost = yy - (s22 * b1 * b1 - 2.0 * s12 * b1 * b2 + s11 * b2 * b2) / det
        elif fit_a:
            target = yw - values["B"] * w
            with np.errstate(all="ignore"):
                cost = target @ target - (rows @ target) ** 2 / np.einsum("mn,mn->m", rows, rows)
        else:
            target = yw[None, :] - values["A"] * rows
            if fit_b:
                cost = np.einsum("mn,mn->m", target, target) - (target @ w) ** 2 / (w @ w)
            else:
                target = target - values["B"] * w
                cost = np.einsum("mn,mn->m", target, target)
        cost = np.where(np.isfinite(cost), np.maximum(cost, 0.0), np.inf)
        return cost


def _fd(fun, x: np.ndarray, r0: np.ndarray, hi: np.ndarray | None = None) -> np.ndarray:
    h = _steps(x)
    if hi is not None:
        h = np.where(x + h > hi, -h, h)
    points = x + np.diag(h)
    if hasattr(fun, "batch"):
        rows = fun.batch(points)
    else:
        rows = np.array([fun(t) for t in points])
    return ((rows - r0) / h[:, None]).T


def _lm(fun, x: np.ndarray, lo: np.ndarray, hi: np.ndarray, max_iter: int):
    """Bounded Levenberg-Marquardt on ``fun``; returns the final state and history."""
    x = np.clip(x, lo, hi)
    r = fun(x)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    reason, grad_norm, it = "max_iter", math.inf, 0
    for it in range(1, max_iter + 1):
        jac = _fd(fun, x, r, hi)
        grad = jac.T @ r
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < GTOL:
            reason = "gradient"
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj)
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1.0))
        cap = 0.5 * np.maximum(np.abs(x), 0.5)
        improved = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            # keep each move within half the parameter's own magnitude
            ratio = np.max(np.abs(step) / cap)
            if ratio > 1.0:
                step = step / ratio
            trial = np.clip(x + step, lo, hi)
            if np.linalg.norm(trial - x) < XTOL * (np.linalg.norm(x) + XTOL):
                break
            r_new = fun(trial)
            c_new = float(r_new @ r_new)
            if c_new < cost:
                x, r, cost = trial, r_new, c_new
                history.append(cost)
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 4.0
        if not improved:
            reason = "step"
            break
    return x, cost, it, reason, grad_norm, history


def _scan(proj: _Projected, x: np.ndarray, cost: float, axes: dict[str, np.ndarray]) -> np.ndarray | None:
    """Grid search over the named parameters, others held at ``x``.

    Every combination of the candidate values in ``axes`` is evaluated in
    batches, with scale and baseline projected out.  Returns the best point
    if it beats ``cost``, else None.
    """
    _, values = proj.evaluate(x)
    names = list(axes)
    mesh = [m.ravel() for m in np.meshgrid(*axes.values(), indexing="ij")]
    best_cost, best_at = cost, None
    for chunk in np.array_split(np.arange(mesh[0].size), max(1, mesh[0].size // 256)):
        trial = dict(values)
        for name, m in zip(names, mesh):
            trial[name] = m[chunk, None]
        with np.errstate(all="ignore"):
            costs = proj.batch_cost(_shape(proj.problem, trial, proj.eps), values)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost, best_at = costs[i], chunk[i]
    if best_at is None:
        return None
    out = x.copy()
    for name, m in zip(names, mesh):
        out[proj.names.index(name)] = m[best_at]
    return out if float(np.sum(proj(out) ** 2)) < cost else None


def _coarse_energies(proj: _Projected, x: np.ndarray) -> np.ndarray:
    """Place the free bound energies on a coarse grid over the data range."""
    names = [p for p in proj.names if p.startswith("e")]
    if not names:
        return x
    eps = proj.eps
    cands = np.linspace(eps.min(), eps.max(), 65 if len(names) == 2 else 257)
    axes = {p: np.append(cands, x[proj.names.index(p)]) for p in names}
    cost = float(np.sum(proj(x) ** 2))
    moved = _scan(proj, x, cost, axes)
    return x if moved is None else moved


def _square_root(m: np.ndarray, d: np.ndarray):
    """Split ``m`` as ``a*p**2 + b*d`` with ``p`` monic; ``m``, ``d`` of degree 2 or 4.

    ``d`` is monic.  Requiring ``m - b*d`` to be a scaled perfect square
    gives polynomial conditions on ``b``; every real root is returned as a
    candidate ``(a, b, p)``.
    """
    poly = np.poly1d
    a = poly([-1.0, m[0]])
    t = [poly([-d[k], m[k]]) for k in range(1, len(m))]
    if len(m) == 3:
        conditions = [t[0] * t[0] - 4.0 * a * t[1]]
    else:
        t3, t2, t1, t0 = t
        inner = 4.0 * a * t2 - t3 * t3
        conditions = [8.0 * a * a * t1 - t3 * inner, inner * inner - 64.0 * a * a * a * t0]
    out = []
    for root in np.concatenate([c.roots for c in conditions]):
        if abs(root.imag) > 1e-6 * max(1.0, abs(root)):
            continue
        b = float(root.real)
        amp = m[0] - b
        if amp == 0.0:
            continue
        p1 = (m[1] - b * d[1]) / (2.0 * amp)
        if len(m) == 3:
            out.append((amp, b, np.array([1.0, p1])))
        else:
            p0 = ((m[2] - b * d[2]) / amp - p1 * p1) / 2.0
            out.append((amp, b, np.array([1.0, p1, p0])))
    return out


def _rational_fit(eps, y, w, degree: int, rounds: int):
    """Fit ``y = a*p**2/d + b`` by reweighted linear least squares on ``y*d = m``.

    Works on energies mapped to [-1, 1].  Returns the lower-half-plane roots
    of ``d`` and the numerator ``(a, b, p)`` in the original energy units,
    or None when ``d`` has no complex roots.
    """
    center, half = 0.5 * (eps.min() + eps.max()), 0.5 * float(np.ptp(eps))
    x = (eps - center) / half
    powers = np.vander(x, degree + 1)
    design = np.hstack([y[:, None] * powers[:, 1:], -powers])
    d_prev = np.ones_like(x)
    for _ in range(rounds):
        wt = w / d_prev
        sol = np.linalg.lstsq(design * wt[:, None], -(y * powers[:, 0]) * wt, rcond=None)[0]
        d = np.concatenate([[1.0], sol[:degree]])
        d_prev = np.abs(np.polyval(d, x))
        if not np.all(np.isfinite(d_prev)) or d_prev.max() == 0.0:
            return None
        d_prev = np.maximum(d_prev / np.median(d_prev), 1e-12)
    roots = np.roots(d)
    # complex roots of a real polynomial come in conjugate pairs
    lower = roots[roots.imag < -1e-14 * max(1.0, float(np.max(np.abs(roots))))]
    if lower.size == 0:
        return None
    best = None
    for amp, b, p in _square_root(sol[degree:], d):
        with np.errstate(all="ignore"):
            fitted = amp * np.polyval(p, x) ** 2 / np.polyval(d, x) + b
        cost = float(np.sum(((fitted - y) * w) ** 2))
        if np.isfinite(cost) and (best is None or cost < best[0]):
            best = (cost, amp, b, p)
    if best is None:
        return None
    _, amp, b, p = best
    p_eps = np.poly1d(p)(np.poly1d([1.0 / half, -center / half])) * half ** (degree // 2)
    return lower * half + center, float(amp), float(b), p_eps.coeffs.real


def rational_start(problem: FitProblem, spectrum: Spectrum, rounds: int = 8) -> dict[str, float] | None:
    """Starting values read off the data without any initial guess.

    Both line-shape families are ratios ``P(eps)**2 / |Q(eps)|**2`` with
    ``P`` a real and ``Q`` a complex monic quadratic.  The coefficients of
    ``Q`` map one-to-one onto the bound energies, the linewidths and ``g``;
    those of ``P`` then give the asymmetry indices and ``v_c``.  With
    ``D = |Q|**2`` the data obey ``y*D = M`` for a quartic ``M``, which is
    linear in the unknown coefficients; the fit is repeated with weights
    ``1/D`` from the previous round so that it approaches ordinary least
    squares.

    Noise can hide a resonance much narrower than the sample spacing.  For
    one-channel layouts the fallback is then a single Fano resonance for the
    channel level, with the dark level put at the largest misfit and ``g``,
    ``v_c`` taken from the problem's start.  Returns None if neither works.
    """
    eps, y, w = spectrum.energies, spectrum.values, spectrum.weights
    if np.ptp(eps) == 0.0 or eps.size < 10:
        return None
    lay = problem.config.layout
    sign = 1.0 if problem.convention == "standard" else -1.0
    full = _rational_fit(eps, y, w, 4, rounds)
    if full is not None and full[0].size == 2:
        poles, amp, b, p = full
        c1, c0 = -(poles[0] + poles[1]), poles[0] * poles[1]
        p1, p0 = p[1], p[2]
        out = {"A": amp, "B": b}
        if lay.two_channel:
            i, j = lay.channels
            root = math.sqrt(max(c1.real * c1.real - 4.0 * c0.real, 0.0))
            ei, ej = 0.5 * (-c1.real - root), 0.5 * (-c1.real + root)
            # v_i**2 + v_j**2 and e_i*v_j**2 + e_j*v_i**2 from the imaginary parts
            vi2, vj2 = np.linalg.lstsq(
                np.array([[1.0, 1.0], [ej, ei]]), np.array([c1.imag, -c0.imag]) / math.pi, rcond=None
            )[0]
            vi2, vj2 = max(vi2, 1e-9), max(vj2, 1e-9)
            mat = sign * math.pi * np.array([[vj2, vi2], [-vj2 * ei, -vi2 * ej]])
            qi, qj = np.linalg.lstsq(mat, np.array([p1 + ei + ej, p0 - ei * ej]), rcond=None)[0]
            out.update({f"e{i}": ei, f"e{j}": ej, f"gamma{i}": 2 * math.pi * vi2, f"gamma{j}": 2 * math.pi * vj2})
            out.update({f"q{i}": qi, f"q{j}": qj})
        else:
            j, k = lay.dark, lay.channel
            v2 = c1.imag / math.pi
            ej = -c0.imag / (math.pi * v2)
            ek = -c1.real - ej
            g = math.copysign(math.sqrt(max(ej * ek - c0.real, 1e-12)), problem.start["g"] or 1.0)
            q = (p1 + ej + ek) / (sign * math.pi * v2)
            v_c = (p0 - ej * ek + g * g + sign * math.pi * q * v2 * ej) / (math.pi * g * math.sqrt(v2))
            out.update({f"e{j}": ej, f"e{k}": ek, f"gamma{k}": 2 * math.pi * v2, "g": g, f"q{k}": q, "v_c": v_c})
    elif not lay.two_channel:
        single = _rational_fit(eps, y, w, 2, rounds)
        if single is None:
            return None
        (pole,), amp, b, p = single
        j, k = lay.dark, lay.channel
        v2 = -pole.imag / math.pi
        ek = pole.real
        q = (p[1] + ek) / (sign * math.pi * v2)
        with np.errstate(all="ignore"):
            fano = amp * (eps - ek + sign * math.pi * q * v2) ** 2 / ((eps - ek) ** 2 + (math.pi * v2) ** 2) + b
        ej = eps[np.argmax(np.abs((fano - y) * w))]
        g = problem.start["g"] or 0.01 * float(np.ptp(eps))
        out = {"A": amp, "B": b, f"e{j}": ej, f"e{k}": ek, f"gamma{k}": 2 * math.pi * v2, "g": g, f"q{k}": q}
        out["v_c"] = problem.start["v_c"]
    else:
        return None
    out = {key: float(val) for key, val in out.items()}
    return out if all(math.isfinite(v) for v in out.values()) else None


def _guided_scan(proj: _Projected, x: np.ndarray, cost: float) -> np.ndarray | None:
    """Look for a missed narrow resonance where the residuals are largest.

    Next to a dark level the dressed state can be narrower than the sample
    spacing, so the cost is flat in the dark-level energy except within a
    fraction of a spacing of the right value.  A fit that has missed it
    leaves its largest residuals there; the dark energy is scanned finely
    around those points together with a ladder of ``g`` values.
    """
    lay = proj.problem.config.layout
    if lay.two_channel:
        return None
    dark = f"e{lay.dark}"
    if dark not in proj.names:
        return None
    r = proj(x)
    eps = proj.eps
    spacing = float(np.min(np.diff(eps)))
    top = eps[np.argsort(-np.abs(r))[:3]]
    grid = np.unique((top[:, None] + spacing * np.linspace(-1.5, 1.5, 49)[None, :]).ravel())
    axes = {dark: grid}
    if "g" in proj.names:
        _, values = proj.evaluate(x)
        ladder = np.geomspace(np.ptp(eps) / 2000.0, np.ptp(eps) / 20.0, 13)
        axes["g"] = np.unique(np.concatenate([ladder, -ladder, [values["g"], proj.problem.start["g"]]]))
    return _scan(proj, x, cost, axes)


def _scan_coupling(proj: _Projected, x: np.ndarray, rungs: int = RUNGS) -> list[np.ndarray]:
    """Candidate points along the curve of constant dressed energies.

    The data fix the two dressed energies much better than ``g`` itself, and
    a fit can settle with ``g`` near zero and the bare energies sitting on
    the dressed ones.  The way out runs along the curve that keeps the
    dressed energies in place while ``g`` grows.  Returns, for each rung of
    a geometric ladder of ``g`` values, the point with the best ``v_c``; the
    caller runs a local solve from each because the cost is nearly flat
    along the ladder until the narrow resonance lines up.
    """
    lay = proj.problem.config.layout
    if lay.two_channel:
        return []
    j, k = lay.dark, lay.channel
    names = [f"e{j}", f"e{k}", "g"]
    if not all(n in proj.names for n in names):
        return []
    _, values = proj.evaluate(x)
    ej, ek, g = values[f"e{j}"], values[f"e{k}"], values["g"]
    mid = 0.5 * (ej + ek)
    split = math.hypot(ej - ek, 2.0 * g)
    size = max(abs(proj.problem.start["g"]), abs(g), 1e-6)
    sign = math.copysign(1.0, g if g != 0.0 else proj.problem.start["g"])
    ladder = sign * size * np.geomspace(1.0 / 16.0, 4.0, rungs)
    ladder = ladder[(2.0 * np.abs(ladder) < split) & ~np.isclose(ladder, g, rtol=0.05)]
    if ladder.size == 0:
        return []
    side = 1.0 if ej >= ek else -1.0
    vc = np.array([values["v_c"]])
    if "v_c" in proj.names:
        names.append("v_c")
        vc_size = max(abs(proj.problem.start["v_c"]), abs(values["v_c"]), 1e-3)
        vc = np.append(np.linspace(-4.0, 4.0, 33) * vc_size, values["v_c"])
    gs, vcs = (m.ravel() for m in np.meshgrid(ladder, vc, indexing="ij"))
    half = 0.5 * np.sqrt(split * split - 4.0 * gs * gs)
    trial = dict(values)
    trial[f"e{j}"] = (mid + side * half)[:, None]
    trial[f"e{k}"] = (mid - side * half)[:, None]
    trial["g"] = gs[:, None]
    trial["v_c"] = vcs[:, None]
    with np.errstate(all="ignore"):
        costs = proj.batch_cost(_shape(proj.problem, trial, proj.eps), values).reshape(ladder.size, vc.size)
    out = []
    for rung, col in enumerate(np.argmin(costs, axis=1)):
        if not np.isfinite(costs[rung, col]):
            continue
        i = rung * vc.size + col
        point = x.copy()
        for n in names:
            point[proj.names.index(n)] = float(np.ravel(trial[n])[i])
        out.append(point)
    return out


def _local(proj: _Projected, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray, budget: int, coarse: bool):
    """Local solve from ``x0``, after a coarse energy scan if ``coarse``."""
    if coarse:
        x0 = np.clip(_coarse_energies(proj, x0), lo, hi)
    return _lm(proj, x0, lo, hi, budget)


def _flip_q(proj: _Projected, x: np.ndarray) -> np.ndarray | None:
    """``x`` with every free asymmetry index mapped to ``-1/q``.

    With ``v_c`` or the index difference near zero the curve is nearly
    invariant under this map (see :func:`_reciprocal`), so a fit can settle
    on the wrong branch; once the rest moves the two branches separate.
    """
    if not {"A", "B"} <= set(proj.linear):
        return None
    idx = [proj.names.index(p) for p in proj.names if p.startswith("q")]
    if not idx or np.any(x[idx] == 0.0):
        return None
    out = x.copy()
    out[idx] = -1.0 / x[idx]
    return out


def _refine(proj: _Projected, run, lo: np.ndarray, hi: np.ndarray, budget: int, rounds: int = REFINE_ROUNDS):
    """Scan-driven restarts from the end of a local solve; keeps any that lower the cost."""
    x, cost, iters, reason, grad_norm, history = run
    for _ in range(rounds):
        guided = _guided_scan(proj, x, cost)
        moves = ([] if guided is None else [guided]) + _scan_coupling(proj, x)
        flipped = _flip_q(proj, x)
        if flipped is not None:
            moves += [flipped] + _scan_coupling(proj, flipped)
        improved = False
        for moved in moves:
            x2, c2, it2, reason2, g2, h2 = _lm(proj, np.clip(moved, lo, hi), lo, hi, budget)
            iters += it2
            if c2 < cost:
                x, cost, reason, grad_norm = x2, c2, reason2, g2
                history = history + h2
                improved = True
        if not improved:
            break
    return x, cost, iters, reason, grad_norm, history


def _covariance(jac: np.ndarray, cost: float, n_points: int, weighted: bool) -> np.ndarray:
    cov = np.linalg.pinv(jac.T @ jac)
    if not weighted:
        dof = max(n_points - jac.shape[1], 1)
        cov = cov * (cost / dof)
    return cov


def _starts(theta0: np.ndarray, box, n_starts: int, seed: int, guess=None) -> list[tuple[np.ndarray, bool]]:
    """Starting points: the data-derived guess if any, the given one, then jittered copies.

    The flag marks starts that get a coarse energy scan before the local solve.
    """
    out = [] if guess is None else [(np.clip(guess, *box), False)]
    out += [(theta0, False), (theta0, True)]
    out = out[:n_starts]
    rng = np.random.default_rng(seed)
    for _ in range(n_starts - len(out)):
        jitter = rng.uniform(-0.25, 0.25, theta0.size) * np.maximum(np.abs(theta0), 0.1)
        out.append((np.clip(theta0 + jitter, *box), True))
    return out


def _relabellings(problem: FitProblem) -> list[dict[str, str]]:
    """Parameter renamings that leave the line shape unchanged.

    Two-channel layouts: the channels may trade energies, linewidths and
    indices.  One-channel layouts: ``g`` and ``v_c`` may flip sign together.
    """
    lay = problem.config.layout
    if lay.two_channel:
        i, j = lay.channels
        swap = {}
        for stem in ("e", "gamma", "q"):
            swap[f"{stem}{i}"], swap[f"{stem}{j}"] = f"{stem}{j}", f"{stem}{i}"
        return [swap]
    return [{"g": "-g", "v_c": "-v_c"}]


def _reciprocal(problem: FitProblem, values: Mapping[str, float], rtol: float) -> dict[str, float] | None:
    """The ``q -> -1/q`` twin, when it exists.

    If the numerator is a combination of the real and imaginary parts of the
    denominator's root (equal indices in two-channel layouts, ``v_c = 0`` in
    one-channel ones) then ``(1 + q**2)*|N + i*pi*L|**2 - (N + pi*q*L)**2``
    is itself a square, and with free scale and baseline the curve is
    unchanged by ``q -> -1/q``, ``A -> -A*q**2``, ``B -> B + A*(1 + q**2)``.
    """
    if not {"A", "B"} <= set(problem.free):
        return None
    lay = problem.config.layout
    qs = [values[f"q{n}"] for n in lay.channels]
    if lay.two_channel:
        if abs(qs[0] - qs[1]) > rtol * max(1.0, abs(qs[0])):
            return None
    elif abs(values["v_c"]) > rtol:
        return None
    if any(q == 0.0 for q in qs):
        return None
    alt = dict(values)
    for n, q in zip(lay.channels, qs):
        alt[f"q{n}"] = -1.0 / q
    qq = float(np.prod(qs)) if lay.two_channel else qs[0] ** 2
    alt["A"] = -values["A"] * qq
    alt["B"] = values["B"] + values["A"] * (1.0 + qq)
    return alt


def equivalent(problem: FitProblem, values: Mapping[str, float], rtol: float = 1e-6) -> list[dict[str, float]]:
    """``values`` and every relabelling of it that gives the same curve."""
    out = [dict(values)]
    for mapping in _relabellings(problem):
        alt = dict(values)
        for dst, src in mapping.items():
            alt[dst] = -values[src[1:]] if src.startswith("-") else values[src]
        out.append(alt)
    twins = [_reciprocal(problem, v, rtol) for v in out]
    return out + [t for t in twins if t is not None]


def _nearest_labelling(problem: FitProblem, values: dict[str, float]) -> dict[str, float]:
    """Pick the equivalent labelling closest to the starting point.

    Relabellings that would change a fixed parameter are skipped.
    """

    def dist(v):
        return sum(((v[p] - problem.start[p]) / max(abs(problem.start[p]), 1.0)) ** 2 for p in problem.names)

    fixed = [p for p in problem.names if p not in problem.free]
    options = [v for v in equivalent(problem, values) if all(v[p] == values[p] for p in fixed)]
    return min(options, key=dist)


def _constant_guard(problem: FitProblem, spectrum: Spectrum) -> FitResult | None:
    """Flat data with free scale and baseline: the shape parameters are not determined."""
    y = spectrum.values
    if not {"A", "B"} <= set(problem.free) or np.ptp(y) > 1e-12 * max(np.abs(y).max(), 1.0):
        return None
    values = dict(problem.start)
    values["A"], values["B"] = 0.0, float(y.mean())
    stuck = [p for p in problem.free if p not in ("A", "B")]
    for p in stuck:
        values[p] = math.nan
    cov = np.full((len(problem.free), len(problem.free)), math.nan)
    return FitResult(values, list(problem.free), 0.0, 0, True, cov, 0.0, "constant-data", stuck)


def _good_enough(spectrum: Spectrum) -> float:
    """Cost of a fit that is exact to rounding; no later start can beat it."""
    scale = float(np.max(np.abs(spectrum.values * spectrum.weights)))
    return len(spectrum) * (1e-9 * max(scale, 1e-300)) ** 2


def _implausible(spectrum: Spectrum) -> float:
    """Chi-square ten standard deviations above its expectation; infinite without sigma."""
    if spectrum.sigma is None:
        return math.inf
    n = len(spectrum)
    return n + 10.0 * math.sqrt(2.0 * n)


def solve(
    problem: FitProblem,
    spectrum: Spectrum,
    n_starts: int = 3,
    max_iter: int = MAX_ITER,
    seed: int = 0,
    strict: bool = False,
) -> FitResult:
    """Damped least squares from ``n_starts`` starting points; the lowest cost wins.

    With more than one start the first is read off the data by
    :func:`rational_start`, the next is the problem's own starting point and
    the rest are jittered copies of it.  Free scale and baseline are solved
    linearly inside every step.  For one-channel layouts each local solve is
    followed by scans for a missed narrow resonance and for a collapsed
    ``g``, with a fresh local solve from any scan that helps.

    Parameters whose Jacobian column vanishes at the optimum are reported as
    unidentifiable and set to NaN.  With ``strict`` a fit that ran out of
    iterations raises :class:`NotConverged` carrying the result.
    """
    need = len(problem.free) + 2
    if len(spectrum) < need:
        raise MismatchedStructure(f"need at least {need} points for {len(problem.free)} free parameters")
    guarded = _constant_guard(problem, spectrum)
    if guarded is not None:
        return guarded

    box = problem.box(spectrum)
    theta0 = np.clip(problem.theta0(), *box)
    proj = _Projected(problem, spectrum, theta0)
    nl = [problem.free.index(p) for p in proj.names]
    lo, hi = box[0][nl], box[1][nl]

    if proj.names:
        guess = rational_start(problem, spectrum) if n_starts > 1 else None
        if guess is not None:
            guess = np.array([guess[p] for p in problem.free])
        starts = [(proj.x0(t), coarse) for t, coarse in _starts(theta0, box, max(1, n_starts), seed, guess)]
        good = _good_enough(spectrum)
        budget = min(max_iter, EXPLORE_ITER)
        runs = []
        if max_workers() > 1:
            runs = pmap(lambda s: _local(proj, s[0], lo, hi, budget, s[1]), starts)
        else:
            for x0, coarse in starts:
                runs.append(_local(proj, x0, lo, hi, budget, coarse))
                if runs[-1][1] <= good:
                    break
        runs.sort(key=lambda run: run[1])
        best = runs[0]
        spent = sum(run[2] for run in runs[1:])
        if best[1] > good:
            best = _refine(proj, best, lo, hi, budget)
            # an implausible chi-square means the refined start was the wrong one
            for other in runs[1:] if best[1] > _implausible(spectrum) else []:
                other = _refine(proj, other, lo, hi, budget)
                spent += other[2]
                if other[1] < best[1]:
                    best = other
        x, cost, iters, reason, grad_norm, history = best
        iters += spent
        if reason == "max_iter" and max_iter > budget:
            x, cost, more, reason, grad_norm, tail = _lm(proj, x, lo, hi, max_iter)
            iters += more
            history = history + tail[1:]
    else:
        x, iters, reason, history = np.array([]), 0, "linear", []

    r, values = proj.evaluate(x)
    values = _nearest_labelling(problem, values)
    theta = np.array([values[p] for p in problem.free])
    r = residuals(problem, spectrum, theta)
    cost = float(r @ r)
    jac = jacobian(problem, spectrum, theta, r, box)
    grad_norm = float(np.linalg.norm(jac.T @ r))
    flat = flat_columns(jac)
    cov = np.full((theta.size, theta.size), math.nan)
    keep = ~flat
    if keep.any():
        cov[np.ix_(keep, keep)] = _covariance(jac[:, keep], cost, len(spectrum), spectrum.sigma is not None)
    values = problem.full(theta)
    stuck = [p for p, f in zip(problem.free, flat) if f]
    for p in stuck:
        values[p] = math.nan
    rms = math.sqrt(cost / len(spectrum))
    result = FitResult(
        values, list(problem.free), rms, iters, reason != "max_iter", cov, grad_norm, reason, stuck, history
    )
    if strict and not result.converged:
        err = NotConverged(f"no convergence after {iters} iterations (residual_norm={rms:.3g})")
        err.result = result
        raise err
    return result


def synthetic_spectrum(
    config: ModelConfig,
    params: LineShapeParams,
    energies,
    scale: float = 1.0,
    baseline: float = 0.0,
    noise: float = 0.0,
    rng=None,
) -> Spectrum:
    """Sampled ``A*R + B`` with optional Gaussian noise of standard deviation ``noise``."""
    problem = FitProblem(config, params, scale, baseline)
    energies = np.asarray(energies, dtype=float)
    y = model(problem, energies, problem.theta0())
    if np.any(~np.isfinite(y)):
        raise MismatchedStructure("synthetic grid hits a singular point of the line shape")
    sigma = None
    if noise > 0.0:
        rng = np.random.default_rng(rng)
        y = y + rng.normal(0.0, noise, y.shape)
        sigma = np.full(y.shape, noise)
    return Spectrum(energies, y, sigma, {"config": config.to_dict(), "lineshape": params.to_dict()})
