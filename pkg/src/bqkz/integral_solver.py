"""Contour-integral solution of the compatible difference/differential system
in the symmetric-parameter regime, with quadrature diagnostics and residual
checks.

The solution lives on the hyperplane x = (e^{2 pi i lambda}, 1, ..., 1) with
both reflection weights equal to k/2.  Its coefficients are pairings of
rational weight functions against a fixed cycle, integrated over a horizontal
contour that separates two families of gamma poles.  All heavy evaluation is
done in log space: one complex exponential at the very end per integrand
sample, so nothing overflows even when the cycle monomials grow like
|z|^(2n) along the tails.

Pole separation requires Im c > 0, Im k > 0, 2 max|Im y_p| < Im k and
Im c < Im k / 2; the module validates these and refuses configurations where
the contour cannot sit at height Im(k)/2.  The y entries are real at the
user level but may acquire imaginary parts up to the separation bound when a
solve is run at a singly shifted point.

Pairings and panels are independent work units; evaluation here is serial
with a fixed left-to-right accumulation order so results are reproducible
bit for bit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .rqkz import ModelParams, op_Q
from .scalar_field import cpow, log_gamma
from .tensor_ops import Space, Vec

TWO_PI_I = 2j * math.pi


class SeparationError(ValueError):
    """A pole lies on the wrong side of the contour."""


class DegreeError(ValueError):
    """A cycle monomial violates the convergence window."""


class QuadratureError(RuntimeError):
    """Refinement did not converge within the allowed doublings."""


@dataclass(frozen=True)
class SolverParams:
    """Evaluation point and quadrature configuration.

    Both reflection weights are pinned to k/2; the first coordinate is
    e^{2 pi i lam} and the remaining ones are 1.
    """

    n: int
    lam: complex
    c: complex
    k: complex
    y: tuple
    half_dim: int = 2
    delta: float = None
    trunc: float = None
    panels_per_unit: float = 4.0
    max_refine: int = 5
    rtol: float = 1e-9
    atol: float = 1e-14

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one site")
        if len(self.y) != self.n:
            raise ValueError("y must have one entry per site")
        if self.n >= 2 and self.half_dim < 2:
            raise ValueError("need at least two labels when n >= 2")
        if not (self.c.imag > 0 and self.k.imag > 0):
            raise ValueError("need Im c > 0 and Im k > 0")
        if not (self.c.imag < self.k.imag / 2):
            raise ValueError("need Im c < Im k / 2")
        ybound = 2 * max(abs(complex(v).imag) for v in self.y)
        if not (ybound < self.k.imag):
            raise ValueError("need 2 max|Im y_p| < Im k")
        if abs(self.big_e - 1) < 1e-8:
            raise ValueError("e^{2 pi i lam} too close to 1")
        object.__setattr__(
            self, "y", tuple(complex(v) for v in self.y)
        )
        if self.delta is None:
            object.__setattr__(self, "delta", self.k.imag / 2)

    @property
    def alpha(self) -> complex:
        return self.k / 2

    @property
    def beta(self) -> complex:
        return self.k / 2

    @property
    def big_e(self) -> complex:
        return cmath.exp(TWO_PI_I * self.lam)

    @property
    def space(self) -> Space:
        return Space(self.n, self.half_dim)

    def x_point(self) -> tuple:
        return (self.big_e,) + (1,) * (self.half_dim - 1)

    def model(self) -> ModelParams:
        return ModelParams(
            c=self.c, k=self.k, alpha=self.alpha, beta=self.beta,
            space=self.space,
        )

    def extended_y(self) -> tuple:
        """The 2n pole centers: y_1..y_n then -y_n..-y_1."""
        return self.y + tuple(-v for v in reversed(self.y))


@dataclass(frozen=True)
class CycleW:
    """Cycle numerator: monomials z^d with constant coefficients."""

    terms: tuple

    def __post_init__(self):
        degs = [d for d, _ in self.terms]
        if len(set(degs)) != len(degs):
            raise ValueError("duplicate monomial degree")
        if not self.terms:
            raise ValueError("empty cycle")

    @classmethod
    def monomial(cls, degree: int, coeff=1.0) -> "CycleW":
        return cls(((int(degree), complex(coeff)),))

    def __add__(self, other: "CycleW") -> "CycleW":
        table = dict(self.terms)
        for d, cf in other.terms:
            table[d] = table.get(d, 0) + cf
        return CycleW(tuple(sorted(table.items())))

    def validate(self, params: SolverParams):
        lo = params.lam.real
        hi = lo + 2 * params.n
        for d, _ in self.terms:
            if not (lo < d < hi):
                raise DegreeError(
                    "cycle degree %d outside the convergence window (%g, %g)"
                    % (d, lo, hi)
                )


@dataclass(frozen=True)
class Contour:
    """Validated horizontal integration path Im t = delta, |Re t| <= trunc."""

    delta: float
    trunc: float
    record: dict


@dataclass(frozen=True)
class SolutionVector:
    """Pairing coefficients with the evaluation point and diagnostics."""

    coeffs: tuple
    lam: complex
    y: tuple
    vec: Vec
    diagnostics: dict


def vec_u(j: int, params: SolverParams) -> Vec:
    """Basis vector of the 2n-dimensional target subspace.

    For j <= n the j-th site carries the first label and every other site
    carries the symmetric second-label pair; for j > n site 2n+1-j carries
    the barred first label instead.
    """
    n = params.n
    if not 1 <= j <= 2 * n:
        raise ValueError("index out of range")
    space = params.space
    half = params.half_dim
    if j <= n:
        site, code = j, 0
    else:
        site, code = 2 * n + 1 - j, half
    if n == 1:
        return Vec.basis(space, (code,))
    out = Vec(space, {})
    for fill in _symmetric_fills(n - 1, half):
        state = fill[: site - 1] + (code,) + fill[site - 1:]
        out = out.add(Vec.basis(space, state))
    return out


def _symmetric_fills(count: int, half: int):
    """States of the filler sites: every site label 2, barred or not."""
    if count == 0:
        yield ()
        return
    for rest in _symmetric_fills(count - 1, half):
        yield (1,) + rest
        yield (half + 1,) + rest


def vec_u_all(params: SolverParams):
    return [vec_u(j, params) for j in range(1, 2 * params.n + 1)]


def filler_vector(params: SolverParams) -> Vec:
    """The fixed symmetric tensor on n-1 sites (empty when n = 1)."""
    if params.n == 1:
        raise ValueError("no filler sites when n = 1")
    space = Space(params.n - 1, params.half_dim)
    out = Vec(space, {})
    for state in _symmetric_fills(params.n - 1, params.half_dim):
        out = out.add(Vec.basis(space, state))
    return out


def func_g(j: int, t: complex, y: Sequence, k: complex) -> complex:
    """Rational weight function, uniform over all 2n indices via the
    extended pole-center list."""
    n = len(y)
    if not 1 <= j <= 2 * n:
        raise ValueError("index out of range")
    yext = tuple(y) + tuple(-v for v in reversed(tuple(y)))
    den = t - yext[j - 1]
    if den == 0:
        raise ZeroDivisionError("weight function pole")
    out = 1 / den
    for p in range(j - 1):
        d = t - yext[p]
        if d == 0:
            raise ZeroDivisionError("weight function pole")
        out = out * (t - yext[p] - k) / d
    return out


def prod_ratio_full(t: complex, y: Sequence, k: complex) -> complex:
    """Product of (t -+ y_p - k)/(t -+ y_p) over all 2n pole centers."""
    out = 1
    for yp in y:
        out = out * (t - yp - k) / (t - yp)
        out = out * (t + yp - k) / (t + yp)
    return out


def func_h(j: int, t: complex, y: Sequence, lam: complex, k: complex) -> complex:
    """Coefficient functions of the first differential operator applied to
    the solution: a diagonal term plus two geometric ladder sums."""
    n = len(y)
    yext = tuple(y) + tuple(-v for v in reversed(tuple(y)))
    ex = cmath.exp(TWO_PI_I * lam)
    out = -(t - yext[j - 1]) * func_g(j, t, y, k)
    for l in range(1, j):
        out += k / (ex - 1) * func_g(l, t, y, k)
    for l in range(j + 1, 2 * n + 1):
        out += k * ex / (ex - 1) * func_g(l, t, y, k)
    return out


def gtilde_vec(t: complex, y: Sequence, params: SolverParams) -> Vec:
    """Vector-valued weight function: sum of g_j(t) times the j-th basis
    vector of the target subspace."""
    out = Vec(params.space, {})
    for j in range(1, 2 * params.n + 1):
        out = out.add(vec_u(j, params).scale(func_g(j, t, y, params.k)))
    return out


def kernel_log_phi(t: complex, y: Sequence, params: SolverParams) -> complex:
    """Logarithm of the kernel: exponential prefactor plus gamma ratios."""
    c, k = params.c, params.k
    out = -TWO_PI_I * params.lam * t / c
    for yp in y:
        out += log_gamma((t - yp - k) / (-c))
        out += log_gamma((t + yp - k) / (-c))
        out -= log_gamma((t - yp) / (-c))
        out -= log_gamma((t + yp) / (-c))
    return out


def kernel_phi(t: complex, y: Sequence, params: SolverParams) -> complex:
    return cmath.exp(kernel_log_phi(t, y, params))


def _log1m_exp(zeta: complex) -> complex:
    """A logarithm of 1 - e^zeta, stable for large |Re zeta|; the branch is
    irrelevant because only the exponential of sums is ever used."""
    if zeta.real > 0:
        return zeta + cmath.log(1 - cmath.exp(-zeta)) + 1j * math.pi
    return cmath.log(1 - cmath.exp(zeta))


def _log_cycle_denominator(t: complex, y: Sequence, c: complex) -> complex:
    out = 0
    for yp in y:
        out += _log1m_exp(TWO_PI_I * (t - yp) / c)
        out += _log1m_exp(TWO_PI_I * (t + yp) / c)
    return out


def _kernel_cycle(t: complex, y: Sequence, W: CycleW, params: SolverParams,
                  extra_weight: int = 0) -> complex:
    """Kernel times cycle value at one sample, assembled in log space.

    extra_weight inserts a factor (-2 pi i t / c)^power, used for the
    analytic lambda derivative.
    """
    base = kernel_log_phi(t, y, params)
    base -= _log_cycle_denominator(t, y, params.c)
    logz = TWO_PI_I * t / params.c
    out = 0
    for d, cf in W.terms:
        out += cf * cmath.exp(base + d * logz)
    if extra_weight:
        out *= (-TWO_PI_I * t / params.c) ** extra_weight
    return out


def integrand(j: int, W: CycleW, t: complex, params: SolverParams,
              y: Sequence = None) -> complex:
    """Full integrand sample for one pairing index."""
    yy = params.y if y is None else tuple(y)
    return _kernel_cycle(t, yy, W, params) * func_g(j, t, yy, params.k)


def _initial_trunc(W: CycleW, params: SolverParams) -> float:
    """Truncation where every monomial tail factor drops below atol."""
    lo = params.lam.real
    hi = lo + 2 * params.n
    m_left = min(d - lo for d, _ in W.terms)
    m_right = min(hi - d for d, _ in W.terms)
    need = math.log(1 / params.atol)
    scale = abs(params.c) ** 2 / (2 * math.pi)
    dc = params.delta * params.c.real
    t_right = (need / m_right * scale + dc) / params.c.imag
    t_left = (need / m_left * scale - dc) / params.c.imag
    base = max(t_right, t_left, 2.0)
    return base + 2.0


def validate_contour_line(y, c: complex, k: complex, delta: float,
                          trunc: float, include_shifted: bool = True) -> dict:
    """Pole-side validation of the horizontal line Im t = delta.

    Enumerates every gamma pole whose real part falls inside the truncation
    window (plus margin): the upward families must lie strictly above the
    line and the downward families strictly below, both for the given y
    and, when include_shifted is set, for each singly shifted
    configuration.  Raises SeparationError naming the offending pole.
    """
    margin = 2.0 + abs(c)
    configs = [("base", tuple(y))]
    if include_shifted:
        for m in range(1, len(y) + 1):
            shifted = list(y)
            shifted[m - 1] = shifted[m - 1] - c
            configs.append(("shift-%d" % m, tuple(shifted)))
    checked = 0
    gap_above = math.inf
    gap_below = math.inf
    for name, yy in configs:
        for yp in yy:
            for base in (yp, -yp):
                top = base + k
                jj = 0
                while True:
                    pole = top + jj * c
                    if abs(pole.real) > trunc + margin:
                        break
                    if pole.imag > delta + 3 * abs(c):
                        break
                    if pole.imag <= delta:
                        raise SeparationError(
                            "pole %r of config %s not above the contour"
                            % (pole, name)
                        )
                    gap_above = min(gap_above, pole.imag - delta)
                    checked += 1
                    jj += 1
                jj = 0
                while True:
                    pole = base - jj * c
                    if abs(pole.real) > trunc + margin:
                        break
                    if pole.imag < delta - 3 * abs(c):
                        break
                    if pole.imag >= delta:
                        raise SeparationError(
                            "pole %r of config %s not below the contour"
                            % (pole, name)
                        )
                    gap_below = min(gap_below, delta - pole.imag)
                    checked += 1
                    jj += 1
    return {
        "poles_checked": checked,
        "min_gap_above": gap_above,
        "min_gap_below": gap_below,
        "configs": [name for name, _ in configs],
    }


def build_contour(params: SolverParams, W: CycleW = None,
                  include_shifted: bool = True) -> Contour:
    """Horizontal contour at Im t = delta, truncated and pole-validated."""
    delta = params.delta
    trunc = params.trunc
    if trunc is None:
        if W is None:
            W = CycleW.monomial(int(math.floor(params.lam.real)) + 1)
        trunc = _initial_trunc(W, params)
    record = validate_contour_line(
        params.y, params.c, params.k, delta, trunc,
        include_shifted=include_shifted,
    )
    return Contour(delta=delta, trunc=trunc, record=record)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _sample_line(delta: float, trunc: float, panels: int):
    """Gauss nodes and weights on the horizontal segment, fixed order."""
    edges = np.linspace(-trunc, trunc, panels + 1)
    ts = []
    ws = []
    for i in range(panels):
        a, b = edges[i], edges[i + 1]
        mid, rad = (a + b) / 2, (b - a) / 2
        for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
            ts.append(complex(mid + rad * node, delta))
            ws.append(rad * weight)
    return ts, ws


def _pairing_pass(indices, W: CycleW, params: SolverParams, y, trunc,
                  panels, extra_weight=0):
    ts, ws = _sample_line(params.delta, trunc, panels)
    totals = [0j for _ in indices]
    scale = 0.0
    for t, w in zip(ts, ws):
        ker = _kernel_cycle(t, y, W, params, extra_weight=extra_weight)
        scale += abs(ker) * abs(w)
        for pos, j in enumerate(indices):
            if j == 0:
                totals[pos] += w * ker
            else:
                totals[pos] += w * ker * func_g(j, t, y, params.k)
    return totals, scale


def _pair_many(indices, W: CycleW, params: SolverParams, y=None,
               extra_weight=0, contour: Contour = None):
    """Refined pairings for several indices at once.

    Index 0 stands for the bare kernel-cycle integrand (no weight
    function); positive indices select g_j.  Doubles truncation and panel
    density together until the estimates stabilize.
    """
    W.validate(params)
    yy = params.y if y is None else tuple(y)
    if contour is None:
        contour = build_contour(
            replace(params, y=yy), W=W, include_shifted=False
        )
    trunc = contour.trunc
    ppu = params.panels_per_unit
    prev = None
    for step in range(params.max_refine + 1):
        panels = max(4, int(math.ceil(2 * trunc * ppu)))
        cur, scale = _pairing_pass(
            indices, W, params, yy, trunc, panels, extra_weight=extra_weight
        )
        if prev is not None:
            err = max(abs(a - b) for a, b in zip(cur, prev))
            bound = max(
                params.rtol * max(abs(v) for v in cur),
                params.atol * max(scale, 1.0),
            )
            if err <= bound:
                diag = {
                    "trunc": trunc,
                    "panels": panels,
                    "quad_error": err,
                    "refinements": step,
                    "scale": scale,
                }
                return cur, diag
        prev = cur
        trunc *= 2
        ppu *= 2
    raise QuadratureError(
        "no convergence after %d refinements; last two estimates %r / %r"
        % (params.max_refine, prev, cur)
    )


def pair_I(j: int, W: CycleW, params: SolverParams, y=None,
           contour: Contour = None) -> complex:
    """Single pairing coefficient."""
    if not 1 <= j <= 2 * params.n:
        raise ValueError("index out of range")
    vals, _ = _pair_many([j], W, params, y=y, contour=contour)
    return vals[0]


def solve_f(lam: complex, y, W: CycleW, params: SolverParams,
            contour: Contour = None, extra_weight: int = 0) -> SolutionVector:
    """All 2n pairing coefficients and the assembled vector."""
    p = replace(params, lam=complex(lam), y=tuple(y))
    indices = list(range(1, 2 * p.n + 1))
    vals, diag = _pair_many(
        indices, W, p, extra_weight=extra_weight, contour=contour
    )
    vec = Vec(p.space, {})
    for j, v in zip(indices, vals):
        vec = vec.add(vec_u(j, p).scale(v))
    return SolutionVector(
        coeffs=tuple(vals), lam=p.lam, y=p.y, vec=vec, diagnostics=diag
    )


def _vec_norm(vec: Vec) -> float:
    return max((abs(complex(v)) for v in vec.entries.values()), default=0.0)


def qkz_residuals(W: CycleW, params: SolverParams,
                  contour: Contour = None) -> dict:
    """Relative difference-equation residual for every shift direction."""
    if contour is None:
        contour = build_contour(params, W=W, include_shifted=True)
    model = params.model()
    x = params.x_point()
    base = solve_f(params.lam, params.y, W, params, contour=contour)
    norm = _vec_norm(base.vec)
    out = {}
    for m in range(1, params.n + 1):
        shifted_y = list(params.y)
        shifted_y[m - 1] = shifted_y[m - 1] - params.c
        shifted = solve_f(params.lam, tuple(shifted_y), W, params,
                          contour=contour)
        transported = op_Q(m, x, params.y, model).apply(base.vec)
        diff = shifted.vec - transported
        out[m] = _vec_norm(diff) / norm
    return out


def dlambda_solution(W: CycleW, params: SolverParams,
                     contour: Contour = None) -> SolutionVector:
    """Analytic lambda derivative: the integrand gains a linear weight."""
    return solve_f(params.lam, params.y, W, params, contour=contour,
                   extra_weight=1)


def _check_differential_regime(params: SolverParams):
    if abs(params.big_e + 1) < 1e-8:
        raise ValueError(
            "differential residuals need e^{2 pi i lam} away from -1"
        )


def ode_residual(W: CycleW, params: SolverParams,
                 contour: Contour = None) -> float:
    """Relative residual of the first-direction differential equation."""
    from .compat_ops import op_L

    _check_differential_regime(params)
    if contour is None:
        contour = build_contour(params, W=W, include_shifted=False)
    base = solve_f(params.lam, params.y, W, params, contour=contour)
    deriv = dlambda_solution(W, params, contour=contour)
    model = params.model()
    lop = op_L(1, params.x_point(), params.y, model)
    ex = params.big_e
    total = deriv.vec.scale(params.c / TWO_PI_I)
    total = total.add(lop.apply(base.vec))
    total = total.add(base.vec.scale(params.k * ex / (ex - 1)))
    return _vec_norm(total) / _vec_norm(base.vec)


def ftilde_residual(W: CycleW, params: SolverParams,
                    contour: Contour = None) -> float:
    """Relative residual of the gauge-transformed, parameter-free equation.

    The scalar prefactor (e^{2 pi i lam} - 1)^{k/c} uses the principal
    branch; any other branch differs by a lambda-independent constant and
    solves the same equation.
    """
    from .compat_ops import op_L

    _check_differential_regime(params)
    if contour is None:
        contour = build_contour(params, W=W, include_shifted=False)
    base = solve_f(params.lam, params.y, W, params, contour=contour)
    deriv = dlambda_solution(W, params, contour=contour)
    model = params.model()
    lop = op_L(1, params.x_point(), params.y, model)
    ex = params.big_e
    s = cpow(ex - 1, params.k / params.c)
    ds = params.k * ex * cpow(ex - 1, params.k / params.c - 1)
    total = base.vec.scale(ds)
    total = total.add(deriv.vec.scale(s * params.c / TWO_PI_I))
    total = total.add(lop.apply(base.vec).scale(s))
    return _vec_norm(total) / (abs(s) * _vec_norm(base.vec))


def vanishing_integral(W: CycleW, params: SolverParams,
                       contour: Contour = None):
    """The kernel-cycle integral against 1 minus the shifted-kernel ratio.

    Returns (value, scale); the value is an exact zero of the calculus and
    should vanish to quadrature accuracy relative to the scale.
    """
    if contour is None:
        contour = build_contour(params, W=W, include_shifted=False)
    ex = params.big_e

    trunc = contour.trunc
    ppu = params.panels_per_unit
    prev = None
    for step in range(params.max_refine + 1):
        panels = max(4, int(math.ceil(2 * trunc * ppu)))
        ts, ws = _sample_line(params.delta, trunc, panels)
        total = 0j
        scale = 0.0
        for t, w in zip(ts, ws):
            ker = _kernel_cycle(t, params.y, W, params)
            val = ker * (1 - ex * prod_ratio_full(t, params.y, params.k))
            total += w * val
            scale += abs(w) * abs(ker)
        if prev is not None and abs(total - prev) <= max(
            params.rtol * scale, params.atol
        ):
            return total, scale
        prev = total
        trunc *= 2
        ppu *= 2
    raise QuadratureError("vanishing-integral refinement did not converge")


def residual_report(W: CycleW, params: SolverParams) -> dict:
    """Machine-readable summary: coefficients, residuals, diagnostics."""
    contour = build_contour(params, W=W, include_shifted=True)
    base = solve_f(params.lam, params.y, W, params, contour=contour)
    qkz = qkz_residuals(W, params, contour=contour)
    ode = ode_residual(W, params, contour=contour)
    report = {
        "n": params.n,
        "lambda": [params.lam.real, params.lam.imag],
        "c": [params.c.real, params.c.imag],
        "k": [params.k.real, params.k.imag],
        "y": [[complex(v).real, complex(v).imag] for v in params.y],
        "cycle": [[d, [cf.real, cf.imag]] for d, cf in W.terms],
        "coefficients": [[v.real, v.imag] for v in base.coeffs],
        "qkz_residuals": {str(m): qkz[m] for m in sorted(qkz)},
        "ode_residual": ode,
        "max_qkz_residual": max(qkz.values()),
        "contour": {
            "delta": contour.delta,
            "trunc": contour.trunc,
            "poles_checked": contour.record["poles_checked"],
            "min_gap_above": contour.record["min_gap_above"],
            "min_gap_below": contour.record["min_gap_below"],
        },
        "quadrature": {
            "trunc": base.diagnostics["trunc"],
            "panels": base.diagnostics["panels"],
            "refinements": base.diagnostics["refinements"],
            "quad_error": base.diagnostics["quad_error"],
        },
    }
    return report
