"""Contour-integral solution: kernel identities, quadrature, residuals.

Complex-domain checks compare against independently built oracles: closed
forms for the small cases, an adaptive Simpson integrator written here for
the pairing, and difference-quotient extrapolation for the derivative in
the spectral parameter.
"""

import cmath
import random

import pytest

from fractions import Fraction

from bqkz.rqkz import ModelParams, ones, op_K, op_P, op_R, op_T
from bqkz.tensor_ops import Space, Vec, embed_pair, embed_site
from bqkz.integral_solver import (
    CycleW,
    DegreeError,
    QuadratureError,
    SeparationError,
    SolverParams,
    TWO_PI_I,
    build_contour,
    dlambda_solution,
    filler_vector,
    ftilde_residual,
    func_g,
    func_h,
    gtilde_vec,
    kernel_log_phi,
    ode_residual,
    pair_I,
    prod_ratio_full,
    qkz_residuals,
    residual_report,
    solve_f,
    validate_contour_line,
    vanishing_integral,
    vec_u,
    vec_u_all,
)

C = 0.1 + 0.2j
K = 0.05 + 1.0j

rng = random.Random(303132)


def mkparams(n, lam, y, **kw):
    return SolverParams(n=n, lam=lam, c=C, k=K, y=tuple(y), **kw)


def rand_t(r):
    return complex(r.uniform(-3, 3), r.uniform(-3, 3))


def vec_norm(vec):
    return max((abs(complex(v)) for v in vec.entries.values()), default=0.0)


# ---------------------------------------------------------------- regime


def test_regime_validation():
    with pytest.raises(ValueError):
        mkparams(1, 0.0, (0.3,))
    with pytest.raises(ValueError):
        SolverParams(n=1, lam=0.3, c=0.1 - 0.2j, k=K, y=(0.3,))
    with pytest.raises(ValueError):
        SolverParams(n=1, lam=0.3, c=0.1 + 0.6j, k=K, y=(0.3,))
    with pytest.raises(ValueError):
        SolverParams(n=1, lam=0.3, c=C, k=K, y=(0.3 + 0.8j,))
    with pytest.raises(ValueError):
        SolverParams(n=2, lam=0.3, c=C, k=K, y=(0.3,))
    p = mkparams(1, 0.25, (0.3,))
    assert p.delta == pytest.approx(K.imag / 2)
    assert p.alpha == p.beta == K / 2
    assert p.x_point() == (p.big_e, 1)


def test_half_integer_spectral_point_is_allowed_for_pairing():
    """big_e = -1 is regular for the pairing; only the differential
    entries reject it."""
    p = mkparams(1, -0.5, (0.3,))
    assert abs(p.big_e + 1) < 1e-12
    with pytest.raises(ValueError):
        ode_residual(CycleW.monomial(0), p)


def test_cycle_degree_window():
    p = mkparams(1, 0.25, (0.3,))
    with pytest.raises(DegreeError) as err:
        CycleW.monomial(4).validate(p)
    assert "convergence window" in str(err.value)
    with pytest.raises(ValueError):
        CycleW(((0, 1.0), (0, 2.0)))
    with pytest.raises(ValueError):
        CycleW(())


# ---------------------------------------------------------------- vectors


def test_u_vectors_n1_closed_form():
    p = mkparams(1, -0.5, (0.3,))
    assert vec_u(1, p).entries == {(0,): 1}
    assert vec_u(2, p).entries == {(2,): 1}


def test_filler_conditions_and_rank():
    for n in (2, 3):
        p = mkparams(n, 0.31, tuple(0.1 + 0.13 * i for i in range(n)))
        fv = filler_vector(p)
        sp = fv.space
        for i in range(1, n - 1):
            assert embed_pair(op_P(2), i, i + 1, sp).apply(fv) == fv
        for i in range(1, n):
            assert embed_site(op_T(ones(2)), i, sp).apply(fv) == fv
        us = vec_u_all(p)
        assert len(us) == 2 * n
        states = sorted({s for u in us for s in u.entries})
        rows = [[Fraction(u.entries.get(s, 0)) for s in states] for u in us]
        rank = 0
        for col in range(len(states)):
            piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
            if piv is None:
                continue
            rows[rank], rows[piv] = rows[piv], rows[rank]
            pv = rows[rank][col]
            for r in range(len(rows)):
                if r != rank and rows[r][col] != 0:
                    f = rows[r][col] / pv
                    rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
            rank += 1
        assert rank == 2 * n, n


# ---------------------------------------------------------------- g and h


def test_g_closed_form_n1():
    y = (0.3,)
    for _ in range(20):
        t = rand_t(rng)
        try:
            g1 = func_g(1, t, y, K)
            g2 = func_g(2, t, y, K)
        except ZeroDivisionError:
            continue
        assert abs(g1 - 1 / (t - 0.3)) < 1e-12 * abs(g1)
        want = (t - 0.3 - K) / ((t - 0.3) * (t + 0.3))
        assert abs(g2 - want) < 1e-12 * abs(g2)


def test_g_telescoping():
    """k times the sum of all members collapses to 1 minus the full ratio."""
    for n in (1, 2, 3):
        y = tuple(0.21 + 0.17 * i for i in range(n))
        hits = 0
        while hits < 25:
            t = rand_t(rng)
            try:
                total = sum(func_g(j, t, y, K) for j in range(1, 2 * n + 1))
                want = 1 - prod_ratio_full(t, y, K)
            except ZeroDivisionError:
                continue
            hits += 1
            assert abs(K * total - want) <= 1e-11 * max(1.0, abs(want)), (n, t)


def test_h_collapsed_identity_and_sign():
    """h_m + kE/(E-1) g_m equals (1 - E Pi)/(E - 1); the opposite-sign
    prefactor variant never matches."""
    lam = 0.23 + 0.05j
    big_e = cmath.exp(TWO_PI_I * lam)
    for n in (1, 2, 3):
        y = tuple(0.19 + 0.23 * i for i in range(n))
        hits = 0
        while hits < 20:
            t = rand_t(rng)
            try:
                pi_full = prod_ratio_full(t, y, K)
                for m in range(1, 2 * n + 1):
                    h = func_h(m, t, y, lam, K)
                    g = func_g(m, t, y, K)
                    lhs = h + K * big_e / (big_e - 1) * g
                    good = (1 - big_e * pi_full) / (big_e - 1)
                    bad = (1 - big_e * pi_full) / (1 - big_e)
                    scale = max(1.0, abs(good))
                    assert abs(lhs - good) <= 1e-10 * scale, (n, m, t)
                    assert abs(lhs - bad) > 1e-6 * scale, (n, m, t)
            except ZeroDivisionError:
                continue
            hits += 1


# ---------------------------------------------------------------- kernel


def test_kernel_shift_relation():
    """Stepping the argument down by c multiplies the kernel by E times the
    full pole ratio."""
    for n in (1, 2):
        y = tuple(0.27 + 0.11 * i for i in range(n))
        for lam in (0.23 + 0.05j, -0.4 + 0.3j):
            p = mkparams(n, lam, y)
            hits = 0
            while hits < 12:
                t = complex(rng.uniform(-2, 2), p.delta + rng.uniform(-0.1, 0.1))
                try:
                    ratio = cmath.exp(kernel_log_phi(t - C, y, p) - kernel_log_phi(t, y, p))
                    want = p.big_e * prod_ratio_full(t, y, K)
                except (ZeroDivisionError, ValueError):
                    continue
                hits += 1
                assert abs(ratio - want) <= 1e-10 * abs(want), (n, t)


def test_kernel_y_shift_relation():
    """Stepping y_1 down by c changes the kernel by an explicit rational
    factor in t."""
    n = 2
    y = (0.27, 0.43)
    p = mkparams(n, 0.2, y)
    y_shift = (y[0] - C, y[1])
    hits = 0
    while hits < 12:
        t = complex(rng.uniform(-2, 2), p.delta + rng.uniform(-0.1, 0.1))
        try:
            ratio = cmath.exp(kernel_log_phi(t, y_shift, p) - kernel_log_phi(t, y, p))
            want = ((t + y[0] - K) / (t + y[0])) * ((t - y[0] + C) / (t - y[0] - K + C))
        except (ZeroDivisionError, ValueError):
            continue
        hits += 1
        assert abs(ratio - want) <= 1e-10 * abs(want), t


def test_kernel_symmetries():
    n = 2
    y = (0.27, 0.43)
    p = mkparams(n, 0.2, y)
    for t in (0.3 + 0.5j, -1.2 + 0.45j):
        swapped = kernel_log_phi(t, (y[1], y[0]), p)
        flipped = kernel_log_phi(t, (y[0], -y[1]), p)
        base = kernel_log_phi(t, y, p)
        assert abs(cmath.exp(swapped - base) - 1) < 1e-11
        assert abs(cmath.exp(flipped - base) - 1) < 1e-11


# ---------------------------------------------------------------- gtilde


def test_gtilde_intertwining():
    for n in (2, 3):
        y = tuple(0.21 + 0.19 * i for i in range(n))
        p = mkparams(n, 0.37 + 0.11j, y)
        model = p.model()
        sp = p.space
        hits = 0
        while hits < 15:
            t = rand_t(rng)
            try:
                gt = gtilde_vec(t, y, p)
                for l in range(1, n):
                    ysw = list(y)
                    ysw[l - 1], ysw[l] = ysw[l], ysw[l - 1]
                    swap_op = embed_pair(op_P(2), l, l + 1, sp) @ embed_pair(
                        op_R(y[l - 1] - y[l], model), l, l + 1, sp
                    )
                    lhs = swap_op.apply(gt)
                    rhs = gtilde_vec(t, tuple(ysw), p)
                    assert vec_norm(lhs - rhs) <= 1e-10 * max(1.0, vec_norm(rhs)), (n, l)
                flip_op = embed_site(op_K(y[-1], ones(2), K / 2), n, sp)
                lhs = flip_op.apply(gt)
                rhs = gtilde_vec(t, y[:-1] + (-y[-1],), p)
                assert vec_norm(lhs - rhs) <= 1e-10 * max(1.0, vec_norm(rhs)), n
            except ZeroDivisionError:
                continue
            hits += 1


# ---------------------------------------------------------------- contour


def test_contour_record_frozen_example():
    """Eight pole families for one site including the shifted family, the
    tightest upper clearance coming from the shifted raised pole."""
    rec = validate_contour_line((0.3,), C, K, 0.5, 6.0, include_shifted=True)
    assert rec["poles_checked"] == 8
    assert rec["min_gap_above"] == pytest.approx(0.3)
    assert set(rec["configs"]) == {"base", "shift-1"}


def test_contour_violation_reports_config():
    with pytest.raises(SeparationError) as err:
        validate_contour_line((0.3,), 0.1 + 0.9j, K, 0.5, 6.0, include_shifted=True)
    assert "shift-1" in str(err.value)


def test_build_contour_passes_regime():
    p = mkparams(1, 0.25, (0.3,))
    ctr = build_contour(p, W=CycleW.monomial(1))
    assert ctr.delta == pytest.approx(p.delta)
    assert ctr.trunc > 0
    assert ctr.record["poles_checked"] == 8


# ---------------------------------------------------------------- pairing


from _oracles import simpson_oracle


def test_pair_i_frozen_oracle_point():
    """Independent high-precision quadrature of the same integrand froze
    this value; the implementation must keep reproducing it."""
    p = mkparams(1, -0.5, (0.3,))
    want = 1.8676715689736985 - 3.5987515575140336j
    got = pair_I(1, CycleW.monomial(0), p)
    assert abs(got - want) <= 1e-9 * abs(want)


def test_pair_i_matches_adaptive_simpson():
    configs = [
        (1, -0.5, (0.3,), CycleW.monomial(0)),
        (1, 0.25, (0.3,), CycleW.monomial(1)),
        (2, 0.31, (0.3, -0.2), CycleW.monomial(1)),
    ]
    for n, lam, y, W in configs:
        p = mkparams(n, lam, y)
        for j in (1, 2 * n):
            got = pair_I(j, W, p)
            want = simpson_oracle(j, W, p)
            assert abs(got - want) <= 1e-8 * max(abs(want), 1e-12), (n, lam, j)


def test_pair_i_linear_in_cycle():
    p = mkparams(1, -0.5, (0.3,))
    w0, w1 = CycleW.monomial(0), CycleW.monomial(1)
    a = pair_I(2, w0, p)
    b = pair_I(2, w1, p)
    ab = pair_I(2, w0 + w1, p)
    assert abs(ab - (a + b)) <= 1e-10 * max(abs(ab), 1e-30)


def test_quadrature_error_reports_estimates():
    p = mkparams(1, -0.5, (0.3,), panels_per_unit=0.05, max_refine=0,
                 rtol=1e-13, atol=1e-30)
    with pytest.raises(QuadratureError) as err:
        pair_I(1, CycleW.monomial(0), p)
    assert "estimates" in str(err.value)


# ---------------------------------------------------------------- solution


def test_qkz_residuals_small():
    for n, lam, y in ((1, 0.25, (0.3,)), (2, 0.31, (0.3, -0.2))):
        p = mkparams(n, lam, y)
        res = qkz_residuals(CycleW.monomial(1), p)
        assert set(res) == set(range(1, n + 1))
        for m, v in res.items():
            assert v <= 1e-7, (n, m, v)


def test_ode_and_gauge_residuals_small():
    for n, lam, y in ((1, 0.25, (0.3,)), (2, 0.31, (0.3, -0.2))):
        p = mkparams(n, lam, y)
        assert ode_residual(CycleW.monomial(1), p) <= 1e-7
        assert ftilde_residual(CycleW.monomial(1), p) <= 1e-7


def test_vanishing_integral():
    p = mkparams(1, 0.25, (0.3,))
    W = CycleW.monomial(1)
    value, scale = vanishing_integral(W, p, build_contour(p, W=W))
    assert abs(value) <= 1e-9 * max(scale, 1e-30)


def test_dlambda_against_difference_quotient():
    p = mkparams(1, 0.25, (0.3,))
    W = CycleW.monomial(1)
    deriv = dlambda_solution(W, p)
    h = 1e-4
    samples = {}
    for step in (-2, -1, 1, 2):
        q = mkparams(1, 0.25 + step * h, (0.3,))
        samples[step] = solve_f(q.lam, q.y, W, q)
    for idx in range(len(deriv.coeffs)):
        want = (
            8 * (samples[1].coeffs[idx] - samples[-1].coeffs[idx])
            - (samples[2].coeffs[idx] - samples[-2].coeffs[idx])
        ) / (12 * h)
        got = deriv.coeffs[idx]
        assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), idx


def test_solver_determinism():
    p = mkparams(2, 0.31, (0.3, -0.2))
    W = CycleW.monomial(1)
    a = solve_f(p.lam, p.y, W, p)
    b = solve_f(p.lam, p.y, W, p)
    assert repr(a.coeffs) == repr(b.coeffs)
    assert a.diagnostics == b.diagnostics


def test_residual_report_keys():
    p = mkparams(1, 0.25, (0.3,))
    rep = residual_report(CycleW.monomial(1), p)
    assert set(rep) == {
        "n",
        "lambda",
        "c",
        "k",
        "y",
        "cycle",
        "coefficients",
        "qkz_residuals",
        "ode_residual",
        "max_qkz_residual",
        "contour",
        "quadrature",
    }
    assert rep["max_qkz_residual"] <= 1e-7
    assert len(rep["coefficients"]) == 2
