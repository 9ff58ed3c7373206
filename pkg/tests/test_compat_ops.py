"""Differential-side operators: commuting family, blocks, compatibility.

The hand-coded coordinate derivatives are checked against an independent
oracle: entries of the operators are rational functions of one coordinate
with a known denominator, so exact polynomial interpolation of the
numerator gives the derivative without any finite differencing.
"""

import pytest

from bqkz.sampling import make_rng, rand_rational, rand_tuple, sample_point
from bqkz.scalar_field import PoleError, div, inv, rat
from bqkz.tensor_ops import LinOp, Space, Vec
from bqkz.rqkz import ModelParams, op_Q, op_dQ_dx
from bqkz.compat_ops import (
    RouteMismatch,
    ad_coordinate_on_I_defect,
    ad_ones_on_I_defect,
    ad_reflection_on_M_defects,
    ad_tail_defect,
    block_assembly_defect,
    check_comm_IM,
    check_compatibility,
    check_cross_derivative,
    comm_AA_defect,
    comm_LL_defect,
    compat_direct,
    compat_three_term,
    intertwining_defects,
    m_conjugation_defect,
    op_A,
    op_B,
    op_I,
    op_M,
    op_dB_dx,
    op_dK_term,
)

rng = make_rng(908070)


def rand_params(r, space):
    return ModelParams.random(r, space)


def generic_x(r, count):
    """Coordinates safe for every op_B pole: nonzero, off the unit square
    roots, pairwise distinct, no product equal to one."""
    while True:
        x = rand_tuple(r, count, nonzero=True)
        ok = all(v * v != 1 for v in x)
        for i in range(count):
            for j in range(i + 1, count):
                ok = ok and x[i] != x[j] and x[i] * x[j] != 1
        if ok:
            return x


# polynomial helpers over exact rationals, coefficients low degree first


def poly_eval(coeffs, t):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        for j, v in enumerate(b):
            out[i + j] += u * v
    return out


def poly_deriv(coeffs):
    return [coeffs[i] * i for i in range(1, len(coeffs))]


def lagrange(points):
    """Interpolating polynomial through exact (t, value) pairs."""
    coeffs = [0] * len(points)
    for i, (ti, vi) in enumerate(points):
        basis = [1]
        denom = 1
        for j, (tj, _) in enumerate(points):
            if j == i:
                continue
            basis = poly_mul(basis, [-tj, 1])
            denom = denom * (ti - tj)
        scale = div(vi, denom)
        for d, c in enumerate(basis):
            coeffs[d] += c * scale
    return coeffs


def derivative_by_interpolation(sample_op, q_coeffs, ts, t_hold, dim):
    """d/dt of a matrix with entries p(t)/q(t), deg p <= deg q, at t_hold."""
    mats = {}
    for t in ts:
        dense = sample_op(t).to_dense()
        qt = poly_eval(q_coeffs, t)
        mats[t] = [[qt * v for v in row] for row in dense]
    q_hold = poly_eval(q_coeffs, t_hold)
    dq_hold = poly_eval(poly_deriv(q_coeffs), t_hold)
    out = []
    for i in range(dim):
        row = []
        for j in range(dim):
            p = lagrange([(t, mats[t][i][j]) for t in ts])
            p_hold = poly_eval(p, t_hold)
            dp_hold = poly_eval(poly_deriv(p), t_hold)
            row.append(div(dp_hold * q_hold - p_hold * dq_hold, q_hold * q_hold))
        out.append(row)
    return out


def distinct_points(r, count, banned):
    pts = []
    while len(pts) < count:
        t = rand_rational(r)
        if t in banned or t in pts:
            continue
        if any(t * b == 1 for b in banned if b != 0):
            continue
        if t == 0 or t * t == 1:
            continue
        pts.append(t)
    return pts


def test_op_a_smallest_case_entries():
    """n = 1, one label: only the diagonal weight and the bar-raising term."""
    space = Space(1, 1)
    params = ModelParams(rat(1), rat(2, 3), rat(5, 7), rat(1, 4), space)
    y = (rat(3, 2),)
    a1 = op_A(1, y, params)
    v, vb = Vec.basis(space, (0,)), Vec.basis(space, (1,))
    assert a1.apply(v) == v.scale(y[0])
    assert a1.apply(vb) == vb.scale(-y[0]) + v.scale(2 * params.alpha)


def test_comm_aa_samples():
    for n, half in ((2, 2), (3, 2), (2, 3)):
        space = Space(n, half)
        for _ in range(5):

            def body(r):
                params = rand_params(r, space)
                y = rand_tuple(r, n)
                for a in range(1, half + 1):
                    for b in range(a + 1, half + 1):
                        assert comm_AA_defect(a, b, y, params).is_zero()
                return True

            sample_point(rng, body)


def test_comm_ll_and_assembly_samples():
    for n, half in ((2, 2), (3, 2)):
        space = Space(n, half)
        for _ in range(3):

            def body(r):
                params = rand_params(r, space)
                x = generic_x(r, half)
                y = rand_tuple(r, n)
                for a in range(1, half + 1):
                    assert block_assembly_defect(a, x, y, params).is_zero()
                    for b in range(a + 1, half + 1):
                        assert comm_LL_defect(a, b, x, y, params).is_zero()
                return True

            sample_point(rng, body)


def test_cross_derivative_samples():
    space = Space(2, 2)
    for _ in range(5):

        def body(r):
            params = rand_params(r, space)
            x = generic_x(r, 2)
            y = rand_tuple(r, 2)
            assert check_cross_derivative(1, 2, x, y, params).is_zero()
            return True

        sample_point(rng, body)


def test_comm_im_and_slot_swap_samples():
    for half in (1, 2, 3):
        space = Space(2, half)
        for _ in range(4):

            def body(r):
                params = rand_params(r, space)
                x = generic_x(r, half)
                y1, y2 = rand_tuple(r, 2)
                for a in range(1, half + 1):
                    assert check_comm_IM(a, x, y1, y2, params).is_zero()
                    assert m_conjugation_defect(a, x, params).is_zero()
                return True

            sample_point(rng, body)


def test_block_pole_guards():
    space = Space(2, 2)
    params = ModelParams(rat(1), rat(1, 2), rat(1, 3), rat(1, 4), space)
    with pytest.raises(PoleError):
        op_I(1, rat(1), rat(2), params)
    with pytest.raises(PoleError):
        op_I(1, rat(0), rat(2), params)
    with pytest.raises(PoleError):
        op_B(1, (rat(1), rat(2)), params)
    with pytest.raises(PoleError):
        op_B(1, (rat(3), rat(3)), params)
    with pytest.raises(PoleError):
        op_B(1, (rat(3), rat(1, 3)), params)


def test_db_dx_interpolation_oracle_same_coordinate():
    """dB_b/dx_b against exact numerator interpolation, t = x_b."""
    half, n = 2, 2
    space = Space(n, half)

    def body(r):
        params = rand_params(r, space)
        x = generic_x(r, half)
        b = r.choice((1, 2))
        other = x[1] if b == 1 else x[0]
        # q(t) = (t^2 - 1)(t - other)(t*other - 1)
        q = poly_mul(poly_mul([-1, 0, 1], [-other, 1]), [-1, other])
        banned = [other]
        ts = distinct_points(r, len(q) + 1, banned)
        t_hold = distinct_points(r, 1, banned + ts)[0]

        def at(t):
            xt = (t, x[1]) if b == 1 else (x[0], t)
            return op_B(b, xt, params)

        want = derivative_by_interpolation(at, q, ts, t_hold, space.dim)
        x_hold = (t_hold, x[1]) if b == 1 else (x[0], t_hold)
        got = op_dB_dx(b, b, x_hold, params).to_dense()
        assert got == want
        return True

    for _ in range(3):
        sample_point(rng, body)


def test_db_dx_interpolation_oracle_cross_coordinate():
    """dB_b/dx_a for a != b against the same oracle, t = x_a."""
    half, n = 2, 2
    space = Space(n, half)

    def body(r):
        params = rand_params(r, space)
        x = generic_x(r, half)
        b, a = r.choice(((1, 2), (2, 1)))
        xb = x[b - 1]
        # q(t) = (x_b - t)(x_b t - 1)
        q = poly_mul([xb, -1], [-1, xb])
        banned = [xb]
        ts = distinct_points(r, len(q) + 1, banned)
        t_hold = distinct_points(r, 1, banned + ts)[0]

        def at(t):
            xt = tuple(t if i == a - 1 else v for i, v in enumerate(x))
            return op_B(b, xt, params)

        want = derivative_by_interpolation(at, q, ts, t_hold, space.dim)
        x_hold = tuple(t_hold if i == a - 1 else v for i, v in enumerate(x))
        got = op_dB_dx(b, a, x_hold, params).to_dense()
        assert got == want
        return True

    for _ in range(3):
        sample_point(rng, body)


def test_dq_dx_interpolation_oracle():
    """The transport operator is affine in T(x), so entries are quadratic
    over t after clearing one power; interpolation certifies op_dQ_dx."""
    n, half = 2, 2
    space = Space(n, half)

    def body(r):
        params = rand_params(r, space)
        x = rand_tuple(r, half, nonzero=True)
        y = rand_tuple(r, n)
        a = r.choice((1, 2))
        m = r.choice((1, 2))
        q = [0, 1]
        ts = distinct_points(r, 4, [])
        t_hold = distinct_points(r, 1, list(ts))[0]

        def at(t):
            xt = tuple(t if i == a - 1 else v for i, v in enumerate(x))
            return op_Q(m, xt, y, params)

        want = derivative_by_interpolation(at, q, ts, t_hold, space.dim)
        x_hold = tuple(t_hold if i == a - 1 else v for i, v in enumerate(x))
        got = op_dQ_dx(m, x_hold, y, params, a).to_dense()
        assert got == want
        return True

    for _ in range(3):
        sample_point(rng, body)


def test_intertwining_defects_zero():
    for half in (1, 2):
        for _ in range(4):

            def body(r):
                lam = rand_rational(r)
                k = rand_rational(r, nonzero=True)
                l_code = r.randrange(2 * half)
                m_code = r.randrange(2 * half)
                d1, d2 = intertwining_defects(lam, k, half, l_code, m_code)
                assert d1.is_zero() and d2.is_zero()
                return True

            sample_point(rng, body)


def test_ad_identities_zero():
    half = 2
    space = Space(2, half)
    for _ in range(4):

        def body(r):
            params = rand_params(r, space)
            x = generic_x(r, half)
            lam = rand_rational(r, nonzero=True)
            gamma = rand_rational(r, nonzero=True)
            a = r.choice((1, 2))
            assert ad_ones_on_I_defect(a, lam, gamma, params).is_zero()
            d1, d2 = ad_reflection_on_M_defects(a, x, gamma, params)
            assert d1.is_zero() and d2.is_zero()
            assert ad_coordinate_on_I_defect(a, gamma, x, params).is_zero()
            return True

        sample_point(rng, body)


def test_ad_tail_defect_zero():
    n, half = 2, 2
    space = Space(n, half)
    for _ in range(3):

        def body(r):
            params = rand_params(r, space)
            x = generic_x(r, half)
            y = rand_tuple(r, n)
            for a in (1, 2):
                for m in (1, 2):
                    assert ad_tail_defect(a, m, x, y, params).is_zero()
            return True

        sample_point(rng, body)


def test_dk_term_dual_route_agrees():
    """op_dK_term raises RouteMismatch internally when its two builds
    disagree, so returning at all is the dual-route certificate."""
    assert issubclass(RouteMismatch, AssertionError)
    n, half = 2, 2
    space = Space(n, half)

    def body(r):
        params = rand_params(r, space)
        x = generic_x(r, half)
        y = rand_tuple(r, n)
        for a in (1, 2):
            for m in (1, 2):
                op_dK_term(m, a, x, y, params)
        return True

    for _ in range(3):
        sample_point(rng, body)


def test_compatibility_both_forms():
    for n, half in ((1, 1), (2, 2), (3, 2), (2, 3)):
        space = Space(n, half)
        reps = 3 if (n, half) == (2, 2) else 1
        for _ in range(reps):

            def body(r):
                params = rand_params(r, space)
                x = generic_x(r, half)
                y = rand_tuple(r, n)
                for a in range(1, half + 1):
                    for m in range(1, n + 1):
                        split, direct = check_compatibility(a, m, x, y, params)
                        assert split.is_zero(), (n, half, a, m)
                        assert direct.is_zero(), (n, half, a, m)
                return True

            sample_point(rng, body)


def test_compat_forms_are_independent_routes(monkeypatch):
    """Corrupting the transport derivative breaks only the direct form;
    corrupting the middle-reflection term breaks only the split form.
    That fails unless the two residuals really use disjoint ingredients."""
    import bqkz.compat_ops as co

    space = Space(2, 2)

    def body(r):
        params = rand_params(r, space)
        x = generic_x(r, 2)
        y = rand_tuple(r, 2)
        return params, x, y

    params, x, y = sample_point(rng, body)
    ident = LinOp.identity(space)

    real_dq = co.op_dQ_dx
    monkeypatch.setattr(co, "op_dQ_dx", lambda *a, **kw: real_dq(*a, **kw) + ident)
    assert not compat_direct(1, 1, x, y, params).is_zero()
    assert compat_three_term(1, 1, x, y, params).is_zero()
    monkeypatch.setattr(co, "op_dQ_dx", real_dq)

    real_dk = co.op_dK_term
    monkeypatch.setattr(co, "op_dK_term", lambda *a, **kw: real_dk(*a, **kw) + ident)
    assert not compat_three_term(1, 1, x, y, params).is_zero()
    assert compat_direct(1, 1, x, y, params).is_zero()
