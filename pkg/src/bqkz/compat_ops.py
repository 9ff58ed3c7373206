"""Commuting differential-operator family compatible with the transport
operators, and exact certification of the identities behind it.

The matrix part of the a-th differential operator is L_a = A_a(y) + B_a(x):
A_a collects the site arguments y and the all-ones boundary strength, B_a
the reflection coordinates x.  The full differential operator adds the
scaling derivative c x_a d/dx_a, which never appears as a matrix here;
derivative terms enter the checks through hand-coded coefficient
derivatives only.

The same L_a has a second construction from a one-site block I_a and a
two-site block M_a summed over sites and site pairs.  Keeping both routes
alive (no shared code paths beyond the matrix units) is deliberate: each
certification below compares structurally different computations.
"""

from __future__ import annotations

from typing import Sequence

from .rqkz import (
    ModelParams,
    compose_descs,
    invert_descs,
    ones,
    op_dQ_dx,
    op_K,
    op_P,
    op_Q,
    op_R_k,
    q_split_descs,
    shift_y,
)
from .scalar_field import PoleError, div, inv, rat
from .tensor_ops import LinOp, Space, commutator, embed_pair, embed_site, site_tensor


class RouteMismatch(AssertionError):
    """Two supposedly equal computation routes disagreed exactly."""


def _code(half: int, a: int, barred: bool) -> int:
    if not 1 <= a <= half:
        raise ValueError("label index out of range")
    return a - 1 + (half if barred else 0)


def site_unit(half: int, row_code: int, col_code: int) -> LinOp:
    return LinOp(Space(1, half), {(col_code,): {(row_code,): 1}})


def _eu(half, ra, rbar, ca, cbar) -> LinOp:
    """Matrix unit from label data: rows/cols given as (index, barred)."""
    return site_unit(half, _code(half, ra, rbar), _code(half, ca, cbar))


def op_E(half: int, a: int, b: int) -> LinOp:
    """Label-preserving pair unit: e_ab plus its barred copy."""
    return _eu(half, a, False, b, False) + _eu(half, a, True, b, True)


def op_Ebar(half: int, a: int, b: int) -> LinOp:
    """Bar-exchanging pair unit: e to the barred column plus the mirror."""
    return _eu(half, a, False, b, True) + _eu(half, a, True, b, False)


def pair_U(half: int, a: int, b: int) -> LinOp:
    return site_tensor(_eu(half, a, False, b, False), op_E(half, b, a)) + site_tensor(
        _eu(half, b, True, a, True), op_E(half, a, b)
    )


def pair_J(half: int, a: int, b: int) -> LinOp:
    return site_tensor(_eu(half, a, False, b, True), op_Ebar(half, b, a)) + site_tensor(
        _eu(half, b, False, a, True), op_Ebar(half, a, b)
    )


def pair_K(half: int, a: int, b: int) -> LinOp:
    return site_tensor(_eu(half, a, True, b, False), op_Ebar(half, b, a)) + site_tensor(
        _eu(half, b, True, a, False), op_Ebar(half, a, b)
    )


def _pair_sum(space: Space, two_site: LinOp) -> LinOp:
    out = LinOp.zero(space)
    for i in range(1, space.n + 1):
        for j in range(i + 1, space.n + 1):
            out = out + embed_pair(two_site, i, j, space)
    return out


def coll_X(a: int, b: int, space: Space) -> LinOp:
    half = space.half_dim
    two = site_tensor(_eu(half, a, False, b, False), op_E(half, b, a)) + site_tensor(
        _eu(half, b, True, a, True), op_E(half, a, b)
    )
    return _pair_sum(space, two)


def coll_Y(a: int, b: int, space: Space) -> LinOp:
    half = space.half_dim
    two = site_tensor(_eu(half, a, False, b, True), op_Ebar(half, b, a)) + site_tensor(
        _eu(half, b, False, a, True), op_Ebar(half, a, b)
    )
    return _pair_sum(space, two)


def coll_Z(a: int, b: int, space: Space) -> LinOp:
    half = space.half_dim
    two = site_tensor(_eu(half, a, True, b, False), op_Ebar(half, b, a)) + site_tensor(
        _eu(half, b, True, a, False), op_Ebar(half, a, b)
    )
    return _pair_sum(space, two)


def op_A(a: int, y: Sequence, params: ModelParams) -> LinOp:
    """Argument part of the a-th differential operator family."""
    space = params.space
    half = space.half_dim
    diag = _eu(half, a, False, a, False) - _eu(half, a, True, a, True)
    raise_a = _eu(half, a, False, a, True)
    out = LinOp.zero(space)
    for j, yj in enumerate(y, start=1):
        out = out + embed_site(diag, j, space).scale(yj)
        out = out + embed_site(raise_a, j, space).scale(2 * params.alpha)
    pair_part = LinOp.zero(space)
    for p in range(1, a):
        pair_part = pair_part - coll_X(p, a, space)
    for p in range(a + 1, half + 1):
        pair_part = pair_part + coll_X(a, p, space)
    for p in range(1, half + 1):
        pair_part = pair_part + coll_Y(a, p, space)
    return out + pair_part.scale(params.k)


def _check_x_generic(a: int, x: Sequence):
    xa = x[a - 1]
    if xa == 0 or xa * xa == 1:
        raise PoleError("coordinate %d may not be 0 or a unit square root" % a)
    for p, xp in enumerate(x, start=1):
        if p == a:
            continue
        if xa == xp or xa * xp == 1:
            raise PoleError("coordinates %d and %d are not generic" % (a, p))


def op_B(a: int, x: Sequence, params: ModelParams) -> LinOp:
    """Coordinate part of the a-th differential operator family."""
    space = params.space
    half = space.half_dim
    x = tuple(x)
    _check_x_generic(a, x)
    xa = x[a - 1]
    out = LinOp.zero(space)
    coeff0 = div(2 * (params.alpha + params.beta * xa), xa * xa - 1)
    ebar_aa = op_Ebar(half, a, a)
    for j in range(1, space.n + 1):
        out = out + embed_site(ebar_aa, j, space).scale(coeff0)
    pair_part = LinOp.zero(space)
    for p in range(1, a):
        w = div(xa, xa - x[p - 1])
        pair_part = pair_part + (coll_X(a, p, space) + coll_X(p, a, space)).scale(w)
    for p in range(a + 1, half + 1):
        w = div(x[p - 1], xa - x[p - 1])
        pair_part = pair_part + (coll_X(a, p, space) + coll_X(p, a, space)).scale(w)
    for p in range(1, half + 1):
        w = inv(xa * x[p - 1] - 1)
        pair_part = pair_part + (coll_Y(a, p, space) + coll_Z(a, p, space)).scale(w)
    return out + pair_part.scale(params.k)


def op_L(a: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    return op_A(a, y, params) + op_B(a, x, params)


def op_I(a: int, lam, gamma, params: ModelParams) -> LinOp:
    """One-site block of the alternative construction of L_a."""
    half = params.space.half_dim
    if lam == 0 or lam * lam == 1:
        raise PoleError("block argument may not be 0 or a unit square root")
    ilam = inv(lam)
    out = (_eu(half, a, False, a, False) - _eu(half, a, True, a, True)).scale(gamma)
    out = out + _eu(half, a, True, a, False).scale(
        div(2 * (params.alpha + params.beta * lam), lam * lam - 1)
    )
    out = out + _eu(half, a, False, a, True).scale(
        div(2 * (params.alpha + params.beta * ilam), 1 - ilam * ilam)
    )
    return out


def op_M(a: int, x: Sequence, params: ModelParams) -> LinOp:
    """Two-site block of the alternative construction of L_a."""
    half = params.space.half_dim
    x = tuple(x)
    _check_x_generic(a, x)
    xa = x[a - 1]
    ixa = inv(xa)
    k = params.k
    lead_site = _eu(half, a, False, a, True).scale(xa) + _eu(half, a, True, a, False).scale(ixa)
    mixer = _eu(half, a, False, a, True) + _eu(half, a, True, a, False)
    out = site_tensor(lead_site, mixer).scale(div(2 * k, xa - ixa))
    for p in range(1, half + 1):
        if p == a:
            continue
        xp = x[p - 1]
        out = out + pair_U(half, a, p).scale(div(k * xa, xa - xp))
        out = out + pair_U(half, p, a).scale(div(k * xp, xa - xp))
        out = out + pair_J(half, a, p).scale(div(k * xa * xp, xa * xp - 1))
        out = out + pair_K(half, a, p).scale(div(k, xa * xp - 1))
    return out


def op_M_swapped(a: int, x: Sequence, params: ModelParams) -> LinOp:
    """Two-site block with the tensor slots exchanged, built term by term.

    Not implemented as a conjugation of op_M; the equality with P op_M P is
    one of the certified identities.
    """
    half = params.space.half_dim
    x = tuple(x)
    _check_x_generic(a, x)
    xa = x[a - 1]
    ixa = inv(xa)
    k = params.k
    lead_site = _eu(half, a, False, a, True).scale(xa) + _eu(half, a, True, a, False).scale(ixa)
    mixer = _eu(half, a, False, a, True) + _eu(half, a, True, a, False)
    out = site_tensor(mixer, lead_site).scale(div(2 * k, xa - ixa))
    for p in range(1, half + 1):
        if p == a:
            continue
        xp = x[p - 1]
        out = out + site_tensor(op_E(half, p, a), _eu(half, a, False, p, False)).scale(
            div(k * xa, xa - xp)
        )
        out = out + site_tensor(op_E(half, a, p), _eu(half, p, True, a, True)).scale(
            div(k * xa, xa - xp)
        )
        out = out + site_tensor(op_E(half, a, p), _eu(half, p, False, a, False)).scale(
            div(k * xp, xa - xp)
        )
        out = out + site_tensor(op_E(half, p, a), _eu(half, a, True, p, True)).scale(
            div(k * xp, xa - xp)
        )
        out = out + site_tensor(op_Ebar(half, p, a), _eu(half, a, False, p, True)).scale(
            div(k * xa * xp, xa * xp - 1)
        )
        out = out + site_tensor(op_Ebar(half, a, p), _eu(half, p, False, a, True)).scale(
            div(k * xa * xp, xa * xp - 1)
        )
        out = out + site_tensor(op_Ebar(half, p, a), _eu(half, a, True, p, False)).scale(
            div(k, xa * xp - 1)
        )
        out = out + site_tensor(op_Ebar(half, a, p), _eu(half, p, True, a, False)).scale(
            div(k, xa * xp - 1)
        )
    return out


def m_conjugation_defect(a: int, x: Sequence, params: ModelParams) -> LinOp:
    """Slot-exchanged pair block minus the flip conjugate of the direct one."""
    from .rqkz import op_P

    flip = op_P(params.space.half_dim)
    direct = op_M(a, x, params)
    return op_M_swapped(a, x, params) - flip @ direct @ flip


def op_L_from_blocks(a: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    """L_a assembled from the one-site and two-site blocks.

    Independent route kept separate from op_L on purpose; their equality is
    a certified identity, not a refactoring opportunity.
    """
    space = params.space
    xa = tuple(x)[a - 1]
    out = LinOp.zero(space)
    for j, yj in enumerate(y, start=1):
        out = out + embed_site(op_I(a, xa, yj, params), j, space)
    m2 = op_M(a, x, params)
    return out + _pair_sum(space, m2)


def comm_AA_defect(a: int, b: int, y: Sequence, params: ModelParams) -> LinOp:
    return commutator(op_A(a, y, params), op_A(b, y, params))


def comm_LL_defect(a: int, b: int, x, y, params: ModelParams) -> LinOp:
    return commutator(op_L(a, x, y, params), op_L(b, x, y, params))


def block_assembly_defect(a: int, x, y, params: ModelParams) -> LinOp:
    return op_L(a, x, y, params) - op_L_from_blocks(a, x, y, params)


def op_dB_dx(b: int, a: int, x: Sequence, params: ModelParams) -> LinOp:
    """Closed-form derivative of op_B(b) in the a-th coordinate.

    Coefficient derivatives are hand-coded; no finite differences.
    """
    space = params.space
    half = space.half_dim
    x = tuple(x)
    _check_x_generic(b, x)
    xb = x[b - 1]
    out = LinOp.zero(space)
    if a == b:
        alpha, beta = params.alpha, params.beta
        d0 = div(
            2 * (-beta * xb * xb - 2 * alpha * xb - beta),
            (xb * xb - 1) * (xb * xb - 1),
        )
        ebar = op_Ebar(half, b, b)
        for j in range(1, space.n + 1):
            out = out + embed_site(ebar, j, space).scale(d0)
        pair_part = LinOp.zero(space)
        for p in range(1, b):
            d = div(-x[p - 1], (xb - x[p - 1]) ** 2)
            pair_part = pair_part + (coll_X(b, p, space) + coll_X(p, b, space)).scale(d)
        for p in range(b + 1, half + 1):
            d = div(-x[p - 1], (xb - x[p - 1]) ** 2)
            pair_part = pair_part + (coll_X(b, p, space) + coll_X(p, b, space)).scale(d)
        for p in range(1, half + 1):
            if p == b:
                d = div(-2 * xb, (xb * xb - 1) ** 2)
            else:
                d = div(-x[p - 1], (xb * x[p - 1] - 1) ** 2)
            pair_part = pair_part + (coll_Y(b, p, space) + coll_Z(b, p, space)).scale(d)
        return out + pair_part.scale(params.k)
    xa = x[a - 1]
    pair_part = LinOp.zero(space)
    if a < b:
        d = div(xb, (xb - xa) ** 2)
        pair_part = pair_part + (coll_X(b, a, space) + coll_X(a, b, space)).scale(d)
    else:
        d = div(xb, (xb - xa) ** 2)
        pair_part = pair_part + (coll_X(b, a, space) + coll_X(a, b, space)).scale(d)
    d = div(-xb, (xb * xa - 1) ** 2)
    pair_part = pair_part + (coll_Y(b, a, space) + coll_Z(b, a, space)).scale(d)
    return pair_part.scale(params.k)


def check_cross_derivative(a: int, b: int, x, y, params: ModelParams) -> LinOp:
    """x_a dB_b/dx_a - x_b dB_a/dx_b; zero iff the family commutes."""
    x = tuple(x)
    lhs = op_dB_dx(b, a, x, params).scale(x[a - 1])
    rhs = op_dB_dx(a, b, x, params).scale(x[b - 1])
    return lhs - rhs


def check_comm_IM(a: int, x, y1, y2, params: ModelParams) -> LinOp:
    """Exchange conjugation of the block sum versus slot-swapped blocks."""
    half = params.space.half_dim
    sp2 = Space(2, half)
    two_params = ModelParams(params.c, params.k, params.alpha, params.beta, sp2)
    xa = tuple(x)[a - 1]
    blocks = (
        embed_site(op_I(a, xa, y1, two_params), 1, sp2)
        + embed_site(op_I(a, xa, y2, two_params), 2, sp2)
    )
    m12 = op_M(a, x, two_params)
    m21 = embed_pair(m12, 2, 1, sp2)
    m12 = embed_pair(m12, 1, 2, sp2)
    r = op_R_k(y1 - y2, params.k, half)
    rinv = op_R_k(y2 - y1, params.k, half)
    lhs = r @ (blocks + m12) @ rinv
    return lhs - (blocks + m21)


def symmetric_part(a: int, x, y1, y2, params: ModelParams) -> LinOp:
    """The swap-invariant bracketed part of the two-site block sum."""
    half = params.space.half_dim
    sp2 = Space(2, half)
    x = tuple(x)
    xa = x[a - 1]
    ixa = inv(xa)
    alpha, beta, k = params.alpha, params.beta, params.k

    e_aa = _eu(half, a, False, a, False)
    e_bb = _eu(half, a, True, a, True)
    e_up = _eu(half, a, False, a, True)
    e_dn = _eu(half, a, True, a, False)

    s = LinOp.zero(sp2)
    c_dn = div(2 * (alpha + beta * xa), xa * xa - 1)
    c_up = div(2 * (alpha + beta * ixa), 1 - ixa * ixa)
    for j in (1, 2):
        s = s + embed_site(e_aa - e_bb, j, sp2).scale(y1)
        s = s + embed_site(e_dn, j, sp2).scale(c_dn)
        s = s + embed_site(e_up, j, sp2).scale(c_up)

    lead = (
        site_tensor(e_up, e_up).scale(xa)
        + site_tensor(e_dn, e_dn).scale(ixa)
        + (site_tensor(e_up, e_dn) + site_tensor(e_dn, e_up)).scale(ixa)
    )
    s = s + lead.scale(div(2 * k, xa - ixa))

    for p in range(1, half + 1):
        if p == a:
            continue
        xp = x[p - 1]
        s = s + (pair_U(half, a, p) + pair_U(half, p, a)).scale(div(k * xp, xa - xp))
        s = s + (pair_J(half, a, p) + pair_K(half, a, p)).scale(div(k, xa * xp - 1))

    tail = LinOp.zero(sp2)
    for p in range(1, half + 1):
        if p == a:
            continue
        tail = tail + site_tensor(_eu(half, p, True, a, True), _eu(half, a, False, p, False))
        tail = tail + site_tensor(_eu(half, a, False, p, False), _eu(half, p, True, a, True))
        tail = tail + site_tensor(_eu(half, p, False, a, True), _eu(half, a, False, p, True))
        tail = tail + site_tensor(_eu(half, a, False, p, True), _eu(half, p, False, a, True))
    tail = tail - site_tensor(e_aa, e_aa) - site_tensor(e_bb, e_bb)
    return s + tail.scale(k)


def remainder_part(a: int, y1, y2, params: ModelParams) -> LinOp:
    """What is left of the two-site block sum after the symmetric part."""
    half = params.space.half_dim
    sp2 = Space(2, half)
    e_aa = _eu(half, a, False, a, False)
    e_bb = _eu(half, a, True, a, True)
    out = embed_site(e_aa - e_bb, 2, sp2).scale(y2 - y1)
    acc = LinOp.zero(sp2)
    ca = _code(half, a, False)
    cabar = _code(half, a, True)
    for p in range(2 * half):
        acc = acc + site_tensor(site_unit(half, ca, p), site_unit(half, p, ca))
        acc = acc + site_tensor(site_unit(half, p, cabar), site_unit(half, cabar, p))
    return out + acc.scale(params.k)


def remainder_image(a: int, y1, y2, params: ModelParams) -> LinOp:
    """Exchange-conjugated remainder, transcribed from the closed form."""
    half = params.space.half_dim
    sp2 = Space(2, half)
    e_aa = _eu(half, a, False, a, False)
    e_bb = _eu(half, a, True, a, True)
    out = embed_site(e_aa - e_bb, 2, sp2).scale(y2 - y1)
    acc = LinOp.zero(sp2)
    ca = _code(half, a, False)
    cabar = _code(half, a, True)
    for p in range(2 * half):
        acc = acc + site_tensor(site_unit(half, p, ca), site_unit(half, ca, p))
        acc = acc + site_tensor(site_unit(half, cabar, p), site_unit(half, p, cabar))
    return out + acc.scale(params.k)


def intertwining_defects(lam, k, half: int, l_code: int, m_code: int):
    """Both exchange intertwining identities for one label pair, as defects."""
    sp2 = Space(2, half)
    r = op_R_k(lam, k, half)
    e_lm = site_unit(half, l_code, m_code)
    one = LinOp.identity(Space(1, half))
    base = site_tensor(one, e_lm).scale(lam)
    left_sum = LinOp.zero(sp2)
    right_sum = LinOp.zero(sp2)
    for p in range(2 * half):
        left_sum = left_sum + site_tensor(
            site_unit(half, p, m_code), site_unit(half, l_code, p)
        )
        right_sum = right_sum + site_tensor(
            site_unit(half, l_code, p), site_unit(half, p, m_code)
        )
    d1 = r @ (base + left_sum.scale(k)) - (base + right_sum.scale(k)) @ r
    d2 = r @ (base - right_sum.scale(k)) - (base - left_sum.scale(k)) @ r
    return d1, d2


def ad_ones_on_I_defect(a: int, lam, gamma, params: ModelParams) -> LinOp:
    """All-ones reflection conjugation flips the sign of the diagonal weight."""
    half = params.space.half_dim
    kf = op_K(gamma, ones(half), params.alpha)
    kb = op_K(-gamma, ones(half), params.alpha)
    return kf @ op_I(a, lam, gamma, params) @ kb - op_I(a, lam, -gamma, params)


def ad_reflection_on_M_defects(a: int, x, gamma, params: ModelParams):
    """Both reflection conjugations fix the two-site block."""
    half = params.space.half_dim
    sp2 = Space(2, half)
    two_params = ModelParams(params.c, params.k, params.alpha, params.beta, sp2)
    m12 = op_M(a, x, two_params)
    k2f = embed_site(op_K(gamma, ones(half), params.alpha), 2, sp2)
    k2b = embed_site(op_K(-gamma, ones(half), params.alpha), 2, sp2)
    k1f = embed_site(op_K(gamma, x, params.beta), 1, sp2)
    k1b = embed_site(op_K(-gamma, x, params.beta), 1, sp2)
    return (k2f @ m12 @ k2b - m12, k1f @ m12 @ k1b - m12)


def _dk_correction(a: int, gamma, x, params: ModelParams) -> LinOp:
    """Site operator added when the coordinate reflection conjugates the
    sign-flipped one-site block back."""
    half = params.space.half_dim
    xa = tuple(x)[a - 1]
    lamc = gamma - div(params.c, 2)
    den = lamc * lamc - params.beta * params.beta
    if den == 0:
        raise PoleError("correction pole: shifted argument hits the strength")
    coeff = div(params.c * params.beta, den)
    body = (_eu(half, a, False, a, False) - _eu(half, a, True, a, True)).scale(params.beta) + (
        _eu(half, a, True, a, False).scale(inv(xa)) - _eu(half, a, False, a, True).scale(xa)
    ).scale(lamc)
    return body.scale(coeff)


def ad_coordinate_on_I_defect(a: int, gamma, x, params: ModelParams) -> LinOp:
    """Coordinate reflection conjugation of the sign-flipped block equals the
    block plus an explicit correction."""
    xa = tuple(x)[a - 1]
    lamc = gamma - div(params.c, 2)
    kf = op_K(lamc, x, params.beta)
    kb = op_K(-lamc, x, params.beta)
    lhs = kf @ op_I(a, xa, -gamma, params) @ kb
    return lhs - op_I(a, xa, gamma, params) - _dk_correction(a, gamma, x, params)


def op_dK_term(m: int, a: int, x, y, params: ModelParams) -> LinOp:
    """c x_a (d/dx_a of the middle reflection) composed with its inverse.

    Computed two ways, derivative route and closed form; raises
    RouteMismatch unless they agree exactly.
    """
    space = params.space
    x = tuple(x)
    xa = x[a - 1]
    lam = y[m - 1] - div(params.c, 2)
    den = lam * lam - params.beta * params.beta
    if den == 0:
        raise PoleError("middle reflection argument hits the strength")

    from .rqkz import op_dK_dx

    route1 = (
        embed_site(op_dK_dx(lam, x, params.beta, a), m, space)
        @ embed_site(op_K(-lam, x, params.beta), m, space)
    ).scale(params.c * xa)

    half = space.half_dim
    body = (_eu(half, a, False, a, False) - _eu(half, a, True, a, True)).scale(lam) - (
        _eu(half, a, False, a, True).scale(xa) - _eu(half, a, True, a, False).scale(inv(xa))
    ).scale(params.beta)
    route2 = embed_site(body, m, space).scale(div(params.c * lam, den))

    if route1 != route2:
        raise RouteMismatch("derivative route and closed form disagree")
    return route2


def proof_piece_two_expected(a: int, m: int, x, y, params: ModelParams) -> LinOp:
    """Block form of the conjugated shifted operator: every site keeps its
    argument except site m, which carries the shifted one; mixed two-site
    blocks at site m sit in slot-(m,j) order."""
    space = params.space
    x = tuple(x)
    xa = x[a - 1]
    out = LinOp.zero(space)
    for j, yj in enumerate(y, start=1):
        arg = yj - params.c if j == m else yj
        out = out + embed_site(op_I(a, xa, arg, params), j, space)
    m2 = op_M(a, x, params)
    for j in range(1, space.n + 1):
        if j != m:
            out = out + embed_pair(m2, m, j, space)
    for i in range(1, space.n + 1):
        for j in range(i + 1, space.n + 1):
            if i != m and j != m:
                out = out + embed_pair(m2, i, j, space)
    return out


def proof_piece_three_expected(a: int, m: int, x, y, params: ModelParams) -> LinOp:
    """Negated block form of the conjugated unshifted operator, including the
    one-site correction at site m."""
    space = params.space
    x = tuple(x)
    xa = x[a - 1]
    out = LinOp.zero(space)
    for j, yj in enumerate(y, start=1):
        out = out + embed_site(op_I(a, xa, yj, params), j, space)
    m2 = op_M(a, x, params)
    for j in range(1, space.n + 1):
        if j != m:
            out = out + embed_pair(m2, m, j, space)
    for i in range(1, space.n + 1):
        for j in range(i + 1, space.n + 1):
            if i != m and j != m:
                out = out + embed_pair(m2, i, j, space)
    out = out + embed_site(_dk_correction(a, y[m - 1], x, params), m, space)
    return -out


def ad_tail_defect(a: int, m: int, x, y, params: ModelParams) -> LinOp:
    """Conjugation by the trailing transport part replaces the site-m block
    argument by its negative and flips the mixed blocks to slot-(m,j) order."""
    space = params.space
    x = tuple(x)
    xa = x[a - 1]
    _, _, tail = q_split_descs(m, space.n)
    fwd = compose_descs(tail, x, y, params)
    bwd = compose_descs(invert_descs(tail), x, y, params)
    lhs = fwd @ op_L(a, x, y, params) @ bwd
    expected = LinOp.zero(space)
    for j, yj in enumerate(y, start=1):
        arg = -yj if j == m else yj
        expected = expected + embed_site(op_I(a, xa, arg, params), j, space)
    m2 = op_M(a, x, params)
    for j in range(1, space.n + 1):
        if j != m:
            expected = expected + embed_pair(m2, m, j, space)
    for i in range(1, space.n + 1):
        for j in range(i + 1, space.n + 1):
            if i != m and j != m:
                expected = expected + embed_pair(m2, i, j, space)
    return lhs - expected


def compat_three_term(a: int, m: int, x, y, params: ModelParams) -> LinOp:
    """Split-form compatibility residual.

    piece one: the middle-reflection derivative term (closed form, cross
    checked); piece two: the shifted operator conjugated by the inverse of
    the leading exchange product; piece three: minus the unshifted operator
    conjugated by middle reflection times trailing part.
    """
    space = params.space
    head, mid, tail = q_split_descs(m, space.n)
    piece1 = op_dK_term(m, a, x, y, params)

    head_inv = compose_descs(invert_descs(head), x, y, params)
    head_fwd = compose_descs(head, x, y, params)
    shifted = op_L(a, x, shift_y(y, m, params.c), params)
    piece2 = head_inv @ shifted @ head_fwd

    mid_fwd = compose_descs([mid], x, y, params)
    mid_inv = compose_descs(invert_descs([mid]), x, y, params)
    tail_fwd = compose_descs(tail, x, y, params)
    tail_inv = compose_descs(invert_descs(tail), x, y, params)
    piece3 = mid_fwd @ tail_fwd @ op_L(a, x, y, params) @ tail_inv @ mid_inv

    return piece1 + piece2 - piece3


def compat_direct(a: int, m: int, x, y, params: ModelParams) -> LinOp:
    """Commutator-form compatibility residual, built only from the transport
    operator, the matrix part L_a, and the analytic transport derivative."""
    x = tuple(x)
    shifted = op_L(a, x, shift_y(y, m, params.c), params)
    q = op_Q(m, x, y, params)
    return shifted @ q - q @ op_L(a, x, y, params) + op_dQ_dx(m, x, y, params, a).scale(
        params.c * x[a - 1]
    )


def check_compatibility(a: int, m: int, x, y, params: ModelParams):
    """Both compatibility residuals (split form, direct form)."""
    return (
        compat_three_term(a, m, x, y, params),
        compat_direct(a, m, x, y, params),
    )
