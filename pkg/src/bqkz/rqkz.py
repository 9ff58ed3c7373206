"""Exchange and reflection operators and the lattice transport operators.

The two-site exchange operator R(lam) = (lam + k P)/(lam + k) solves the
Yang-Baxter equation; the site reflection operator K(lam|x, beta) =
(lam T(x) + beta)/(lam + beta) solves the boundary Yang-Baxter equation
against it.  The transport operator for site m is an ordered product of
2(n-1) exchange factors and two reflection factors (one at coordinates x
with strength beta, one at the all-ones point with strength alpha); the
family is consistent: shifting the l-th argument in the m-th operator and
composing commutes with doing it the other way around.

Every factor checks its own denominator at build time, so a pole in any
requested construction raises PoleError immediately with the offending
factor identified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .sampling import rand_rational
from .scalar_field import PoleError, div, inv, rat
from .tensor_ops import LinOp, Space, embed_pair, embed_site


@dataclass(frozen=True)
class ModelParams:
    """Model constants: shift step c, coupling k, boundary strengths alpha
    (all-ones reflection) and beta (coordinate reflection), and the tensor
    space the transport operators act on."""

    c: object
    k: object
    alpha: object
    beta: object
    space: Space

    @classmethod
    def random(cls, rng, space: Space) -> "ModelParams":
        return cls(
            c=rand_rational(rng, nonzero=True),
            k=rand_rational(rng, nonzero=True),
            alpha=rand_rational(rng, nonzero=True),
            beta=rand_rational(rng, nonzero=True),
            space=space,
        )


@dataclass(frozen=True)
class XPoint:
    """Reflection coordinates, one nonzero scalar per label index."""

    x: tuple

    def __post_init__(self):
        if any(v == 0 for v in self.x):
            raise PoleError("reflection coordinates must be nonzero")

    def __iter__(self):
        return iter(self.x)

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        return self.x[i]


@dataclass(frozen=True)
class YPoint:
    """Lattice arguments, one scalar per tensor site."""

    y: tuple

    def __iter__(self):
        return iter(self.y)

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i):
        return self.y[i]


def ones(count: int) -> tuple:
    return (1,) * count


def op_P(half_dim: int) -> LinOp:
    """Two-site swap."""
    sp = Space(2, half_dim)
    d = sp.site_dim
    return LinOp(sp, {(a, b): {(b, a): 1} for a in range(d) for b in range(d)})


def op_T(x: Sequence) -> LinOp:
    """Site reflection: v_a -> x_a^{-1} v_abar, v_abar -> x_a v_a."""
    x = tuple(x)
    half = len(x)
    sp = Space(1, half)
    cols = {}
    for a, xa in enumerate(x):
        if xa == 0:
            raise PoleError("reflection coordinate %d is zero" % (a + 1))
        cols[(a,)] = {(half + a,): inv(xa)}
        cols[(half + a,)] = {(a,): xa}
    return LinOp(sp, cols)


def op_dT_dx(x: Sequence, a: int) -> LinOp:
    """Derivative of op_T in the a-th coordinate (a is 1-based)."""
    x = tuple(x)
    half = len(x)
    sp = Space(1, half)
    xa = x[a - 1]
    if xa == 0:
        raise PoleError("reflection coordinate %d is zero" % a)
    return LinOp(
        sp,
        {
            (a - 1,): {(half + a - 1,): -inv(xa * xa)},
            (half + a - 1,): {(a - 1,): 1},
        },
    )


def op_R(lam, params: ModelParams) -> LinOp:
    """Two-site exchange operator (lam + k P)/(lam + k)."""
    return op_R_k(lam, params.k, params.space.half_dim)


def op_R_k(lam, k, half_dim: int) -> LinOp:
    den = lam + k
    if den == 0:
        raise PoleError("exchange operator pole: argument equals -coupling")
    p = op_P(half_dim)
    return (LinOp.identity(p.space).scale(lam) + p.scale(k)).scale(inv(den))


def op_K(lam, x: Sequence, beta) -> LinOp:
    """Site reflection factor (lam T(x) + beta)/(lam + beta)."""
    den = lam + beta
    if den == 0:
        raise PoleError("reflection factor pole: argument equals -strength")
    t = op_T(x)
    return (t.scale(lam) + LinOp.identity(t.space).scale(beta)).scale(inv(den))


def op_dK_dx(lam, x: Sequence, beta, a: int) -> LinOp:
    """Derivative of op_K in the a-th reflection coordinate."""
    den = lam + beta
    if den == 0:
        raise PoleError("reflection factor pole: argument equals -strength")
    return op_dT_dx(x, a).scale(div(lam, den))


def q_factor_list(m: int, n: int):
    """Symbolic factor sequence of the site-m transport operator, leftmost
    factor first.

    Each entry is (kind, sites, yterms, cmult): kind "R" (exchange, two
    sites), "Kx" (coordinate reflection, strength beta) or "K1" (all-ones
    reflection, strength alpha); the factor argument is
    sum(coef * y[idx] for (idx, coef) in yterms) + cmult * c.
    """
    if not 1 <= m <= n:
        raise ValueError("site index out of range")
    factors = []
    for j in range(m - 1, 0, -1):
        factors.append(("R", (m, j), ((m, 1), (j, -1)), -1))
    factors.append(("Kx", (m,), ((m, 1),), rat(-1, 2)))
    for j in range(1, m):
        factors.append(("R", (j, m), ((j, 1), (m, 1)), 0))
    for j in range(m + 1, n + 1):
        factors.append(("R", (m, j), ((m, 1), (j, 1)), 0))
    factors.append(("K1", (m,), ((m, 1),), 0))
    for j in range(n, m, -1):
        factors.append(("R", (m, j), ((m, 1), (j, -1)), 0))
    return factors


def _factor_arg(desc, y: Sequence, c):
    _, _, yterms, cmult = desc
    arg = cmult * c
    for idx, coef in yterms:
        arg = arg + coef * y[idx - 1]
    return arg


def _factor_op(desc, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    kind, sites, _, _ = desc
    space = params.space
    arg = _factor_arg(desc, y, params.c)
    if kind == "R":
        return embed_pair(op_R(arg, params), sites[0], sites[1], space)
    if kind == "Kx":
        return embed_site(op_K(arg, x, params.beta), sites[0], space)
    if kind == "K1":
        return embed_site(op_K(arg, ones(space.half_dim), params.alpha), sites[0], space)
    raise ValueError("unknown factor kind %r" % (kind,))


def invert_descs(descs):
    """Descriptor list of the inverse product: reversed order, negated args.

    Valid because every factor satisfies F(arg)^{-1} = F(-arg).
    """
    return [
        (kind, sites, tuple((idx, -coef) for idx, coef in yterms), -cmult)
        for kind, sites, yterms, cmult in reversed(descs)
    ]


def compose_descs(descs, x, y, params: ModelParams) -> LinOp:
    """Compose factor descriptors, leftmost descriptor applied last."""
    out = LinOp.identity(params.space)
    for desc in reversed(descs):
        out = _factor_op(desc, x, y, params).compose(out)
    return out


def q_split_descs(m: int, n: int):
    """Factor descriptors of the transport operator grouped as
    (leading exchange product, middle coordinate reflection, trailing part)."""
    factors = q_factor_list(m, n)
    head = [f for f in factors if f[0] == "R" and f[3] == -1]
    return head, factors[len(head)], factors[len(head) + 1 :]


def op_Q(m: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    """Transport operator for site m at coordinates x and arguments y."""
    return compose_descs(q_factor_list(m, params.space.n), x, y, params)


def op_Q_split(m: int, x: Sequence, y: Sequence, params: ModelParams):
    """(leading exchange product, middle coordinate reflection, trailing part).

    The three parts compose left-to-right to the full transport operator.
    """
    head, mid, tail = q_split_descs(m, params.space.n)
    return (
        compose_descs(head, x, y, params),
        _factor_op(mid, x, y, params),
        compose_descs(tail, x, y, params),
    )


def op_Q_inv(m: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    """Inverse transport operator, assembled from factor-wise inverses."""
    return compose_descs(invert_descs(q_factor_list(m, params.space.n)), x, y, params)


def op_dQ_dx(m: int, x: Sequence, y: Sequence, params: ModelParams, a: int) -> LinOp:
    """Derivative of the transport operator in the a-th coordinate.

    Only the middle reflection factor depends on x, so the derivative is
    (leading part) o (middle derivative) o (trailing part).
    """
    head, mid, tail = q_split_descs(m, params.space.n)
    arg = _factor_arg(mid, y, params.c)
    dmid = embed_site(op_dK_dx(arg, x, params.beta, a), m, params.space)
    left = compose_descs(head, x, y, params)
    right = compose_descs(tail, x, y, params)
    return left.compose(dmid).compose(right)


def shift_y(y: Sequence, m: int, c) -> tuple:
    """Replace the m-th argument by y_m - c."""
    y = tuple(y)
    return y[: m - 1] + (y[m - 1] - c,) + y[m:]


def ybe_defect(k, l1, l2, l3, half_dim: int) -> LinOp:
    """Yang-Baxter defect on three sites; zero iff the equation holds."""
    sp = Space(3, half_dim)

    def r(i, j, arg):
        return embed_pair(op_R_k(arg, k, half_dim), i, j, sp)

    lhs = r(1, 2, l1 - l2) @ r(1, 3, l1 - l3) @ r(2, 3, l2 - l3)
    rhs = r(2, 3, l2 - l3) @ r(1, 3, l1 - l3) @ r(1, 2, l1 - l2)
    return lhs - rhs


def bybe_defect(k, beta, x: Sequence, l1, l2) -> LinOp:
    """Boundary Yang-Baxter defect on two sites; zero iff the equation holds."""
    half = len(x)
    sp = Space(2, half)

    def r(i, j, arg):
        return embed_pair(op_R_k(arg, k, half), i, j, sp)

    k1 = embed_site(op_K(l1, x, beta), 1, sp)
    k2 = embed_site(op_K(l2, x, beta), 2, sp)
    lhs = r(1, 2, l1 - l2) @ k1 @ r(2, 1, l1 + l2) @ k2
    rhs = k2 @ r(2, 1, l1 + l2) @ k1 @ r(1, 2, l1 - l2)
    return lhs - rhs


def r_unitarity_defect(k, lam, half_dim: int) -> LinOp:
    sp = Space(2, half_dim)
    return op_R_k(lam, k, half_dim) @ op_R_k(-lam, k, half_dim) - LinOp.identity(sp)


def k_unitarity_defect(lam, x: Sequence, beta) -> LinOp:
    sp = Space(1, len(x))
    return op_K(lam, x, beta) @ op_K(-lam, x, beta) - LinOp.identity(sp)


def swap_factor_defect(k, lam, half_dim: int) -> LinOp:
    """(lam P - k) - (lam - k) P R(lam)^{-1}; zero at every regular point."""
    p = op_P(half_dim)
    sp = p.space
    lhs = p.scale(lam) - LinOp.identity(sp).scale(k)
    rhs = (p @ op_R_k(-lam, k, half_dim)).scale(lam - k)
    return lhs - rhs


def flip_factor_defect(lam, x: Sequence, beta) -> LinOp:
    """(lam T(x) - beta) - (lam - beta) K(lam|x,beta)^{-1}; zero when regular."""
    t = op_T(x)
    lhs = t.scale(lam) - LinOp.identity(t.space).scale(beta)
    rhs = op_K(-lam, x, beta).scale(lam - beta)
    return lhs - rhs


def transport_consistency_defect(m: int, l: int, x, y, params: ModelParams) -> LinOp:
    """Exchange of two shifted transport operators; zero iff consistent."""
    if m == l:
        raise ValueError("need two distinct sites")
    c = params.c
    lhs = op_Q(m, x, shift_y(y, l, c), params) @ op_Q(l, x, y, params)
    rhs = op_Q(l, x, shift_y(y, m, c), params) @ op_Q(m, x, y, params)
    return lhs - rhs


def q_split_defect(m: int, x, y, params: ModelParams) -> LinOp:
    head, mid, tail = op_Q_split(m, x, y, params)
    return head @ mid @ tail - op_Q(m, x, y, params)


def q_inverse_defect(m: int, x, y, params: ModelParams) -> LinOp:
    return op_Q_inv(m, x, y, params) @ op_Q(m, x, y, params) - LinOp.identity(params.space)
