"""Signed-permutation module, its two commuting actions, and the degenerate
transport factors, with every identity tied back to the transport operators.

Here the label count equals the site count (N = n).  The signed permutation
group acts on site labels (left action, sitewise relabeling); a second,
anti-homomorphic action works by slot swaps and reflection operators (right
action).  The orbit of v_1 x ... x v_n under the left action spans a
coordinate subspace whose basis vectors are indexed by group elements; the
interesting identities of this module hold on that subspace only, so checks
restrict to it explicitly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .rqkz import ModelParams, ones, op_K, op_P, op_Q_inv, op_T
from .scalar_field import PoleError, div, inv
from .tensor_ops import LinOp, Space, Vec, embed_pair, embed_site


@dataclass(frozen=True)
class SignedPerm:
    """Signed permutation: images of 1..n as signed integers.

    Acts on signed labels by w(-a) = -w(a); composition is function
    composition, so (w*u)(a) = w(u(a)).
    """

    images: tuple

    @property
    def n(self) -> int:
        return len(self.images)

    def __post_init__(self):
        n = len(self.images)
        if sorted(abs(v) for v in self.images) != list(range(1, n + 1)):
            raise ValueError("not a signed permutation: %r" % (self.images,))

    @classmethod
    def identity(cls, n: int) -> "SignedPerm":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def generator(cls, n: int, i: int) -> "SignedPerm":
        """s_i for 1 <= i < n swaps labels i, i+1; s_n negates label n."""
        if not 1 <= i <= n:
            raise ValueError("generator index out of range")
        imgs = list(range(1, n + 1))
        if i < n:
            imgs[i - 1], imgs[i] = imgs[i], imgs[i - 1]
        else:
            imgs[n - 1] = -n
        return cls(tuple(imgs))

    def apply(self, label: int) -> int:
        if label > 0:
            return self.images[label - 1]
        return -self.images[-label - 1]

    def __mul__(self, other: "SignedPerm") -> "SignedPerm":
        return SignedPerm(tuple(self.apply(v) for v in other.images))

    def inverse(self) -> "SignedPerm":
        imgs = [0] * self.n
        for a, v in enumerate(self.images, start=1):
            imgs[abs(v) - 1] = a if v > 0 else -a
        return SignedPerm(tuple(imgs))

    @classmethod
    def from_word(cls, n: int, word: Sequence[int]) -> "SignedPerm":
        out = cls.identity(n)
        for i in word:
            out = out * cls.generator(n, i)
        return out


def all_elements(n: int):
    """Every signed permutation, 2^n n! of them."""
    for perm in itertools.permutations(range(1, n + 1)):
        for signs in itertools.product((1, -1), repeat=n):
            yield SignedPerm(tuple(s * p for s, p in zip(signs, perm)))


def word_r(a: int, n: int) -> list:
    """Word for the reflection that negates label a and fixes the rest."""
    return list(range(a, n + 1)) + list(range(n - 1, a - 1, -1))


def word_s(a: int, b: int, n: int) -> list:
    """Word for the transposition of labels a and b (a < b)."""
    if not a < b:
        raise ValueError("need a < b")
    return list(range(a, b)) + list(range(b - 2, a - 1, -1))


def elem_r(a: int, n: int) -> SignedPerm:
    return SignedPerm.from_word(n, word_r(a, n))


def elem_s(a: int, b: int, n: int) -> SignedPerm:
    if a > b:
        a, b = b, a
    return SignedPerm.from_word(n, word_s(a, b, n))


def elem_s_tilde(a: int, b: int, n: int) -> SignedPerm:
    """Negates both labels a and b and swaps them."""
    return elem_r(a, n) * elem_r(b, n) * elem_s(a, b, n)


def _label_code(label: int, n: int) -> int:
    return label - 1 if label > 0 else n - label - 1


def rhoL(w: SignedPerm, space: Space) -> LinOp:
    """Left action: relabel every site's label by w."""
    if space.half_dim != space.n or w.n != space.n:
        raise ValueError("left action needs label count equal to site count")
    n = space.n
    site_map = {}
    for code in range(2 * n):
        label = code + 1 if code < n else n - code - 1
        site_map[code] = _label_code(w.apply(label), n)
    cols = {}
    for state in space.states():
        cols[state] = {tuple(site_map[c] for c in state): 1}
    return LinOp(space, cols)


def phi(w: SignedPerm, space: Space) -> Vec:
    """Image of a group element: the basis vector whose j-th site carries
    the label w(j)."""
    if space.half_dim != space.n or w.n != space.n:
        raise ValueError("need label count equal to site count")
    n = space.n
    state = tuple(_label_code(w.apply(j), n) for j in range(1, n + 1))
    return Vec.basis(space, state)


def orbit_states(space: Space):
    """Basis states of the orbit subspace, one per group element."""
    return [next(iter(phi(w, space).entries)) for w in all_elements(space.n)]


def zero_on_orbit(op: LinOp, states) -> bool:
    """Whether an operator kills every orbit basis vector."""
    return all(s not in op.cols for s in states)


def rhoR_generator(g, x: Sequence, space: Space) -> LinOp:
    """Right-action image of one generator: "s0" -> coordinate reflection at
    site 1, integer i in 1..n-1 -> swap of slots i, i+1, n (or "sn") -> the
    all-ones reflection at site n."""
    n = space.n
    if space.half_dim != n:
        raise ValueError("right action needs label count equal to site count")
    if g == "s0":
        return embed_site(op_T(x), 1, space)
    if g == "sn" or g == n:
        return embed_site(op_T(ones(n)), n, space)
    if isinstance(g, int) and 1 <= g < n:
        return embed_pair(op_P(n), g, g + 1, space)
    raise ValueError("unknown generator %r" % (g,))


def rhoR_word(word, x: Sequence, space: Space) -> LinOp:
    """Right-action image of a word: generator images composed in reversed
    order (anti-homomorphism)."""
    out = LinOp.identity(space)
    for g in word:
        out = rhoR_generator(g, x, space).compose(out)
    return out


def eta_L_push(a: int, word: tuple, y: Sequence, params: ModelParams):
    """Normal ordering of (argument generator a) times (group word).

    Pushes the argument generator rightward through the word using the
    degenerate cross relations; a generator that reaches the right end
    becomes the scalar y_a.  Returns {word: coefficient}.
    """
    n = len(y)
    if not word:
        return {(): y[a - 1]}
    j, rest = word[0], tuple(word[1:])

    def prepend(table, scale=1):
        return {(j,) + u: scale * c for u, c in table.items()}

    def merged(base, extra_word, extra_coeff):
        out = dict(base)
        cur = out.get(extra_word, 0)
        cur = cur + extra_coeff
        if cur == 0:
            out.pop(extra_word, None)
        else:
            out[extra_word] = cur
        return out

    if j < n:
        if a == j:
            out = prepend(eta_L_push(j + 1, rest, y, params))
            return merged(out, rest, params.k)
        if a == j + 1:
            out = prepend(eta_L_push(j, rest, y, params))
            return merged(out, rest, -params.k)
        return prepend(eta_L_push(a, rest, y, params))
    if a == n:
        out = prepend(eta_L_push(n, rest, y, params), scale=-1)
        return merged(out, rest, 2 * params.alpha)
    return prepend(eta_L_push(a, rest, y, params))


def check_AHA_relations(y: Sequence, params: ModelParams):
    """Residuals of the degenerate cross relations; zero on the orbit only.

    Yields (name, residual LinOp).  Callers restrict to the orbit basis.
    """
    from .compat_ops import op_A

    space = params.space
    n = space.n
    ident = LinOp.identity(space)
    ops_a = {i: op_A(i, y, params) for i in range(1, n + 1)}
    for i in range(1, n):
        s_i = rhoL(SignedPerm.generator(n, i), space)
        yield (
            "lower-%d" % i,
            ops_a[i] @ s_i - s_i @ ops_a[i + 1] - ident.scale(params.k),
        )
    s_n = rhoL(SignedPerm.generator(n, n), space)
    yield (
        "top",
        ops_a[n] @ s_n + s_n @ ops_a[n] - ident.scale(2 * params.alpha),
    )
    for i in range(1, n + 1):
        for jj in range(1, n + 1):
            if abs(i - jj) > 1 or (i, jj) == (n - 1, n):
                s_j = rhoL(SignedPerm.generator(n, jj), space)
                yield ("comm-%d-%d" % (i, jj), ops_a[i] @ s_j - s_j @ ops_a[i])


def cbar_factor_list(m: int, n: int):
    """Symbolic factor sequence of the degenerate transport product,
    leftmost factor first.

    Entries are (kind, slot, yterms, cmult): kind "Rb" (slot-swap factor at
    slots slot, slot+1), "Kn" (all-ones end factor), "K0" (coordinate end
    factor); the argument is sum(coef * y[idx]) + cmult * c.
    """
    if not 1 <= m <= n:
        raise ValueError("site index out of range")
    fs = []
    for i in range(m, n):
        fs.append(("Rb", i, ((i + 1, 1), (m, -1)), 0))
    fs.append(("Kn", None, ((m, 1),), 0))
    for i in range(n - 1, m - 1, -1):
        fs.append(("Rb", i, ((m, -1), (i + 1, -1)), 0))
    for i in range(m - 1, 0, -1):
        fs.append(("Rb", i, ((i, -1), (m, -1)), 0))
    fs.append(("K0", None, ((m, -1),), 0))
    for i in range(1, m):
        fs.append(("Rb", i, ((i, 1), (m, -1)), 1))
    return fs


def _cbar_factor(desc, x, y, params: ModelParams) -> LinOp:
    kind, slot, yterms, cmult = desc
    space = params.space
    n = space.n
    arg = cmult * params.c
    for idx, coef in yterms:
        arg = arg + coef * y[idx - 1]
    ident = LinOp.identity(space)
    if kind == "Rb":
        den = arg + params.k
        if den == 0:
            raise PoleError("slot-swap factor pole")
        p = embed_pair(op_P(n), slot, slot + 1, space)
        return (p.scale(arg) + ident.scale(params.k)).scale(inv(den))
    if kind == "Kn":
        den = arg - params.alpha
        if den == 0:
            raise PoleError("all-ones end factor pole")
        t = embed_site(op_T(ones(n)), n, space)
        return (t.scale(arg) - ident.scale(params.alpha)).scale(inv(den))
    if kind == "K0":
        half_c = div(params.c, 2)
        den = arg + params.beta + half_c
        if den == 0:
            raise PoleError("coordinate end factor pole")
        t = embed_site(op_T(x), 1, space)
        return (t.scale(arg + half_c) + ident.scale(params.beta)).scale(inv(den))
    raise ValueError("unknown factor kind %r" % (kind,))


def op_Cbar(m: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    """Degenerate transport product for site m, built from right-action
    generator images."""
    out = LinOp.identity(params.space)
    for desc in reversed(cbar_factor_list(m, params.space.n)):
        out = _cbar_factor(desc, x, y, params).compose(out)
    return out


def p_m_scalar(m: int, y: Sequence, params: ModelParams):
    """Product of the linear-factor denominators of the grouped form."""
    ym = y[m - 1]
    out = (ym - params.alpha) * (ym - params.beta - div(params.c, 2))
    for j in range(1, m):
        out = out * (ym - y[j - 1] - params.c - params.k)
    for j in range(m + 1, len(y) + 1):
        out = out * (ym - y[j - 1] - params.k)
    for j in range(1, len(y) + 1):
        if j != m:
            out = out * (ym + y[j - 1] - params.k)
    return out


def cbar_grouped(m: int, x: Sequence, y: Sequence, params: ModelParams) -> LinOp:
    """Same product with every denominator pulled into one scalar."""
    space = params.space
    n = space.n
    ym = y[m - 1]
    k = params.k
    ident = LinOp.identity(space)

    def swap_factor(arg, slot):
        p = embed_pair(op_P(n), slot, slot + 1, space)
        return p.scale(arg) - ident.scale(k)

    factors = []
    for j in range(m + 1, n + 1):
        factors.append(swap_factor(ym - y[j - 1], j - 1))
    tn = embed_site(op_T(ones(n)), n, space)
    factors.append(tn.scale(ym) - ident.scale(params.alpha))
    for j in range(n, m, -1):
        factors.append(swap_factor(ym + y[j - 1], j - 1))
    for j in range(m - 1, 0, -1):
        factors.append(swap_factor(ym + y[j - 1], j))
    t1 = embed_site(op_T(x), 1, space)
    factors.append(t1.scale(ym - div(params.c, 2)) - ident.scale(params.beta))
    for j in range(1, m):
        factors.append(swap_factor(ym - y[j - 1] - params.c, j))

    out = ident
    for f in reversed(factors):
        out = f.compose(out)
    p = p_m_scalar(m, y, params)
    if p == 0:
        raise PoleError("grouped-form scalar vanishes")
    return out.scale(inv(p))


def cbar_vs_inverse_transport_defects(x, y, params: ModelParams):
    """Difference of the degenerate product and the inverse transport
    operator on each orbit basis vector, for every site."""
    space = params.space
    out = []
    for m in range(1, space.n + 1):
        cb = op_Cbar(m, x, y, params)
        qi = op_Q_inv(m, x, y, params)
        diff = cb - qi
        out.append((m, [s for s in orbit_states(space) if s in diff.cols]))
    return out


def check_L_restriction(a: int, x, y, params: ModelParams):
    """Residuals of the orbit-only identities; (name, residual) pairs.

    Callers restrict to the orbit basis: all are generally nonzero on the
    full space.
    """
    from .compat_ops import coll_X, coll_Y, coll_Z, op_A, op_B, op_Ebar, op_L

    space = params.space
    n = space.n
    ebar_sum = LinOp.zero(space)
    for j in range(1, n + 1):
        ebar_sum = ebar_sum + embed_site(op_Ebar(n, a, a), j, space)
    yield ("reflection-sum", ebar_sum - rhoL(elem_r(a, n), space))
    yield ("self-pair", coll_Y(a, a, space) + coll_Z(a, a, space))
    for b in range(1, n + 1):
        if b == a:
            continue
        yield (
            "swap-pair-%d" % b,
            coll_X(a, b, space) + coll_X(b, a, space) - rhoL(elem_s(a, b, n), space),
        )
        yield (
            "signed-swap-pair-%d" % b,
            coll_Y(a, b, space) + coll_Z(a, b, space) - rhoL(elem_s_tilde(a, b, n), space),
        )
    x = tuple(x)
    xa = x[a - 1]
    assembled = op_A(a, y, params)
    assembled = assembled + rhoL(elem_r(a, n), space).scale(
        div(2 * (params.alpha + params.beta * xa), xa * xa - 1)
    )
    group_part = LinOp.zero(space)
    for p in range(1, n + 1):
        if p == a:
            continue
        w = div(xa, xa - x[p - 1]) if p < a else div(x[p - 1], xa - x[p - 1])
        group_part = group_part + rhoL(elem_s(a, p, n), space).scale(w)
        group_part = group_part + rhoL(elem_s_tilde(a, p, n), space).scale(
            inv(xa * x[p - 1] - 1)
        )
    assembled = assembled + group_part.scale(params.k)
    yield ("assembled", assembled - op_L(a, x, y, params))
