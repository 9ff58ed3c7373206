"""Named certification suites over seeded random rational points.

Each suite bundles a family of exact identities: one sample draws a random
rational parameter point, evaluates every residual in the family, and
passes only if all of them vanish identically.  Results are booleans, not
small floats; there is no tolerance anywhere in this module.

Samples are independently seeded from the run seed and the pair
(suite name, sample index), so a run is reproducible regardless of how
many workers execute it.  Set BQKZ_THREADS to parallelize across samples;
assembly order is fixed either way.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .tensor_ops import Space
from .sampling import child_seed, make_rng, rand_rational, rand_tuple, sample_point
from . import compat_ops, hecke_module, rqkz
from .rqkz import ModelParams

__all__ = [
    "SuiteResult",
    "anchor_map",
    "run_suite",
    "run_suites",
    "suite_names",
]


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one suite run; exact_zero is a boolean, never a float."""

    name: str
    anchor: str
    sizes: tuple
    samples: int
    failures: int
    exact_zero: bool
    notes: tuple

    def body(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "sizes": [list(s) if isinstance(s, tuple) else s for s in self.sizes],
            "samples": self.samples,
            "failures": self.failures,
            "exact_zero": self.exact_zero,
            "notes": list(self.notes),
        }


def _rand_params(rng, space: Space) -> ModelParams:
    return ModelParams.random(rng, space)


def _rand_x(rng, count: int) -> tuple:
    return rand_tuple(rng, count, nonzero=True)


def _sample_ybe(rng, sizes) -> list:
    bad = []
    for half in sizes:

        def body(r):
            k = rand_rational(r, nonzero=True)
            l1, l2, l3 = rand_tuple(r, 3)
            return rqkz.ybe_defect(k, l1, l2, l3, half).is_zero(), (k, l1, l2, l3)

        ok, point = sample_point(rng, body)
        if not ok:
            bad.append("half=%d point=%r" % (half, point))
    return bad


def _sample_bybe(rng, sizes) -> list:
    bad = []
    for half in sizes:

        def body(r):
            k = rand_rational(r, nonzero=True)
            beta = rand_rational(r, nonzero=True)
            x = _rand_x(r, half)
            l1, l2 = rand_tuple(r, 2)
            return rqkz.bybe_defect(k, beta, x, l1, l2).is_zero(), (k, beta, x, l1, l2)

        ok, point = sample_point(rng, body)
        if not ok:
            bad.append("half=%d point=%r" % (half, point))
    return bad


def _sample_unitarity(rng, sizes) -> list:
    bad = []
    for half in sizes:

        def body(r):
            k = rand_rational(r, nonzero=True)
            beta = rand_rational(r, nonzero=True)
            lam = rand_rational(r, nonzero=True)
            x = _rand_x(r, half)
            checks = {
                "exchange-inverse": rqkz.r_unitarity_defect(k, lam, half),
                "reflection-inverse": rqkz.k_unitarity_defect(lam, x, beta),
                "swap-factor": rqkz.swap_factor_defect(k, lam, half),
                "flip-factor": rqkz.flip_factor_defect(lam, x, beta),
            }
            return [nm for nm, d in checks.items() if not d.is_zero()], (k, beta, lam, x)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("half=%d %s point=%r" % (half, nm, point))
    return bad


def _sample_qkz_consistency(rng, sizes) -> list:
    bad = []
    for n, half in sizes:
        space = Space(n, half)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, half)
            y = rand_tuple(r, n)
            out = []
            for m in range(1, n + 1):
                if not rqkz.q_split_defect(m, x, y, params).is_zero():
                    out.append("split-%d" % m)
                if not rqkz.q_inverse_defect(m, x, y, params).is_zero():
                    out.append("inverse-%d" % m)
                for l in range(1, n + 1):
                    if l == m:
                        continue
                    if not rqkz.transport_consistency_defect(m, l, x, y, params).is_zero():
                        out.append("pair-%d-%d" % (m, l))
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d half=%d %s point=%r" % (n, half, nm, point))
    return bad


def _sample_lemma_aa(rng, sizes) -> list:
    bad = []
    for n, half in sizes:
        space = Space(n, half)

        def body(r):
            params = _rand_params(r, space)
            y = rand_tuple(r, n)
            out = []
            for a in range(1, half + 1):
                for b in range(a + 1, half + 1):
                    if not compat_ops.comm_AA_defect(a, b, y, params).is_zero():
                        out.append("pair-%d-%d" % (a, b))
            return out, y

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d half=%d %s point=%r" % (n, half, nm, point))
    return bad


def _sample_lemma_ll(rng, sizes) -> list:
    bad = []
    for n, half in sizes:
        space = Space(n, half)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, half)
            y = rand_tuple(r, n)
            out = []
            for a in range(1, half + 1):
                if not compat_ops.block_assembly_defect(a, x, y, params).is_zero():
                    out.append("assembly-%d" % a)
                for b in range(a + 1, half + 1):
                    if not compat_ops.comm_LL_defect(a, b, x, y, params).is_zero():
                        out.append("pair-%d-%d" % (a, b))
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d half=%d %s point=%r" % (n, half, nm, point))
    return bad


def _sample_cross_derivative(rng, sizes) -> list:
    bad = []
    for n, half in sizes:
        space = Space(n, half)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, half)
            y = rand_tuple(r, n)
            out = []
            for a in range(1, half + 1):
                for b in range(a + 1, half + 1):
                    if not compat_ops.check_cross_derivative(a, b, x, y, params).is_zero():
                        out.append("pair-%d-%d" % (a, b))
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d half=%d %s point=%r" % (n, half, nm, point))
    return bad


def _sample_comm_im(rng, sizes) -> list:
    bad = []
    for half in sizes:
        space = Space(2, half)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, half)
            y1 = rand_rational(r)
            y2 = rand_rational(r)
            out = []
            for a in range(1, half + 1):
                if not compat_ops.check_comm_IM(a, x, y1, y2, params).is_zero():
                    out.append("conjugation-%d" % a)
                if not compat_ops.m_conjugation_defect(a, x, params).is_zero():
                    out.append("slot-swap-%d" % a)
            return out, (x, y1, y2)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("half=%d %s point=%r" % (half, nm, point))
    return bad


def _sample_compatibility(rng, sizes) -> list:
    bad = []
    for n, half in sizes:
        space = Space(n, half)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, half)
            y = rand_tuple(r, n)
            out = []
            for a in range(1, half + 1):
                for m in range(1, n + 1):
                    split, direct = compat_ops.check_compatibility(a, m, x, y, params)
                    if not split.is_zero():
                        out.append("split-%d-%d" % (a, m))
                    if not direct.is_zero():
                        out.append("direct-%d-%d" % (a, m))
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d half=%d %s point=%r" % (n, half, nm, point))
    return bad


def _sample_aha(rng, sizes) -> list:
    bad = []
    for n in sizes:
        space = Space(n, n)
        states = tuple(hecke_module.orbit_states(space))

        def body(r):
            params = _rand_params(r, space)
            y = rand_tuple(r, n)
            out = []
            for name, defect in hecke_module.check_AHA_relations(y, params):
                if not hecke_module.zero_on_orbit(defect, states):
                    out.append(name)
            return out, y

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d %s point=%r" % (n, nm, point))
    return bad


def _sample_phi_iso(rng, sizes) -> list:
    bad = []
    for n in sizes:
        space = Space(n, n)
        elements = list(hecke_module.all_elements(n))
        images = set()
        for w in elements:
            vec = hecke_module.phi(w, space)
            (state,) = vec.entries
            images.add(state)
        if len(images) != len(elements):
            bad.append("n=%d images collide" % n)
            continue

        def body(r):
            x = _rand_x(r, n)
            word1 = [("s0" if g == 0 else g) for g in
                     (r.randint(0, n) for _ in range(r.randint(0, 4)))]
            word2 = [("s0" if g == 0 else g) for g in
                     (r.randint(0, n) for _ in range(r.randint(0, 4)))]
            out = []
            lhs = hecke_module.rhoR_word(word1 + word2, x, space)
            rhs = hecke_module.rhoR_word(word2, x, space) @ hecke_module.rhoR_word(
                word1, x, space
            )
            if not (lhs - rhs).is_zero():
                out.append("reversal word=%r+%r" % (word1, word2))
            w = hecke_module.SignedPerm.identity(n)
            vec = hecke_module.phi(w, space)
            for g in word1:
                vec = hecke_module.rhoR_generator(g, x, space).apply(vec)
                w = w * (
                    hecke_module.elem_r(1, n)
                    if g == "s0"
                    else hecke_module.SignedPerm.generator(n, g)
                )
            target_states = set(hecke_module.phi(w, space).entries)
            if set(vec.entries) != target_states:
                out.append("equivariance word=%r" % (word1,))
            return out, (x, word1, word2)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d %s point=%r" % (n, nm, point))
    return bad


def _sample_cbar_qinv(rng, sizes) -> list:
    bad = []
    for n in sizes:
        space = Space(n, n)

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, n)
            y = rand_tuple(r, n)
            out = []
            for m, states in hecke_module.cbar_vs_inverse_transport_defects(x, y, params):
                if states:
                    out.append("site-%d" % m)
                grouped = hecke_module.cbar_grouped(m, x, y, params)
                if not (hecke_module.op_Cbar(m, x, y, params) - grouped).is_zero():
                    out.append("grouped-%d" % m)
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d %s point=%r" % (n, nm, point))
    return bad


def _sample_l_restriction(rng, sizes) -> list:
    bad = []
    for n in sizes:
        space = Space(n, n)
        states = tuple(hecke_module.orbit_states(space))

        def body(r):
            params = _rand_params(r, space)
            x = _rand_x(r, n)
            y = rand_tuple(r, n)
            out = []
            for a in range(1, n + 1):
                for name, defect in hecke_module.check_L_restriction(a, x, y, params):
                    if not hecke_module.zero_on_orbit(defect, states):
                        out.append("%s-%d" % (name, a))
            return out, (x, y)

        names, point = sample_point(rng, body)
        for nm in names:
            bad.append("n=%d %s point=%r" % (n, nm, point))
    return bad


_HALF_SIZES = (1, 2, 3)
_PAIR_SIZES = ((2, 2), (3, 2))

_SUITES = {
    "ybe": ("two-site exchange braid identity", _HALF_SIZES, 100, _sample_ybe),
    "bybe": ("boundary reflection braid identity", _HALF_SIZES, 100, _sample_bybe),
    "unitarity": ("exchange and reflection inverse identities", _HALF_SIZES, 100, _sample_unitarity),
    "qkz-consistency": (
        "transport family shift consistency",
        ((2, 2), (3, 2), (2, 3)),
        100,
        _sample_qkz_consistency,
    ),
    "lemma-AA": ("polynomial coefficient family commutes", _PAIR_SIZES, 100, _sample_lemma_aa),
    "lemma-LL": ("matrix part family commutes", _PAIR_SIZES, 100, _sample_lemma_ll),
    "cross-derivative": (
        "coordinate part cross derivatives agree",
        _PAIR_SIZES,
        100,
        _sample_cross_derivative,
    ),
    "comm-IM": (
        "exchange conjugation of one-site plus pair blocks",
        _HALF_SIZES,
        100,
        _sample_comm_im,
    ),
    "compatibility": (
        "difference and differential operators are compatible",
        ((1, 1), (2, 2), (3, 2), (2, 3)),
        100,
        _sample_compatibility,
    ),
    "aha-relations": ("degenerate cross relations on the orbit", (2, 3), 100, _sample_aha),
    "phi-iso": ("group element to orbit vector isomorphism", (2, 3), 50, _sample_phi_iso),
    "cbar-qinv": (
        "degenerate product equals inverse transport on the orbit",
        (2, 3),
        50,
        _sample_cbar_qinv,
    ),
    "l-restriction": ("pair-sum restriction identities on the orbit", (2, 3), 100, _sample_l_restriction),
}


def suite_names() -> tuple:
    return tuple(_SUITES)


def anchor_map() -> dict:
    return {name: entry[0] for name, entry in _SUITES.items()}


def default_samples(name: str) -> int:
    return _SUITES[name][2]


def _run_one(task):
    """One seeded sample of one suite; returns (index, failure notes)."""
    name, seed, index, sizes = task
    anchor, default_sizes, _, fn = _SUITES[name]
    rng = make_rng(child_seed(seed, "%s:%d" % (name, index)))
    notes = fn(rng, sizes if sizes is not None else default_sizes)
    return index, notes


def thread_count() -> int:
    raw = os.environ.get("BQKZ_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError("BQKZ_THREADS must be an integer, got %r" % raw)
    return max(1, value)


def run_suite(name: str, samples: int | None = None, seed: int = 0, sizes=None,
              executor=None) -> SuiteResult:
    """Run one suite; unknown names raise ValueError listing valid ones."""
    if name not in _SUITES:
        raise ValueError(
            "unknown suite %r; valid names: %s" % (name, ", ".join(sorted(_SUITES)))
        )
    anchor, default_sizes, default_count, _ = _SUITES[name]
    count = default_count if samples is None else samples
    used_sizes = tuple(sizes) if sizes is not None else default_sizes
    tasks = [(name, seed, idx, used_sizes) for idx in range(count)]
    if executor is None:
        results = [_run_one(t) for t in tasks]
    else:
        results = list(executor.map(_run_one, tasks))
    results.sort(key=lambda pair: pair[0])
    notes = []
    failures = 0
    for _, sample_notes in results:
        if sample_notes:
            failures += 1
            if len(notes) < 5:
                notes.extend(sample_notes[:2])
    return SuiteResult(
        name=name,
        anchor=anchor,
        sizes=used_sizes,
        samples=count,
        failures=failures,
        exact_zero=failures == 0,
        notes=tuple(notes[:5]),
    )


def run_suites(names=None, samples: int | None = None, seed: int = 0,
               threads: int | None = None):
    """Run suites in declaration order; yields (SuiteResult, elapsed seconds).

    With threads > 1 the samples of each suite are distributed over a
    process pool; results are assembled in (suite, sample index) order so
    the output is identical to a serial run.
    """
    chosen = list(names) if names is not None else list(_SUITES)
    for nm in chosen:
        if nm not in _SUITES:
            raise ValueError(
                "unknown suite %r; valid names: %s" % (nm, ", ".join(sorted(_SUITES)))
            )
    workers = thread_count() if threads is None else max(1, threads)
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for nm in chosen:
            start = time.perf_counter()
            result = run_suite(nm, samples=samples, seed=seed, executor=executor)
            yield result, time.perf_counter() - start
    finally:
        if executor is not None:
            executor.shutdown()
