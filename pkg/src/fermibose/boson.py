"""Bosonic Fock space over nonzero momentum modes.

Monomials are unnormalized products of creators applied to the vacuum,
stored as multisets (sorted tuples) of momenta.  Distinct monomials are
orthogonal and the squared norm of a monomial is the product of the
factorials of its multiplicities, so the inner product on BosonVector
carries that diagonal Gram weight.

The two quadratic Hamiltonians used here share one shape,

    sum_{k != 0} g_k (e_k^dag + e_{-k})(e_{-k}^dag + e_k),

differing only in the weights g; they decouple exactly over mode pairs
{k, -k} and conserve the charge n_k - n_{-k} of every pair.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .lattice import (
    GasConfig,
    TWO_PI,
    ball_points,
    crescent,
    crescent_ratio,
    mode_key,
    neg,
    norm_sq,
    particle_count,
)

DROP_TOL = 1e-14


# ---------------------------------------------------------------- monomials


def monomial(modes) -> tuple:
    """Canonical multiset of nonzero momenta."""
    out = tuple(sorted((tuple(m) for m in modes), key=mode_key))
    for m in out:
        if not any(m):
            raise ValueError("the zero mode is not a bosonic excitation")
    return out


def monomial_degree(mono) -> int:
    return len(mono)


def monomial_norm_sq(mono) -> float:
    """Product of multiplicity factorials."""
    out = 1.0
    run = 1
    for prev, cur in zip(mono, mono[1:]):
        run = run + 1 if cur == prev else 1
        out *= run
    return out


def monomial_total_momentum(mono, d):
    if not mono:
        return (0,) * d
    return tuple(sum(c) for c in zip(*mono))


class BosonVector:
    """Sparse vector {monomial: amplitude} with the factorial Gram."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms) if terms else {}

    @classmethod
    def vacuum(cls):
        return cls({(): 1.0 + 0j})

    @classmethod
    def from_monomial(cls, mono, amp=1.0):
        return cls({monomial(mono): complex(amp)})

    def norm_sq(self) -> float:
        return sum(
            (a * a.conjugate()).real * monomial_norm_sq(m)
            for m, a in self.terms.items()
        )

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def inner(self, other: "BosonVector") -> complex:
        a, b = self.terms, other.terms
        if len(b) < len(a):
            return sum(
                a[m].conjugate() * v * monomial_norm_sq(m)
                for m, v in b.items()
                if m in a
            )
        return sum(
            v.conjugate() * b[m] * monomial_norm_sq(m)
            for m, v in a.items()
            if m in b
        )

    def __add__(self, other):
        out = dict(self.terms)
        for m, v in other.terms.items():
            out[m] = out.get(m, 0j) + v
        return BosonVector(out).pruned()

    def __sub__(self, other):
        out = dict(self.terms)
        for m, v in other.terms.items():
            out[m] = out.get(m, 0j) - v
        return BosonVector(out).pruned()

    def __mul__(self, c):
        c = complex(c)
        return BosonVector({m: c * v for m, v in self.terms.items()})

    __rmul__ = __mul__

    def pruned(self, tol: float = DROP_TOL) -> "BosonVector":
        if not self.terms:
            return self
        cut = tol * self.norm()
        kept = {
            m: v
            for m, v in self.terms.items()
            if abs(v) * math.sqrt(monomial_norm_sq(m)) > cut
        }
        return BosonVector(kept) if len(kept) != len(self.terms) else self

    def normalized(self) -> "BosonVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self * (1.0 / n)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"BosonVector({len(self.terms)} terms, norm={self.norm():.6g})"


def _finish(acc):
    return BosonVector({m: v for m, v in acc.items() if v != 0}).pruned()


def apply_boson_creator(k, vec: BosonVector) -> BosonVector:
    k = tuple(k)
    if not any(k):
        raise ValueError("the zero mode is not a bosonic excitation")
    acc = {}
    for mono, amp in vec.terms.items():
        new = tuple(sorted(mono + (k,), key=mode_key))
        acc[new] = acc.get(new, 0j) + amp
    return _finish(acc)


def apply_boson_annihilator(k, vec: BosonVector) -> BosonVector:
    """e_k on the unnormalized basis: multiplicity times the reduced
    monomial."""
    k = tuple(k)
    acc = {}
    for mono, amp in vec.terms.items():
        mult = mono.count(k)
        if mult:
            i = mono.index(k)
            new = mono[:i] + mono[i + 1 :]
            acc[new] = acc.get(new, 0j) + mult * amp
    return _finish(acc)


# ------------------------------------------------------------------ windows


@dataclass(frozen=True)
class TruncationWindow:
    """A finite negation-closed mode set S and a total degree cap."""

    modes: tuple
    max_degree: int

    def __post_init__(self):
        modes = tuple(tuple(k) for k in self.modes)
        seen = set()
        for k in modes:
            if not any(k):
                raise ValueError("window contains the zero mode")
            if k in seen:
                raise ValueError(f"window repeats mode {k}")
            seen.add(k)
        for k in modes:
            if neg(k) not in seen:
                raise ValueError(f"window is not closed under negation: {k}")
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        object.__setattr__(self, "modes", tuple(sorted(modes, key=mode_key)))

    @classmethod
    def from_radius(cls, d: int, radius_sq: int, max_degree: int):
        modes = tuple(k for k in ball_points(d, radius_sq) if any(k))
        if not modes:
            raise ValueError("empty window")
        return cls(modes=modes, max_degree=max_degree)

    @property
    def d(self) -> int:
        return len(self.modes[0])

    def pairs(self):
        """Canonical {k, -k} pairs, earlier mode first."""
        out = []
        seen = set()
        for k in self.modes:
            if k in seen:
                continue
            seen.add(k)
            seen.add(neg(k))
            out.append((k, neg(k)))
        return out


def window_monomials(window: TruncationWindow):
    """Every monomial over the window modes with degree <= max_degree,
    ordered by degree then lexicographically in mode order."""
    out = []
    for deg in range(window.max_degree + 1):
        out.extend(
            itertools.combinations_with_replacement(window.modes, deg)
        )
    return out


def window_dim_at_degree(window: TruncationWindow, degree: int) -> int:
    s = len(window.modes)
    return math.comb(degree + s - 1, degree)


def window_dim(window: TruncationWindow) -> int:
    s = len(window.modes)
    return math.comb(window.max_degree + s, window.max_degree)


# ------------------------------------------------------------------ weights


def check_weights(weights) -> dict:
    """Validate a finitely supported symmetric weight family g_k = g_{-k}."""
    w = {tuple(k): float(v) for k, v in dict(weights).items()}
    bad = []
    for k, v in sorted(w.items(), key=lambda kv: mode_key(kv[0])):
        if not any(k):
            bad.append(f"{k}: weight on the zero mode")
            continue
        mirror = w.get(neg(k))
        if mirror is None:
            bad.append(f"{k}: missing opposite weight")
        elif mirror != v:
            bad.append(f"{k}: g(k)={v} != g(-k)={mirror}")
    if bad:
        raise ValueError("asymmetric weights: " + "; ".join(bad))
    return w


def hb_weights(config: GasConfig, pot) -> dict:
    """g_k = (N^-alpha / 2) |C_k| vhat(k) on the potential support."""
    lam = 0.5 * float(particle_count(config)) ** (-config.alpha)
    return {
        k: lam * crescent(k, config).size * v for k, v in pot.nonzero_items()
    }


def hb_tilde_weights(pot) -> dict:
    """g_k = |k| vhat(k), physical units."""
    return {
        k: TWO_PI * math.sqrt(norm_sq(k)) * v for k, v in pot.nonzero_items()
    }


def hb_apply(weights, vec: BosonVector) -> BosonVector:
    """sum_k g_k (e_k^dag + e_{-k})(e_{-k}^dag + e_k) applied exactly."""
    w = check_weights(weights)
    out = BosonVector()
    for k in sorted(w, key=mode_key):
        g = w[k]
        if g == 0.0:
            continue
        mid = apply_boson_creator(neg(k), vec) + apply_boson_annihilator(k, vec)
        out = out + g * (
            apply_boson_creator(k, mid) + apply_boson_annihilator(neg(k), mid)
        )
    return out


def hb_form_matrix(weights, monomials) -> np.ndarray:
    """Hermitian matrix of the quadratic form on a monomial list, in the
    factorial Gram inner product."""
    vecs = [BosonVector.from_monomial(m) for m in monomials]
    images = [hb_apply(weights, v) for v in vecs]
    n = len(monomials)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = vecs[i].inner(images[j]).real
    return out


def gram_matrix(monomials) -> np.ndarray:
    return np.diag([monomial_norm_sq(m) for m in monomials])


# ------------------------------------------------------- pair-block solver


@lru_cache(maxsize=None)
def _block_minimum(g: float, budget: int):
    """Minimum of one pair block over states of total degree <= budget.

    The block conserves the charge c = n_k - n_{-k}; each |c| sector with
    occupations (n+c, n) is a tridiagonal matrix with diagonal
    2g(2n+c+1) and coupling 2g sqrt((n+c+1)(n+1)).  Returns
    (value, charge, coefficients) with coefficients the normalized state
    in the occupation basis |n+charge, n>.
    """
    if g == 0.0:
        return 0.0, 0, (1.0,)
    best = None
    for c in range(budget + 1):
        size = (budget - c) // 2 + 1
        if size < 1:
            continue
        diag = np.array([2.0 * g * (2 * n + c + 1) for n in range(size)])
        if size == 1:
            val, vec = diag[0], np.ones(1)
        else:
            off = np.array(
                [
                    2.0 * g * math.sqrt((n + c + 1) * (n + 1))
                    for n in range(size - 1)
                ]
            )
            w, u = scipy.linalg.eigh_tridiagonal(diag, off)
            val, vec = w[0], u[:, 0]
        if best is None or val < best[0] - 1e-15:
            piv = vec[int(np.argmax(np.abs(vec)))]
            if piv < 0:
                vec = -vec
            best = (float(val), c, tuple(float(x) for x in vec))
    return best


@dataclass
class TruncatedMinimum:
    value: float
    argmin: BosonVector
    allocation: dict  # pair representative -> quanta given to that block
    outside_weight: float  # sum of g_k for support modes not in the window


def hb_min_truncated(weights, window: TruncationWindow) -> TruncatedMinimum:
    """Minimize the quadratic form over the window by pair blocks.

    The Hamiltonian decouples over {k, -k} blocks, so the minimizer is
    assembled as a product of per-block ground states under a shared
    degree budget, allocated greedily by marginal energy decrease (one or
    two quanta at a time, since charge-0 improvements come in pairs).
    Support modes outside the window contribute their vacuum energy g_k.
    """
    w = check_weights(weights)
    window_modes = set(window.modes)
    outside = sum(v for k, v in w.items() if k not in window_modes)
    pairs = window.pairs()
    gs = [w.get(k, 0.0) for k, _ in pairs]
    budget = window.max_degree
    alloc = [0] * len(pairs)

    def mu(i, j):
        return _block_minimum(gs[i], j)[0]

    while budget > 0:
        best = None
        for i in range(len(pairs)):
            for step in (1, 2):
                if step > budget:
                    continue
                gain = mu(i, alloc[i]) - mu(i, alloc[i] + step)
                if gain > 1e-15 and (
                    best is None or gain / step > best[0] + 1e-15
                ):
                    best = (gain / step, i, step)
        if best is None:
            break
        _, i, step = best
        alloc[i] += step
        budget -= step

    value = outside + sum(mu(i, alloc[i]) for i in range(len(pairs)))
    argmin = BosonVector.vacuum()
    for i, (k, kneg) in enumerate(pairs):
        _, charge, coeffs = _block_minimum(gs[i], alloc[i])
        block = {}
        for n, coef in enumerate(coeffs):
            if coef == 0.0:
                continue
            a, b = n + charge, n
            mono = (k,) * a + (kneg,) * b
            block[monomial(mono)] = coef / math.sqrt(
                math.factorial(a) * math.factorial(b)
            )
        new = {}
        for m0, a0 in argmin.terms.items():
            for m1, a1 in block.items():
                mm = monomial(m0 + m1)
                new[mm] = new.get(mm, 0j) + a0 * a1
        argmin = BosonVector(new)
    allocation = {pairs[i][0]: alloc[i] for i in range(len(pairs))}
    return TruncatedMinimum(
        value=value, argmin=argmin, allocation=allocation, outside_weight=outside
    )


# --------------------------------------------------------------- domination


@dataclass
class DominationReport:
    """PSD audit of the two quadratic forms on a truncation window.

    multiplier is the full prefactor c N^{1 - alpha - 1/d} applied to the
    slow-weight form; ratio_constant is the crescent-bound constant c2 it
    was derived from.
    """

    ratio_constant: float
    multiplier: float
    min_eig_base: float
    min_eig_gap: float
    passed: bool
    witness: np.ndarray | None


def hb_domination_check(
    config: GasConfig, pot, window: TruncationWindow, tol: float = 1e-10
) -> DominationReport:
    """Check 0 <= H_fast <= multiplier * H_slow on the window.

    The multiplier comes from the fitted crescent constant:
    |C_k| <= c2 kf^(d-1) |k| in lattice units gives
    g_k <= c2 kf^(d-1) / (4 pi N^{1-1/d}) * N^{1-alpha-1/d} gtilde_k.
    """
    n = particle_count(config)
    kf = math.sqrt(config.fermi_radius_sq)
    c2 = max(crescent_ratio(k, config) for k, _ in pot.nonzero_items())
    scale_const = c2 * kf ** (config.d - 1) / (4 * math.pi * n ** (1 - 1 / config.d))
    multiplier = scale_const * n ** (1 - config.alpha - 1 / config.d)

    monos = window_monomials(window)
    base = hb_form_matrix(hb_weights(config, pot), monos)
    slow = hb_form_matrix(hb_tilde_weights(pot), monos)
    # the forms live in the factorial Gram; whiten before the PSD check
    inv = np.diag([1.0 / math.sqrt(monomial_norm_sq(m)) for m in monos])
    base_w = inv @ base @ inv
    slow_w = inv @ slow @ inv
    gap = multiplier * slow_w - base_w
    w_base, u_base = np.linalg.eigh(base_w)
    w_gap, u_gap = np.linalg.eigh(gap)
    scale = max(abs(w_base).max(), abs(w_gap).max(), 1.0)
    ok_base = w_base[0] >= -tol * scale
    ok_gap = w_gap[0] >= -tol * scale
    witness = None
    if not ok_base:
        witness = inv @ u_base[:, 0]
    elif not ok_gap:
        witness = inv @ u_gap[:, 0]
    return DominationReport(
        ratio_constant=c2,
        multiplier=multiplier,
        min_eig_base=float(w_base[0]),
        min_eig_gap=float(w_gap[0]),
        passed=ok_base and ok_gap,
        witness=witness,
    )


# ------------------------------------------------------------ random states


def random_boson_vector(window: TruncationWindow, rng, n_terms: int = 4):
    monos = window_monomials(window)
    picks = rng.choice(len(monos), size=min(n_terms, len(monos)), replace=False)
    terms = {
        monos[i]: complex(rng.standard_normal(), rng.standard_normal())
        for i in picks
    }
    return BosonVector(terms).normalized()
