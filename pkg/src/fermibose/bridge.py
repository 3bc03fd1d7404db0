"""The excitation map between bosonic monomials and fermionic states.

phi sends a monomial e_{k_1}^dag ... e_{k_m}^dag applied to the bosonic
vacuum to the fermionic state built by the normalized pair creators
phi_k^dag = |C_k|^{-1/2} b_k^dag acting on the filled ball.  The map is
exactly linear and commutes with creators by construction; everything
else it almost preserves (inner products, annihilators, the dominant
Hamiltonian) is measured here exactly, term by term, with no sampling.

Monomial images are cached per (config, monomial suffix), so sweeps over
windows reuse each other's work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import boson, fock
from .lattice import GasConfig, TWO_PI, crescent, mode_key, neg, norm_sq
from .boson import BosonVector, TruncationWindow, window_monomials
from .fock import FermionVector


@lru_cache(maxsize=None)
def phi_monomial_image(config: GasConfig, mono: tuple) -> FermionVector:
    """Image of one monomial: phi_{k_1}^dag ... phi_{k_m}^dag psi0.

    The result is treated as immutable by every caller.
    """
    if not mono:
        return fock.psi0(config)
    head, rest = mono[0], mono[1:]
    size = crescent(head, config).size
    if size == 0:
        raise ValueError(f"mode {head} has an empty crescent; phi is undefined")
    tail = phi_monomial_image(config, rest)
    return (1.0 / math.sqrt(size)) * fock.apply_b_dag(head, config, tail)


def phi_map(f: BosonVector, config: GasConfig) -> FermionVector:
    """Linear extension of the monomial map."""
    out = FermionVector()
    for mono, amp in f.terms.items():
        out = out + amp * phi_monomial_image(config, mono)
    return out


def apply_phi_annihilator(k, config: GasConfig, vec: FermionVector) -> FermionVector:
    size = crescent(k, config).size
    if size == 0:
        raise ValueError(f"mode {k} has an empty crescent; phi_k is undefined")
    return (1.0 / math.sqrt(size)) * fock.apply_b(k, config, vec)


def apply_phi_creator(k, config: GasConfig, vec: FermionVector) -> FermionVector:
    size = crescent(k, config).size
    if size == 0:
        raise ValueError(f"mode {k} has an empty crescent; phi_k is undefined")
    return (1.0 / math.sqrt(size)) * fock.apply_b_dag(k, config, vec)


# ------------------------------------------------------------ isometry audit


@dataclass
class IsometryReport:
    """How far the monomial images are from an isometric frame.

    eps is the matrix of <phi(m_i), phi(m_j)> minus the bosonic Gram, in
    the monomial order of `monomials`.  Entries between monomials of
    different degree or total momentum vanish identically and are skipped.
    operator_norm_bound is the crude bound dim * max|eps| on the deviation
    of Phi^* Phi from the identity in the normalized basis.
    """

    window: TruncationWindow
    monomials: list
    eps: np.ndarray
    max_abs_eps: float
    operator_norm_bound: float
    max_abs_by_degree: dict

    def degree_of(self, index: int) -> int:
        return len(self.monomials[index])


def isometry_audit(window: TruncationWindow, config: GasConfig) -> IsometryReport:
    monos = window_monomials(window)
    d = config.d
    n = len(monos)
    groups = {}
    for i, m in enumerate(monos):
        key = (len(m), boson.monomial_total_momentum(m, d))
        groups.setdefault(key, []).append(i)
    eps = np.zeros((n, n))
    for indices in groups.values():
        images = {i: phi_monomial_image(config, monos[i]) for i in indices}
        for a, i in enumerate(indices):
            for j in indices[a:]:
                val = images[i].inner(images[j]).real
                if i == j:
                    val -= boson.monomial_norm_sq(monos[i])
                eps[i, j] = val
                eps[j, i] = val
    max_abs = float(np.max(np.abs(eps))) if n else 0.0
    by_degree = {}
    for (deg, _), indices in groups.items():
        block = eps[np.ix_(indices, indices)]
        cur = by_degree.get(deg, 0.0)
        by_degree[deg] = max(cur, float(np.max(np.abs(block))))
    return IsometryReport(
        window=window,
        monomials=monos,
        eps=eps,
        max_abs_eps=max_abs,
        operator_norm_bound=n * max_abs,
        max_abs_by_degree=dict(sorted(by_degree.items())),
    )


def isometry_shape_constant(report: IsometryReport, config: GasConfig) -> float:
    """Fitted C in max|eps_m| <= C m(m-1)/2 m! k_F^(1-d) over the report."""
    kf = config.fermi_momentum
    best = 0.0
    for deg, val in report.max_abs_by_degree.items():
        if deg < 2:
            continue
        scale = math.comb(deg, 2) * math.factorial(deg) * kf ** (1 - config.d)
        best = max(best, val / scale)
    return best


# ------------------------------------------------------------- intertwining


@dataclass
class IntertwineReport:
    """Exact residuals of phi against the bosonic ladder on a window.

    annihilator_max is max over window monomials and the given modes of
    ||(phi_k Phi - Phi e_k) mono|| / ||mono||; the creation direction is an
    operator identity, so creator_max only measures rounding noise.
    """

    window: TruncationWindow
    modes: tuple
    annihilator_max: float
    creator_max: float
    per_monomial: dict = field(default_factory=dict)


def intertwine_residual(
    window: TruncationWindow, config: GasConfig, modes=None
) -> IntertwineReport:
    if modes is None:
        modes = window.modes
    monos = window_monomials(window)
    ann_max = 0.0
    cre_max = 0.0
    per = {}
    for mono in monos:
        image = phi_monomial_image(config, mono)
        worst = 0.0
        for k in modes:
            f = BosonVector.from_monomial(mono)
            lhs = apply_phi_annihilator(k, config, image)
            rhs = phi_map(boson.apply_boson_annihilator(k, f), config)
            worst = max(worst, (lhs - rhs).norm())
            lhs_c = apply_phi_creator(k, config, image)
            rhs_c = phi_map(boson.apply_boson_creator(k, f), config)
            cre_max = max(cre_max, (lhs_c - rhs_c).norm())
        per[mono] = worst
        ann_max = max(ann_max, worst)
    return IntertwineReport(
        window=window,
        modes=tuple(modes),
        annihilator_max=ann_max,
        creator_max=cre_max,
        per_monomial=per,
    )


# --------------------------------------------------------- remainder audit


@dataclass
class H2Audit:
    value: float
    bound: float
    kinetic_part: float
    interaction_part: float

    @property
    def passed(self) -> bool:
        return self.value <= self.bound


def h2_quadratic_parts(config: GasConfig, pot, psi: FermionVector):
    """(kinetic, interaction) pieces of <psi|H2 psi> / ||psi||^2.

    Uses the adjoint split <psi|X^dag Y psi> = <X psi|Y psi> so the large
    intermediate vectors are applied once per mode.
    """
    nsq = psi.norm_sq()
    if nsq == 0.0:
        raise ValueError("empty state")
    kin = sum(
        (a * a.conjugate()).real * fock.kinetic_excess(config, det)
        for det, a in psi.terms.items()
    )
    lam = fock.coupling(config)
    inter = 0.0
    for k, v in pot.nonzero_items():
        dk = fock.apply_d(k, config, psi)
        x2 = fock.apply_b_dag(neg(k), config, psi) + fock.apply_b(k, config, psi)
        inter += lam * v * (2.0 * x2.inner(dk).real + dk.norm_sq())
    return kin / nsq, inter / nsq


def h2_expectation_audit(
    psi: FermionVector,
    window: TruncationWindow,
    config: GasConfig,
    pot,
    cutoff_momentum: float,
) -> H2Audit:
    """Exact |<psi|H2 psi>| / ||psi||^2 against its a priori estimate.

    psi must come from the window (degree <= m, modes below the momentum
    cutoff); the estimate is

        (2 k_F K + K^2) m
        + lambda sum_k |vhat(k)| (8 m sqrt(m+1) |C_k|^(1/2) + 4 m^2)

    with K = cutoff_momentum, valid for 2 pi <= K <= k_F.
    """
    kf = config.fermi_momentum
    K = float(cutoff_momentum)
    if not (TWO_PI <= K <= kf + 1e-12):
        raise ValueError(f"momentum cutoff {K} outside [2 pi, k_F={kf}]")
    worst = max(TWO_PI * math.sqrt(norm_sq(k)) for k in window.modes)
    if worst > K + 1e-12:
        raise ValueError(
            f"window mode of size {worst} violates the cutoff {K}"
        )
    m = window.max_degree
    kin, inter = h2_quadratic_parts(config, pot, psi)
    value = abs(kin + inter)
    lam = fock.coupling(config)
    bound = (2.0 * kf * K + K * K) * m
    for k, v in pot.nonzero_items():
        ck = crescent(k, config).size
        bound += lam * abs(v) * (
            8.0 * m * math.sqrt(m + 1.0) * math.sqrt(ck) + 4.0 * m * m
        )
    return H2Audit(
        value=value, bound=bound, kinetic_part=kin, interaction_part=inter
    )


# ------------------------------------------------------------- trial energy


@dataclass
class TrialReport:
    """Exact Rayleigh quotient of the full Hamiltonian at Phi(f).

    raw = e_n0 + h1_part + h2_part up to identity_gap (rounding only);
    bosonic_prediction replaces h1_part by the bosonic quadratic form at f
    and drops the remainder.
    """

    raw: float
    e_n0: float
    h1_part: float
    h2_part: float
    bosonic_prediction: float
    discrepancy: float
    identity_gap: float
    image_norm: float


def trial_energy(f: BosonVector, config: GasConfig, pot) -> TrialReport:
    psi = phi_map(f, config)
    nsq = psi.norm_sq()
    if nsq == 0.0:
        raise ValueError("phi image vanishes")
    lam = fock.coupling(config)
    e0 = fock.e_n0(config, pot)
    kin, inter = h2_quadratic_parts(config, pot, psi)
    h2_part = kin + inter
    h1_part = 0.0
    rho_sum = 0.0
    for k, v in pot.nonzero_items():
        x2 = fock.apply_b_dag(neg(k), config, psi) + fock.apply_b(k, config, psi)
        h1_part += lam * v * x2.norm_sq()
        rho_sum += lam * v * fock.apply_rho(k, psi).norm_sq()
    h1_part /= nsq
    raw = e0 + kin + rho_sum / nsq
    gap = raw - (e0 + h1_part + h2_part)
    hb = boson.hb_apply(boson.hb_weights(config, pot), f)
    bosonic = e0 + f.inner(hb).real / f.norm_sq()
    return TrialReport(
        raw=raw,
        e_n0=e0,
        h1_part=h1_part,
        h2_part=h2_part,
        bosonic_prediction=bosonic,
        discrepancy=raw - bosonic,
        identity_gap=gap,
        image_norm=math.sqrt(nsq),
    )


# ---------------------------------------------------------- subspace bound


@dataclass
class SubspaceBound:
    """Variational upper bound from the span of all monomial images.

    The generalized eigenproblem uses the exact Gram; directions whose
    Gram eigenvalue falls below pivot_tol times the largest are dropped
    and counted in dropped_directions.
    """

    value: float
    sector_values: dict  # total momentum -> block minimum
    dimension: int
    dropped_directions: int
    pivot_tol: float


def subspace_upper_bound(
    window: TruncationWindow,
    config: GasConfig,
    pot,
    pivot_tol: float = 1e-10,
) -> SubspaceBound:
    monos = window_monomials(window)
    d = config.d
    lam = fock.coupling(config)
    e0 = fock.e_n0(config, pot)
    blocks = {}
    for m in monos:
        blocks.setdefault(boson.monomial_total_momentum(m, d), []).append(m)
    best = math.inf
    sector_values = {}
    dropped = 0
    for momentum, group in sorted(blocks.items()):
        images = [phi_monomial_image(config, m) for m in group]
        rhos = {
            k: [fock.apply_rho(k, img) for img in images]
            for k, _ in pot.nonzero_items()
        }
        n = len(group)
        gram = np.zeros((n, n))
        ham = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                g = images[i].inner(images[j]).real
                t = sum(
                    (a.conjugate() * images[j].terms[det]).real
                    * fock.kinetic_excess(config, det)
                    for det, a in images[i].terms.items()
                    if det in images[j].terms
                )
                h = e0 * g + t
                for k, v in pot.nonzero_items():
                    h += lam * v * rhos[k][i].inner(rhos[k][j]).real
                gram[i, j] = gram[j, i] = g
                ham[i, j] = ham[j, i] = h
        w, u = np.linalg.eigh(gram)
        keep = w > pivot_tol * max(w[-1], 0.0)
        dropped += int(n - keep.sum())
        if not keep.any():
            continue
        basis = u[:, keep] / np.sqrt(w[keep])
        hw = basis.T @ ham @ basis
        vals = np.linalg.eigvalsh(hw)
        sector_values[momentum] = float(vals[0])
        best = min(best, float(vals[0]))
    return SubspaceBound(
        value=best,
        sector_values=sector_values,
        dimension=len(monos),
        dropped_directions=dropped,
        pivot_tol=pivot_tol,
    )


# ------------------------------------------------------------------ fitting


@dataclass
class LogLogFit:
    slope: float
    intercept: float
    max_residual: float
    points: list


def loglog_fit(xs, ys) -> LogLogFit:
    """Least squares slope of log y against log x."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two points")
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return LogLogFit(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.max(np.abs(resid))),
        points=list(zip(xs, ys)),
    )
