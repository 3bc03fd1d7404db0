"""Sparse fermionic Fock engine over integer momentum modes.

States are finite linear combinations of Slater determinants.  A
determinant is a tuple of occupied momenta sorted in the global mode order
of :func:`fermibose.lattice.mode_key`; all signs below are defined by that
order.  With det = (m_0 < m_1 < ...):

    a_p det      = (-1)^i  (det minus m_i)   if p == m_i, else 0
    a_p^dag det  = (-1)^i  (det plus p)      with i the insertion index,
                                             0 if p is already occupied.

This gives the usual anticommutation relations exactly; amplitudes are
complex and every operator in this module is applied term by term, so all
algebraic identities hold to rounding.

Momentum transfer convention: rho_k = sum_p a_{p-k}^dag a_p, i.e. applying
rho_k lowers the total momentum of a determinant by k.  The quasi-bosonic
pieces b_k, b_k^dag, d_k are the restrictions of rho_k to moves across,
respectively not across, the Fermi surface; rho_k = b_k + b_{-k}^dag + d_k
for k != 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .lattice import (
    GasConfig,
    TWO_PI,
    TWO_PI_SQ,
    add,
    ball_points,
    crescent,
    fermi_ball,
    kinetic_ground_sum,
    mode_key,
    neg,
    norm_sq,
    particle_count,
    sub,
)

# relative amplitude drop threshold after vector arithmetic
DROP_TOL = 1e-14


# ------------------------------------------------------------ determinants


def annihilate(det, p):
    """Apply a_p to a single determinant.

    Returns (sign, new_det) or None when p is unoccupied.
    """
    for i, m in enumerate(det):
        if m == p:
            return (-1 if i & 1 else 1), det[:i] + det[i + 1 :]
    return None


def create(det, p):
    """Apply a_p^dag to a single determinant.

    Returns (sign, new_det) or None when p is already occupied.
    """
    key = mode_key(p)
    for i, m in enumerate(det):
        k = mode_key(m)
        if k == key:
            return None
        if k > key:
            return (-1 if i & 1 else 1), det[:i] + (p,) + det[i:]
    i = len(det)
    return (-1 if i & 1 else 1), det + (p,)


def move(det, src, dst):
    """Apply a_dst^dag a_src to a determinant, composing the two signs."""
    hit = annihilate(det, src)
    if hit is None:
        return None
    s1, reduced = hit
    hit = create(reduced, dst)
    if hit is None:
        return None
    s2, out = hit
    return s1 * s2, out


def determinant(modes) -> tuple:
    """Canonical determinant from an iterable of distinct momenta."""
    out = tuple(sorted((tuple(m) for m in modes), key=mode_key))
    if len(set(out)) != len(out):
        raise ValueError("repeated mode in determinant")
    return out


def total_momentum(det):
    if not det:
        return ()
    return tuple(sum(c) for c in zip(*det))


# ------------------------------------------------------------- the vector


class FermionVector:
    """Finite sparse vector in Fock space: {determinant: amplitude}.

    Instances are treated as immutable once returned; arithmetic produces
    new vectors.  Amplitudes smaller than DROP_TOL relative to the vector
    norm are dropped by pruned(), which every operator application calls.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms) if terms else {}

    @classmethod
    def from_determinant(cls, det, amp=1.0):
        return cls({determinant(det): complex(amp)})

    def norm_sq(self) -> float:
        return sum((a * a.conjugate()).real for a in self.terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def inner(self, other: "FermionVector") -> complex:
        """<self|other>, antilinear in self."""
        a, b = self.terms, other.terms
        if len(b) < len(a):
            return sum(a[d].conjugate() * v for d, v in b.items() if d in a)
        return sum(v.conjugate() * b[d] for d, v in a.items() if d in b)

    def __add__(self, other):
        out = dict(self.terms)
        for d, v in other.terms.items():
            out[d] = out.get(d, 0j) + v
        return FermionVector(out).pruned()

    def __sub__(self, other):
        out = dict(self.terms)
        for d, v in other.terms.items():
            out[d] = out.get(d, 0j) - v
        return FermionVector(out).pruned()

    def __mul__(self, c):
        c = complex(c)
        return FermionVector({d: c * v for d, v in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def pruned(self, tol: float = DROP_TOL) -> "FermionVector":
        if not self.terms:
            return self
        cut = tol * self.norm()
        kept = {d: v for d, v in self.terms.items() if abs(v) > cut}
        return FermionVector(kept) if len(kept) != len(self.terms) else self

    def normalized(self) -> "FermionVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self * (1.0 / n)

    def particle_number(self):
        for d in self.terms:
            return len(d)
        return None

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"FermionVector({len(self.terms)} terms, norm={self.norm():.6g})"


def psi0(config: GasConfig) -> FermionVector:
    """The filled Fermi ball."""
    return FermionVector({fermi_ball(config): 1.0 + 0j})


def _finish(acc: dict) -> FermionVector:
    return FermionVector({d: v for d, v in acc.items() if v != 0}).pruned()


def _accumulate(acc, det, amp):
    new = acc.get(det)
    acc[det] = amp if new is None else new + amp


# ----------------------------------------------------- operator applications


def apply_annihilator(p, vec: FermionVector) -> FermionVector:
    acc = {}
    for det, amp in vec.terms.items():
        hit = annihilate(det, p)
        if hit is not None:
            _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def apply_creator(p, vec: FermionVector) -> FermionVector:
    acc = {}
    for det, amp in vec.terms.items():
        hit = create(det, p)
        if hit is not None:
            _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def apply_rho(k, vec: FermionVector) -> FermionVector:
    """Density mode rho_k = sum_p a_{p-k}^dag a_p; rho_0 counts particles."""
    acc = {}
    for det, amp in vec.terms.items():
        for p in det:
            hit = move(det, p, sub(p, k))
            if hit is not None:
                _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def apply_b(k, config: GasConfig, vec: FermionVector) -> FermionVector:
    """Pair annihilator b_k: moves an outside particle at p to p-k inside."""
    r = config.fermi_radius_sq
    acc = {}
    for det, amp in vec.terms.items():
        for p in det:
            if norm_sq(p) > r:
                t = sub(p, k)
                if norm_sq(t) <= r:
                    hit = move(det, p, t)
                    if hit is not None:
                        _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def apply_b_dag(k, config: GasConfig, vec: FermionVector) -> FermionVector:
    """Pair creator b_k^dag = sum_{p in C_k} a_{p+k}^dag a_p."""
    r = config.fermi_radius_sq
    acc = {}
    for det, amp in vec.terms.items():
        for p in det:
            if norm_sq(p) <= r:
                t = add(p, k)
                if norm_sq(t) > r:
                    hit = move(det, p, t)
                    if hit is not None:
                        _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def apply_d(k, config: GasConfig, vec: FermionVector) -> FermionVector:
    """Surface-preserving part d_k of rho_k (both sides of the move inside,
    or both outside, the Fermi ball)."""
    r = config.fermi_radius_sq
    acc = {}
    for det, amp in vec.terms.items():
        for p in det:
            t = sub(p, k)
            if (norm_sq(p) <= r) == (norm_sq(t) <= r):
                hit = move(det, p, t)
                if hit is not None:
                    _accumulate(acc, hit[1], hit[0] * amp)
    return _finish(acc)


def kinetic_excess(config: GasConfig, det) -> float:
    """Eigenvalue of the normal-ordered kinetic energy on a determinant."""
    return TWO_PI_SQ * sum(norm_sq(p) for p in det) - kinetic_ground_sum(config)


def apply_normal_t(config: GasConfig, vec: FermionVector) -> FermionVector:
    acc = {
        det: amp * kinetic_excess(config, det) for det, amp in vec.terms.items()
    }
    return _finish(acc)


def excitation_count(config: GasConfig, det) -> float:
    """Eigenvalue of the excitation number: (holes + outside particles)/2.

    Integer on determinants with the configured particle number, where the
    two halves agree.
    """
    r = config.fermi_radius_sq
    inside = sum(1 for p in det if norm_sq(p) <= r)
    holes = particle_count(config) - inside
    outside = len(det) - inside
    return 0.5 * (holes + outside)


def apply_exc_number(config: GasConfig, vec: FermionVector) -> FermionVector:
    acc = {
        det: amp * excitation_count(config, det)
        for det, amp in vec.terms.items()
    }
    return _finish(acc)


def apply_exc_weight(config: GasConfig, vec: FermionVector, shift=0.0, power=0.5):
    """Diagonal map multiplying each determinant by (exc + shift)^power.

    apply_exc_weight(cfg, v) is the square root of the excitation number,
    used for the norm bounds on b and b^dag.
    """
    acc = {
        det: amp * (excitation_count(config, det) + shift) ** power
        for det, amp in vec.terms.items()
    }
    return _finish(acc)


def apply_normal_commutator(k, q, config: GasConfig, vec: FermionVector) -> FermionVector:
    """Normal-ordered part of [b_k, b_q^dag].

    Two hole/particle exchange sums restricted by the Fermi surface; the
    scalar part |C_k| delta_{kq} is not included.  The operator annihilates
    the filled ball and is negative semidefinite at k == q.
    """
    r = config.fermi_radius_sq
    cq = crescent(q, config).members
    acc = {}
    for det, amp in vec.terms.items():
        for p in cq:
            t = add(sub(p, k), q)
            if norm_sq(t) <= r:
                # -a_p a_t^dag, creation first
                hit = create(det, t)
                if hit is not None:
                    s1, mid = hit
                    hit = annihilate(mid, p)
                    if hit is not None:
                        _accumulate(acc, hit[1], -s1 * hit[0] * amp)
            if norm_sq(add(p, k)) > r:
                # -a_{p+q}^dag a_{p+k}
                hit = move(det, add(p, k), add(p, q))
                if hit is not None:
                    _accumulate(acc, hit[1], -hit[0] * amp)
    return _finish(acc)


# ---------------------------------------------------------------- potential


class PotentialError(ValueError):
    """Invalid interaction data; .violations lists every offending entry."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(f"{k}: {why}" for k, why in self.violations)
        super().__init__(f"invalid potential ({lines})")


class Potential:
    """Finitely supported Fourier interaction data {k: vhat(k)}.

    vhat must be even in k and nonnegative away from k = 0.  vhat(0) is the
    integral of the potential; value_at_origin() is v(0) = sum_k vhat(k).
    """

    def __init__(self, d: int, coefficients):
        vhat = {}
        violations = []
        for k, v in dict(coefficients).items():
            k = tuple(int(c) for c in k)
            if len(k) != d:
                violations.append((k, f"expected {d} components"))
                continue
            vhat[k] = float(v)
        for k, v in sorted(vhat.items(), key=lambda kv: mode_key(kv[0])):
            mirror = vhat.get(neg(k))
            if mirror is None:
                violations.append((k, "missing opposite mode -k"))
            elif mirror != v:
                violations.append((k, f"vhat(k)={v} != vhat(-k)={mirror}"))
            if v < 0 and any(k):
                violations.append((k, f"negative coefficient {v} at k != 0"))
        if violations:
            raise PotentialError(violations)
        self.d = d
        self.vhat = vhat

    def integral(self) -> float:
        """vhat(0), the zero mode."""
        return self.vhat.get((0,) * self.d, 0.0)

    def value_at_origin(self) -> float:
        """v(0) = sum over all modes of vhat(k)."""
        return sum(self.vhat.values())

    def nonzero_items(self):
        """(k, vhat(k)) for k != 0 with vhat(k) != 0, in mode order."""
        return [
            (k, v)
            for k, v in sorted(self.vhat.items(), key=lambda kv: mode_key(kv[0]))
            if any(k) and v != 0.0
        ]

    def support_radius_sq(self) -> int:
        return max((norm_sq(k) for k, _ in self.nonzero_items()), default=0)

    def __repr__(self):
        return f"Potential(d={self.d}, {len(self.vhat)} modes)"


def unit_potential(d: int, radius_sq: int = 1, zero_mode: float = 0.0) -> Potential:
    """vhat = 1 on every nonzero mode with |k|^2 <= radius_sq."""
    coeff = {k: 1.0 for k in ball_points(d, radius_sq) if any(k)}
    coeff[(0,) * d] = zero_mode
    return Potential(d, coeff)


@dataclass(frozen=True)
class TailReport:
    """What a cutoff threw away, probed over a finite annulus."""

    cutoff_radius_sq: int
    probe_radius_sq: int
    discarded_weight: float  # sum over cutoff < |k|^2 <= probe of |k| |vhat|


def potential_from_function(fn, d: int, cutoff_radius_sq: int, probe_radius_sq=None):
    """Truncate a coefficient function to a ball, reporting the tail.

    Returns (Potential, TailReport).  The report sums |k| |vhat(k)| over the
    probe annulus; it is a finite window on the discarded weight, not a
    bound on the full tail.
    """
    if probe_radius_sq is None:
        probe_radius_sq = 4 * max(cutoff_radius_sq, 1)
    coeff = {k: fn(k) for k in ball_points(d, cutoff_radius_sq)}
    tail = sum(
        TWO_PI * math.sqrt(norm_sq(k)) * abs(fn(k))
        for k in ball_points(d, probe_radius_sq)
        if norm_sq(k) > cutoff_radius_sq
    )
    return Potential(d, coeff), TailReport(cutoff_radius_sq, probe_radius_sq, tail)


def load_potential(path, d=None) -> Potential:
    """Read "k_1 ... k_d value" lines; '#' starts a comment.

    All format problems are collected and raised together so a bad file
    reports every offending entry at once.
    """
    entries = {}
    violations = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if d is None:
                if len(toks) < 2:
                    violations.append((f"line {lineno}", "expected k components and a value"))
                    continue
                d = len(toks) - 1
            if len(toks) != d + 1:
                violations.append((f"line {lineno}", f"expected {d} components and a value"))
                continue
            try:
                k = tuple(int(t) for t in toks[:-1])
            except ValueError:
                violations.append((f"line {lineno}", f"non-integer mode {toks[:-1]}"))
                continue
            try:
                v = float(toks[-1])
            except ValueError:
                violations.append((f"line {lineno}", f"non-numeric value {toks[-1]!r}"))
                continue
            if k in entries:
                violations.append((k, "duplicate entry"))
                continue
            entries[k] = v
    if d is None:
        violations.append(("file", "no data lines"))
    if violations:
        raise PotentialError(violations)
    return Potential(d, entries)


# ------------------------------------------------------------- Hamiltonian


def coupling(config: GasConfig) -> float:
    """The prefactor N^-alpha / 2 of the interaction sum."""
    return 0.5 * float(particle_count(config)) ** (-config.alpha)


def e_n0(config: GasConfig, pot: Potential) -> float:
    """Energy of the filled ball through first order in the pair terms."""
    n = particle_count(config)
    return (
        kinetic_ground_sum(config)
        + 0.5 * n ** (2 - config.alpha) * pot.integral()
        - 0.5 * n ** (1 - config.alpha) * pot.value_at_origin()
    )


def trivial_bounds(config: GasConfig, pot: Potential):
    """(lower, upper) for the ground energy: E_0 and the filled-ball
    expectation E_0 + lambda sum_k vhat(k) |C_k|."""
    lam = coupling(config)
    e0 = e_n0(config, pot)
    gap = lam * sum(v * crescent(k, config).size for k, v in pot.nonzero_items())
    return e0, e0 + gap


def apply_h(config: GasConfig, pot: Potential, vec: FermionVector) -> FermionVector:
    """Full Hamiltonian on the configured particle-number sector:

        H = E_0 + :T: + lambda sum_{k != 0} vhat(k) rho_k^dag rho_k
    """
    lam = coupling(config)
    out = e_n0(config, pot) * vec + apply_normal_t(config, vec)
    for k, v in pot.nonzero_items():
        out = out + (lam * v) * apply_rho(neg(k), apply_rho(k, vec))
    return out


def apply_h1(config: GasConfig, pot: Potential, vec: FermionVector) -> FermionVector:
    """Dominant pair part: lambda sum_k vhat(k)(b_k^dag + b_-k)(b_-k^dag + b_k)."""
    lam = coupling(config)
    out = FermionVector()
    for k, v in pot.nonzero_items():
        mid = apply_b_dag(neg(k), config, vec) + apply_b(k, config, vec)
        out = out + (lam * v) * (
            apply_b_dag(k, config, mid) + apply_b(neg(k), config, mid)
        )
    return out


def apply_h2(config: GasConfig, pot: Potential, vec: FermionVector) -> FermionVector:
    """Remainder: :T: plus every interaction term involving d_k.

    H = E_0 + H1 + H2 holds exactly on the configured sector.
    """
    lam = coupling(config)
    out = apply_normal_t(config, vec)
    for k, v in pot.nonzero_items():
        dk = apply_d(k, config, vec)
        tail = apply_b_dag(k, config, dk) + apply_b(neg(k), config, dk)
        mid = apply_b_dag(neg(k), config, vec) + apply_b(k, config, vec) + dk
        tail = tail + apply_d(neg(k), config, mid)
        out = out + (lam * v) * tail
    return out


def expectation(op, vec: FermionVector) -> complex:
    """<v|op v> / <v|v> for an operator given as a vector map."""
    nsq = vec.norm_sq()
    if nsq == 0.0:
        raise ValueError("expectation of the zero vector")
    return vec.inner(op(vec)) / nsq


# ------------------------------------------------------------ ground state


@dataclass
class GroundStateResult:
    energy: float
    vector: FermionVector
    dimension: int
    method: str
    residual: float


def sector_basis(config: GasConfig, cutoff_radius_sq: int, momentum=None, basis_limit=200_000):
    """All determinants of N modes inside the cutoff with fixed total
    momentum, in lexicographic order of the mode order."""
    import itertools as it

    modes = ball_points(config.d, cutoff_radius_sq)
    n = particle_count(config)
    if momentum is None:
        momentum = (0,) * config.d
    if cutoff_radius_sq < config.fermi_radius_sq:
        raise ValueError("cutoff must contain the Fermi ball")
    total = math.comb(len(modes), n)
    if total > 5_000_000:
        raise ValueError(
            f"refusing to enumerate {total} determinants; tighten the cutoff"
        )
    basis = [det for det in it.combinations(modes, n) if total_momentum(det) == momentum]
    if len(basis) > basis_limit:
        raise ValueError(
            f"sector dimension {len(basis)} exceeds basis_limit={basis_limit}"
        )
    return basis


def _hamiltonian_matrix(config, pot, basis):
    """Sparse PHP over the given determinant basis.

    The interaction is assembled as lambda vhat(k) A_k^dag A_k where A_k is
    the exact rho_k matrix into dynamically registered image determinants,
    so truncation only happens at the outer projection.
    """
    index = {det: i for i, det in enumerate(basis)}
    dim = len(basis)
    diag = np.empty(dim)
    e0 = e_n0(config, pot)
    for det, i in index.items():
        diag[i] = e0 + kinetic_excess(config, det)
    h = scipy.sparse.diags(diag, format="csr")
    lam = coupling(config)
    for k, v in pot.nonzero_items():
        rows, cols, data = [], [], []
        images = {}
        for det, j in index.items():
            for p in det:
                hit = move(det, p, sub(p, k))
                if hit is None:
                    continue
                sign, out = hit
                row = images.setdefault(out, len(images))
                rows.append(row)
                cols.append(j)
                data.append(float(sign))
        a = scipy.sparse.coo_matrix(
            (data, (rows, cols)), shape=(len(images), dim)
        ).tocsr()
        h = h + (lam * v) * (a.T @ a)
    return h.tocsr()


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    piv = vec[i]
    if piv == 0:
        return vec
    return vec * (abs(piv) / piv)


def ground_state(
    config: GasConfig,
    pot: Potential,
    cutoff_radius_sq: int,
    momentum=None,
    method: str = "auto",
    tol: float = 1e-9,
    dense_limit: int = 2000,
    basis_limit: int = 200_000,
) -> GroundStateResult:
    """Lowest eigenpair of the Hamiltonian restricted to a momentum sector
    of determinants over modes |p|^2 <= cutoff_radius_sq.

    The restricted energy is a variational upper bound for the full ground
    energy and never drops below e_n0.  method is "auto", "dense" or
    "iterative"; the iterative path is restarted Lanczos with residual
    tolerance tol, and "auto" switches to it above dense_limit.
    """
    basis = sector_basis(config, cutoff_radius_sq, momentum, basis_limit)
    dim = len(basis)
    if dim == 0:
        raise ValueError("empty sector")
    h = _hamiltonian_matrix(config, pot, basis)
    use_dense = method == "dense" or (method == "auto" and dim < dense_limit)
    if method == "iterative" and dim < 6:
        use_dense = True  # Lanczos needs room; exact solve is exact anyway
    if use_dense:
        w, u = scipy.linalg.eigh(h.toarray())
        energy, vec = float(w[0]), u[:, 0]
        how = "dense"
    else:
        w, u = scipy.sparse.linalg.eigsh(
            h, k=1, which="SA", tol=tol, maxiter=max(5000, 100 * dim)
        )
        energy, vec = float(w[0]), u[:, 0]
        how = "iterative"
    vec = _canonical_phase(vec)
    residual = float(np.linalg.norm(h @ vec - energy * vec))
    out = FermionVector(
        {det: complex(vec[i]) for i, det in enumerate(basis) if vec[i] != 0.0}
    ).pruned()
    return GroundStateResult(
        energy=energy, vector=out, dimension=dim, method=how, residual=residual
    )


# ------------------------------------------------------------ random states


def random_fermion_vector(
    config: GasConfig,
    rng,
    n_dets: int = 4,
    pool_radius_sq=None,
    n_particles=None,
):
    """Random normalized vector: a few determinants drawn from a mode pool
    around the Fermi ball, with complex gaussian amplitudes."""
    if pool_radius_sq is None:
        pool_radius_sq = config.fermi_radius_sq + 4
    pool = ball_points(config.d, pool_radius_sq)
    n = particle_count(config) if n_particles is None else n_particles
    if n > len(pool):
        raise ValueError("mode pool smaller than the particle number")
    terms = {}
    while len(terms) < n_dets:
        picks = rng.choice(len(pool), size=n, replace=False)
        det = determinant(pool[i] for i in picks)
        terms[det] = complex(rng.standard_normal(), rng.standard_normal())
    return FermionVector(terms).normalized()
