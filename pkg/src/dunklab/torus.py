"""Finite group actions on complex tori.

Group closure, reflection detection, enumeration of reflection hypertori via
Smith normal form, transverse lattice reduction, and the dual action on
bundle multipliers.  All group-theoretic data is snapped to exact integers
(lattice coordinates) once it passes a 1e-9 membership test, so products,
inverses and dual actions are exact afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTransverseLattice,
    NonCyclicStabilizer,
    NotFinite,
    NotLatticePreserving,
)
from .snf import det_unimodular, smith_normal_form
from .theta import lattice_distance

INT_TOL = 1e-9


class ComplexTorus:
    """Quotient X = V / Gamma of C^n by a rank-2n real lattice."""

    def __init__(self, lattice_basis):
        basis = np.asarray(lattice_basis, dtype=np.complex128)
        if basis.ndim != 2 or basis.shape[0] != 2 * basis.shape[1]:
            raise ValueError("lattice basis must be a (2n, n) array of row vectors")
        self.n = basis.shape[1]
        self.lattice_basis = basis
        # real coordinates: r(z) = (Re z, Im z); columns of B are r(gamma_i)
        self._breal = np.vstack([basis.real.T, basis.imag.T])
        if abs(np.linalg.det(self._breal)) < 1e-12:
            raise ValueError("lattice basis is not R-linearly independent")
        self._binv = np.linalg.inv(self._breal)

    def realify(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.concatenate([z.real, z.imag], axis=-1)

    def lattice_coords(self, z):
        """Real coordinates y with z = sum_i y_i gamma_i."""
        return self._binv @ self.realify(z)

    def from_coords(self, y):
        return np.asarray(y, dtype=np.float64) @ self.lattice_basis

    def realify_matrix(self, a):
        a = np.asarray(a, dtype=np.complex128)
        return np.block([[a.real, -a.imag], [a.imag, a.real]])

    def lattice_matrix(self, a, tol=INT_TOL):
        """Integer matrix of a complex-linear map in lattice coordinates."""
        m = self._binv @ self.realify_matrix(a) @ self._breal
        mi = np.round(m)
        if np.max(np.abs(m - mi)) > tol:
            raise NotLatticePreserving(
                f"map does not preserve the lattice (defect {np.max(np.abs(m - mi)):.2e})"
            )
        mi = mi.astype(np.int64)
        if abs(det_unimodular(mi)) != 1:
            raise NotLatticePreserving("lattice image is a proper sublattice")
        return mi

    def complex_matrix(self, lattice_mat):
        """Inverse of :meth:`lattice_matrix` (exact for unimodular input)."""
        w = self._breal @ np.asarray(lattice_mat, dtype=np.float64) @ self._binv
        n = self.n
        return w[:n, :n] + 1j * w[n:, :n]

    def is_lattice_vector(self, y, tol=INT_TOL):
        return bool(np.max(np.abs(y - np.round(y))) <= tol)

    def reduce_point(self, z):
        """Translate z by the lattice into the fundamental cell [0,1)^{2n}."""
        y = self.lattice_coords(z)
        y = y - np.floor(y + INT_TOL)
        y[np.abs(y) < INT_TOL] = 0.0
        return self.from_coords(y), y

    def random_point(self, rng):
        return self.from_coords(rng.uniform(0.0, 1.0, 2 * self.n))


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray
    lattice_matrix: np.ndarray
    lattice_matrix_inv: np.ndarray
    order: int
    index: int = -1

    def __hash__(self):
        return hash(self.lattice_matrix.tobytes())

    def __eq__(self, other):
        return np.array_equal(self.lattice_matrix, other.lattice_matrix)

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))


class FiniteGroup:
    """Finite lattice-preserving subgroup of GL(V), identity first."""

    def __init__(self, torus: ComplexTorus, elements: list[GroupElement],
                 mul_table: np.ndarray, inv_table: np.ndarray):
        self.torus = torus
        self.elements = elements
        self.multiplication_index = mul_table
        self.inverse_index = inv_table
        self._by_key = {e.lattice_matrix.tobytes(): e.index for e in elements}

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def identity(self) -> GroupElement:
        return self.elements[0]

    def mul(self, i: int, j: int) -> int:
        return int(self.multiplication_index[i, j])

    def inv(self, i: int) -> int:
        return int(self.inverse_index[i])

    def index_of(self, lattice_mat) -> int:
        key = np.asarray(lattice_mat, dtype=np.int64).tobytes()
        idx = self._by_key.get(key)
        if idx is None:
            raise KeyError("element not in group")
        return idx

def _integer_inverse(m):
    inv = np.round(np.linalg.inv(m)).astype(np.int64)
    if not np.array_equal(inv @ m, np.eye(m.shape[0], dtype=np.int64)):
        raise NotLatticePreserving("integer matrix is not unimodular")
    return inv


def _element_order(m, bound=10000):
    acc = m.copy()
    eye = np.eye(m.shape[0], dtype=np.int64)
    for k in range(1, bound + 1):
        if np.array_equal(acc, eye):
            return k
        acc = acc @ m
    raise NotFinite("element order exceeds the group bound")


def group_closure(generators, torus: ComplexTorus, max_order: int = 10000) -> FiniteGroup:
    """Close a set of complex generator matrices under multiplication.

    Closure runs in exact integer lattice coordinates; the complex matrices
    are reconstructed from the integer ones so that products stay consistent.
    """
    dim = 2 * torus.n
    eye = np.eye(dim, dtype=np.int64)
    gens = [torus.lattice_matrix(np.asarray(g, dtype=np.complex128)) for g in generators]
    seen = {eye.tobytes(): 0}
    mats = [eye]
    frontier = [eye]
    while frontier:
        nxt = []
        for m in frontier:
            for g in gens:
                prod = m @ g
                key = prod.tobytes()
                if key not in seen:
                    if len(mats) >= max_order:
                        raise NotFinite(f"group closure exceeded {max_order} elements")
                    seen[key] = len(mats)
                    mats.append(prod)
                    nxt.append(prod)
        frontier = nxt

    elements = []
    for idx, m in enumerate(mats):
        elements.append(GroupElement(
            matrix=torus.complex_matrix(m),
            lattice_matrix=m,
            lattice_matrix_inv=_integer_inverse(m),
            order=_element_order(m, max_order),
            index=idx,
        ))
    size = len(elements)
    mul = np.empty((size, size), dtype=np.int64)
    for i in range(size):
        for j in range(size):
            mul[i, j] = seen[(mats[i] @ mats[j]).tobytes()]
    inv = np.empty(size, dtype=np.int64)
    for i in range(size):
        inv[i] = seen[elements[i].lattice_matrix_inv.tobytes()]
    return FiniteGroup(torus, elements, mul, inv)


def find_reflections(group: FiniteGroup) -> list[GroupElement]:
    """Nontrivial elements whose fixed subspace has complex codimension 1."""
    out = []
    n = group.torus.n
    for g in group.elements[1:]:
        ev = np.linalg.eigvals(g.matrix)
        if np.sum(np.abs(ev - 1.0) < 1e-8) == n - 1:
            out.append(g)
    return out


def dual_action(w: GroupElement, multipliers):
    """Multiplier vector of the pulled-back character: m -> m o w^{-1}."""
    m = np.asarray(multipliers, dtype=np.float64)
    return w.lattice_matrix_inv.T @ m


def gauss_reduce(l1: complex, l2: complex):
    """Reduce a rank-2 lattice basis of C to (a, a*tau) with tau fundamental.

    Returns (a, tau, R) with (a, a*tau) = (l1, l2) @ R, R integer unimodular,
    Im tau > 0, |Re tau| <= 1/2 and |tau| >= 1.  Ties among shortest vectors
    (square and triangular lattices) are broken lexicographically, so the
    result depends only on the lattice, never on the presented basis.
    """
    v = np.array([l1, l2], dtype=np.complex128)
    r = np.eye(2, dtype=np.int64)
    if min(abs(l1), abs(l2)) < 1e-12:
        raise DegenerateTransverseLattice("transverse lattice basis vector is zero")
    for _ in range(256):
        if abs(v[0]) > abs(v[1]):
            v = v[[1, 0]]
            r = r[:, [1, 0]]
        mu = np.round((v[1] * np.conj(v[0])).real / abs(v[0]) ** 2)
        if mu == 0:
            break
        v[1] -= mu * v[0]
        r[:, 1] -= int(mu) * r[:, 0]
    else:
        raise DegenerateTransverseLattice("lattice reduction did not converge")
    if abs(v[1]) < 1e-12 or abs((v[1] / v[0]).imag) < 1e-9:
        raise DegenerateTransverseLattice("transverse lattice has rank < 2")

    def lex(z):
        return (round(z.real, 9), round(z.imag, 9))

    # canonical shortest vector
    span = range(-3, 4)
    cands = [(p, q, p * v[0] + q * v[1]) for p in span for q in span if (p, q) != (0, 0)]
    amin = min(abs(w) for _, _, w in cands)
    short = [(p, q, w) for p, q, w in cands if abs(w) <= amin * (1 + 1e-12)]
    pa, qa, a = max(short, key=lambda c: lex(c[2]))
    # canonical second vector: tau in the fundamental domain, lex-maximal
    best = None
    for p, q, w in cands:
        if pa * q - qa * p not in (1, -1):
            continue
        tau = w / a
        if tau.imag < 1e-9:
            continue
        if abs(tau.real) > 0.5 + 1e-9 or abs(tau) < 1 - 1e-9:
            continue
        if best is None or lex(tau) > lex(best[2] / a):
            best = (p, q, w)
    if best is None:
        raise DegenerateTransverseLattice("no fundamental-domain basis found")
    pb, qb, b = best
    r = r @ np.array([[pa, pb], [qa, qb]], dtype=np.int64)
    return complex(a), complex(b / a), r


def _canonical_covector(row, tol=1e-9):
    row = np.asarray(row, dtype=np.complex128)
    nrm = np.linalg.norm(row)
    row = row / nrm
    for x in row:
        if abs(x) > tol:
            row = row * (np.conj(x) / abs(x))
            break
    return row


def _cell_position(t, tau):
    """Coordinates of t in the fundamental cell of Z + tau Z, snapped at 1."""
    y = t.imag / tau.imag
    x = t.real - y * tau.real
    x -= np.floor(x + INT_TOL)
    y -= np.floor(y + INT_TOL)
    if abs(x) < INT_TOL:
        x = 0.0
    if abs(y) < INT_TOL:
        y = 0.0
    return x, y


@dataclass
class ReflectionHypertorus:
    """One codimension-1 component H of a fixed-point set on the torus."""

    generator: GroupElement          # g_H, determinant exp(2 pi i / n_H)
    order: int                       # n_H
    normal_covector: np.ndarray      # alpha, unit norm, phase-canonical
    base_point: np.ndarray           # x_H, lattice coordinates in [0,1)
    base_coords: np.ndarray
    trans_vec_1: np.ndarray          # integer lattice vectors mapping to the
    trans_vec_2: np.ndarray          # reduced transverse generators
    scale: complex                   # a_H
    modulus: complex                 # tau_H, Im > 0
    tangent_basis: np.ndarray        # (n, n-1) columns spanning V^{g_H}
    transverse_dir: np.ndarray       # v with alpha(v)/a_H = 1
    tangent_offset: np.ndarray       # seeded generic tangent used for charts
    orbit_id: int = -1
    index: int = -1
    key: tuple = field(default=None, repr=False)

    def t_coord(self, z):
        """Normalized transverse coordinate; lattice values exactly on H-translates."""
        z = np.asarray(z, dtype=np.complex128)
        return (z - self.base_point) @ self.normal_covector / self.scale

    def lattice_pq(self, gamma_coords):
        """Integer transverse coordinates (p, q) of a lattice vector."""
        gamma = np.asarray(gamma_coords, dtype=np.float64) @ self._torus_basis
        t = gamma @ self.normal_covector / self.scale
        q = t.imag / self.modulus.imag
        p = t.real - q * self.modulus.real
        pi, qi = int(round(p)), int(round(q))
        if abs(p - pi) > 1e-7 or abs(q - qi) > 1e-7:
            raise DegenerateTransverseLattice("lattice vector has non-integer transverse part")
        return pi, qi

    def distance(self, z):
        """Normalized transverse distance from z to the translates of H."""
        return lattice_distance(self.t_coord(z), self.modulus)

    def generic_point(self):
        return self.base_point + self.tangent_offset

    # set by enumerate_hypertori; kept off the dataclass signature
    _torus_basis: np.ndarray = field(default=None, repr=False)


def transverse_coordinate(hypertorus: ReflectionHypertorus, z):
    return hypertorus.t_coord(z)


def _mirror_covector(g: GroupElement):
    b = g.matrix - np.eye(g.matrix.shape[0])
    _, s, vh = np.linalg.svd(b)
    if s[0] < 1e-10:
        raise NonCyclicStabilizer("element is not a reflection")
    return _canonical_covector(np.conj(vh[0]))


def _tangent_basis(g: GroupElement):
    b = g.matrix - np.eye(g.matrix.shape[0])
    _, s, vh = np.linalg.svd(b)
    n = g.matrix.shape[0]
    cols = vh[1:].conj().T if n > 1 else np.zeros((1, 0), dtype=np.complex128)
    return cols


def _transverse_key(torus, alpha, g, x):
    """Canonical dedup key: normal direction + transverse cell position."""
    kern_mat = (g.lattice_matrix - np.eye(2 * torus.n, dtype=np.int64))
    _, _, v = smith_normal_form(kern_mat)
    k1, k2 = v[:, 0], v[:, 1]
    l1 = complex(torus.from_coords(k1) @ alpha)
    l2 = complex(torus.from_coords(k2) @ alpha)
    a, tau, _ = gauss_reduce(l1, l2)
    t = complex((x @ alpha) / a)
    fx, fy = _cell_position(t, tau)
    akey = tuple(v for z in np.round(alpha, 9).tolist() for v in (z.real + 0.0, z.imag + 0.0))
    return akey + (round(fx, 9), round(fy, 9))


def _stabilizer(group: FiniteGroup, torus: ComplexTorus, point):
    y = torus.lattice_coords(point)
    out = []
    for g in group:
        d = g.lattice_matrix @ y - y
        if torus.is_lattice_vector(d, tol=1e-7):
            out.append(g.index)
    return out


def enumerate_hypertori(group: FiniteGroup, torus: ComplexTorus,
                        seed: int = 20240) -> list[ReflectionHypertorus]:
    """All reflection hypertori of the action, deduplicated and orbit-labeled."""
    rng = np.random.default_rng(seed)
    two_n = 2 * torus.n
    eye = np.eye(two_n, dtype=np.int64)

    candidates = {}
    for g in find_reflections(group):
        kmat = g.lattice_matrix - eye
        u, d, v = smith_normal_form(kmat)
        rank = sum(1 for i in range(two_n) if d[i, i] != 0)
        if rank != 2:
            raise DegenerateTransverseLattice(
                f"reflection fixed-set has lattice rank {rank}, expected 2")
        d1, d2 = int(d[0, 0]), int(d[1, 1])
        alpha = _mirror_covector(g)
        for k1 in range(abs(d1)):
            for k2 in range(abs(d2)):
                u_vec = np.zeros(two_n)
                u_vec[0] = k1 / d1
                u_vec[1] = k2 / d2
                y = v.astype(np.float64) @ u_vec
                y = y - np.floor(y + INT_TOL)
                y[np.abs(y) < INT_TOL] = 0.0
                x = torus.from_coords(y)
                key = _transverse_key(torus, alpha, g, x)
                if key not in candidates:
                    candidates[key] = (g, alpha, x, y)

    hypertori = []
    for key in sorted(candidates):
        g0, alpha, x, y = candidates[key]
        tangent = _tangent_basis(g0)
        # generic point: seeded tangent offset, re-checked at a second tangent
        # to avoid accidental extra symmetry
        def tangent_point():
            if tangent.shape[1] == 0:
                return np.zeros(torus.n, dtype=np.complex128)
            c = rng.uniform(0.11, 0.41, tangent.shape[1]) + \
                1j * rng.uniform(0.13, 0.37, tangent.shape[1])
            return tangent @ c

        t0 = tangent_point()
        stab = _stabilizer(group, torus, x + t0)
        stab2 = _stabilizer(group, torus, x + tangent_point())
        stab = sorted(set(stab) & set(stab2))
        n_h = len(stab)
        zeta = np.exp(2j * np.pi / n_h)
        gen = None
        for i in stab:
            if abs(group.elements[i].det - zeta) < 1e-8:
                gen = group.elements[i]
                break
        if gen is None:
            raise NonCyclicStabilizer("no stabilizer element with determinant exp(2 pi i/n)")
        powers = set()
        acc = 0
        for _ in range(n_h):
            powers.add(acc)
            acc = group.mul(acc, gen.index)
        if powers != set(stab):
            raise NonCyclicStabilizer("stabilizer is not generated by g_H")

        kmat = gen.lattice_matrix - eye
        _, _, v = smith_normal_form(kmat)
        kv1, kv2 = v[:, 0].copy(), v[:, 1].copy()
        l1 = complex(torus.from_coords(kv1) @ alpha)
        l2 = complex(torus.from_coords(kv2) @ alpha)
        a_h, tau_h, r = gauss_reduce(l1, l2)
        kv = np.stack([kv1, kv2], axis=1) @ r
        # transverse eigenvector of g_H, normalized so alpha(v)/a_H = 1
        evals, evecs = np.linalg.eig(gen.matrix)
        j = int(np.argmin(np.abs(evals - zeta)))
        vt = evecs[:, j]
        vt = a_h * vt / (vt @ alpha)

        h = ReflectionHypertorus(
            generator=gen, order=n_h, normal_covector=alpha,
            base_point=x, base_coords=y,
            trans_vec_1=kv[:, 0], trans_vec_2=kv[:, 1],
            scale=a_h, modulus=tau_h,
            tangent_basis=tangent, transverse_dir=vt,
            tangent_offset=t0, key=key,
        )
        h._torus_basis = torus.lattice_basis
        h.index = len(hypertori)
        hypertori.append(h)

    _assign_orbits(group, torus, hypertori)
    return hypertori


def hypertorus_image_key(group: FiniteGroup, torus: ComplexTorus,
                         w: GroupElement, h: ReflectionHypertorus):
    """Canonical key of w*H (used for orbit assignment and W-stability checks)."""
    winv = group.elements[group.inv(w.index)]
    alpha_img = _canonical_covector(h.normal_covector @ winv.matrix)
    gi = group.mul(group.mul(w.index, h.generator.index), winv.index)
    g_img = group.elements[gi]
    x_img = h.base_point @ w.matrix.T
    return _transverse_key(torus, alpha_img, g_img, x_img)


def _assign_orbits(group: FiniteGroup, torus: ComplexTorus,
                   hypertori: list[ReflectionHypertorus]):
    by_key = {h.key: h.index for h in hypertori}
    parent = list(range(len(hypertori)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for h in hypertori:
        for w in group:
            key = hypertorus_image_key(group, torus, w, h)
            other = by_key.get(key)
            if other is None:
                raise NonCyclicStabilizer(
                    "hypertorus list is not W-stable (image key missing)")
            ri, rj = find(h.index), find(other)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    roots = sorted({find(i) for i in range(len(hypertori))})
    rank = {r: k for k, r in enumerate(roots)}
    for h in hypertori:
        h.orbit_id = rank[find(h.index)]
