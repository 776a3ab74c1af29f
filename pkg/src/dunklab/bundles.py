"""Flat line bundles via constant factors of automorphy, and the residue-one
meromorphic sections attached to each (hypertorus, exponent) pair.

A bundle is stored as the real vector m of multiplier exponents on the
lattice generators (multiplier exp(2 pi i m_i)) together with the covector
of its flat connection.  Sections are represented as functions on the
universal cover; automorphy is metadata that gets verified, never imposed.

Residue convention.  The section attached to (H, j) descends from the
transverse elliptic curve; its defining chart is the lift of H through the
stored base point.  Because the reflection moves that lift by the lattice
vector (g^{-j} - 1) x_H, the chart-residue and the intrinsic residue differ
by the bundle multiplier of that vector.  Sections are normalized so the
intrinsic residue is one; this is the normalization for which the whole
family is equivariant, and it makes the construction independent of the
choice of lattice translate of the base point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotDescendable, StabilizedBundle, TrivialOnTransverseCurve
from .theta import ExpKronecker, get_evaluator
from .torus import FiniteGroup, GroupElement, ReflectionHypertorus, dual_action

TWO_PI_I = 2j * np.pi
INT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FlatLineBundle:
    multiplier_exponents: np.ndarray   # m, length 2n
    connection_covector: np.ndarray    # beta, length n (complex)
    group: FiniteGroup = field(repr=False)
    stabilizer_free: bool = True
    stabilizing: tuple = ()

    def multiplier(self, gamma_coords) -> complex:
        return complex(np.exp(TWO_PI_I * (self.multiplier_exponents @ np.asarray(gamma_coords))))

    def same_point(self, other, tol=INT_TOL) -> bool:
        d = self.multiplier_exponents - other.multiplier_exponents
        return bool(np.max(np.abs(d - np.round(d))) <= tol)


def make_bundle(m, beta, group: FiniteGroup, require_free: bool = False) -> FlatLineBundle:
    """Bundle from multiplier exponents and connection covector.

    Records which nontrivial elements stabilize it; the main flows need a
    stabilizer-free bundle and raise downstream when that fails.
    """
    m = np.asarray(m, dtype=np.float64)
    beta = np.zeros(group.torus.n, dtype=np.complex128) if beta is None \
        else np.asarray(beta, dtype=np.complex128)
    if m.shape != (2 * group.torus.n,):
        raise ValueError(f"multiplier vector must have length {2 * group.torus.n}")
    stab = []
    for w in group.elements[1:]:
        d = dual_action(w, m) - m
        if np.max(np.abs(d - np.round(d))) <= INT_TOL:
            stab.append(w.index)
    bundle = FlatLineBundle(m, beta, group, stabilizer_free=not stab,
                            stabilizing=tuple(stab))
    if require_free and stab:
        raise StabilizedBundle(f"bundle is fixed by group elements {stab}")
    return bundle


def bundle_pullback(w: GroupElement, bundle: FlatLineBundle) -> FlatLineBundle:
    """L -> L^w: multipliers via the dual action, connection via w^{-1}."""
    m = dual_action(w, bundle.multiplier_exponents)
    winv = np.linalg.inv(w.matrix)
    beta = bundle.connection_covector @ winv
    return FlatLineBundle(m, beta, bundle.group,
                          bundle.stabilizer_free, bundle.stabilizing)


def bundle_dual(bundle: FlatLineBundle) -> FlatLineBundle:
    return FlatLineBundle(-bundle.multiplier_exponents, -bundle.connection_covector,
                          bundle.group, bundle.stabilizer_free, bundle.stabilizing)


def bundle_tensor(b1: FlatLineBundle, b2: FlatLineBundle) -> FlatLineBundle:
    return FlatLineBundle(b1.multiplier_exponents + b2.multiplier_exponents,
                          b1.connection_covector + b2.connection_covector,
                          b1.group, True, ())


@dataclass(frozen=True)
class DescentData:
    a: float            # multiplier exponent on the first reduced generator, in [0,1)
    b: float            # exponent on the second reduced generator, in [0,1)
    mu: complex         # a tau - b reduced to the fundamental cell
    a_exp: float        # exact exponent in G(u) = e^{2 pi i a_exp u} F(u, mu)
    automorphy: np.ndarray  # multiplier exponents of (L^{g^j})^* (x) L


def _reduce_cell(t: complex, tau: complex):
    """Reduce t into the fundamental cell of Z + tau Z; return (t', p, q)."""
    y = t.imag / tau.imag
    x = t.real - y * tau.real
    p, q = np.floor(x + INT_TOL), np.floor(y + INT_TOL)
    x, y = x - p, y - q
    if abs(x) < INT_TOL:
        x = 0.0
    if abs(y) < INT_TOL:
        y = 0.0
    return x + y * tau, int(p), int(q)


def _power_coords(g: GroupElement, j: int):
    """Integer lattice matrix of g^j (j may be negative)."""
    base = g.lattice_matrix if j >= 0 else g.lattice_matrix_inv
    out = np.eye(base.shape[0], dtype=np.int64)
    for _ in range(abs(j)):
        out = out @ base
    return out


def descent_parameters(bundle: FlatLineBundle, h: ReflectionHypertorus, j: int) -> DescentData:
    """Transverse-curve data of (L^{g_H^j})^* (x) L along H.

    The multiplier of that bundle vanishes on lattice directions tangent to H,
    so it is pulled back from the transverse elliptic curve; (a, b) are its
    exponents on the two reduced transverse generators and mu = a tau - b is
    the point of the dual curve realizing it.
    """
    if not 1 <= j <= h.order - 1:
        raise ValueError(f"exponent j = {j} outside 1..{h.order - 1}")
    m = bundle.multiplier_exponents
    # dual_action(g^j, m) = (M_{g^{-j}})^T m
    m_desc = m - _power_coords(h.generator, -j).T @ m
    # tangential vanishing: exact because g^{-j} fixes the tangent lattice
    kern = _tangent_lattice(h)
    defect = np.max(np.abs(m_desc @ kern)) if kern.size else 0.0
    if defect > 1e-10:
        raise NotDescendable(f"tangential multiplier defect {defect:.2e}")
    a_raw = float(m_desc @ h.trans_vec_1)
    b_raw = float(m_desc @ h.trans_vec_2)
    a = a_raw - np.floor(a_raw + INT_TOL)
    b = b_raw - np.floor(b_raw + INT_TOL)
    if abs(a) < INT_TOL:
        a = 0.0
    if abs(b) < INT_TOL:
        b = 0.0
    if a == 0.0 and b == 0.0:
        raise TrivialOnTransverseCurve(
            f"(H {h.index}, j={j}): descended bundle is trivial; no residue-one section")
    mu_raw = a * h.modulus - b
    mu, _, q = _reduce_cell(mu_raw, h.modulus)
    return DescentData(a=a, b=b, mu=complex(mu), a_exp=a - q, automorphy=m_desc)


def _tangent_lattice(h: ReflectionHypertorus):
    """Integer kernel of (M_{g_H} - 1): lattice directions tangent to H."""
    from .snf import integer_kernel_basis
    two_n = h.generator.lattice_matrix.shape[0]
    kern, rank, _ = integer_kernel_basis(h.generator.lattice_matrix
                                         - np.eye(two_n, dtype=np.int64))
    return kern.astype(np.float64)


@dataclass
class SectionHandle:
    """Evaluable section data: a covector-valued function on the cover.

    ``automorphy`` is the multiplier-exponent vector the evaluator is supposed
    to satisfy on the lattice generators; tests verify it, nothing imposes it.
    """

    evaluator: object                  # callable z -> (n,) covector
    pole_loci: tuple                   # hypertori carrying the simple pole
    automorphy: np.ndarray
    descent: DescentData | None = None
    transverse: ExpKronecker | None = None
    alpha_over_a: np.ndarray | None = None
    chart_factor: complex = 1.0        # chart residue of the evaluator
    bundle: FlatLineBundle | None = None
    exponent: int | None = None        # j

    def __call__(self, z):
        return self.evaluator(z)

    def pair(self, z, v) -> complex:
        return complex(self.evaluator(z) @ np.asarray(v))


def _chart_vector(h: ReflectionHypertorus, j: int, base_coords=None):
    """Lattice coordinates of (g_H^{-j} - 1) x_H (integer since x_H lies on H)."""
    two_n = h.generator.lattice_matrix.shape[0]
    y = base_coords if base_coords is not None else h.base_coords
    y = (_power_coords(h.generator, -j) - np.eye(two_n, dtype=np.int64)) @ y
    yi = np.round(y)
    if np.max(np.abs(y - yi)) > 1e-7:
        raise NotDescendable("base point does not lie on the fixed locus")
    return yi


def section_f(bundle: FlatLineBundle, h: ReflectionHypertorus, j: int,
              base_shift=None) -> SectionHandle:
    """The unique section with a simple pole on H, no other singularity, and
    intrinsic residue one, for the bundle (L^{g_H^j})^* (x) L.

    ``base_shift`` (integer lattice coordinates) rebuilds the section from a
    translated base point; the result is the same function, which the
    uniqueness tests exercise.
    """
    desc = descent_parameters(bundle, h, j)
    ev = get_evaluator(h.modulus)
    g_fun = ExpKronecker(ev, desc.mu, desc.a_exp)
    row = h.normal_covector / h.scale

    shift = np.zeros(len(h.base_coords)) if base_shift is None \
        else np.asarray(base_shift, dtype=np.float64)
    base_coords = h.base_coords + shift
    base_point = base_coords @ h._torus_basis
    # chart factor: intrinsic residue 1 means chart residue e^{-2 pi i <m, (g^{-j}-1) x>}
    ystar = _chart_vector(h, j, base_coords)
    chart = complex(np.exp(-TWO_PI_I * (bundle.multiplier_exponents @ ystar)))

    def evaluator(z, _row=row, _bp=base_point, _g=g_fun, _c=chart):
        t = (np.asarray(z, dtype=np.complex128) - _bp) @ _row
        val, _, _ = _g.value_batch(np.atleast_1d(t), 0)
        return _c * complex(val[0]) * _row

    return SectionHandle(
        evaluator=evaluator, pole_loci=(h,), automorphy=desc.automorphy,
        descent=desc, transverse=g_fun, alpha_over_a=row,
        chart_factor=chart, bundle=bundle, exponent=j,
    )


def zero_section(n: int) -> SectionHandle:
    return SectionHandle(evaluator=lambda z: np.zeros(n, dtype=np.complex128),
                         pole_loci=(), automorphy=None, chart_factor=1.0)


def residue_at(section: SectionHandle, h: ReflectionHypertorus,
               radius: float = 0.1, nodes: int = 256) -> complex:
    """Intrinsic Poincare residue of the section along H, by contour quadrature.

    Trapezoidal rule on the circle around the generic point of H, spectrally
    accurate; the chart-to-intrinsic multiplier of the section's pole chart is
    divided out so the result matches the normalization of ``section_f``.
    """
    p = h.generic_point()
    theta = 2 * np.pi * np.arange(nodes) / nodes
    vals = np.empty(nodes, dtype=np.complex128)
    for k in range(nodes):
        z = p + radius * np.exp(1j * theta[k]) * h.transverse_dir
        dz = 1j * radius * np.exp(1j * theta[k]) * h.transverse_dir
        vals[k] = section.evaluator(z) @ dz
    contour = np.mean(vals) / 1j
    # chart residue -> intrinsic residue
    if section.bundle is not None and section.exponent is not None:
        ystar = _chart_vector(h, section.exponent)
        corr = complex(np.exp(TWO_PI_I * (section.bundle.multiplier_exponents @ ystar)))
    else:
        corr = 1.0
    return complex(contour * corr)
