"""Orbifold braid generators, parallel transport, and Hecke-relation checks.

Loops are paths from the basepoint x to w^{-1} x + gamma; they compose by
"second path, then the deck image of the first", under which the monodromy

    m(path) = Pi_w . D_gamma . Psi(path)

is a homomorphism (Pi_w the component permutation b -> w b, D_gamma the
diagonal of component multipliers, Psi the fundamental solution of the flat
system along the path).

Orientation convention: the hypertorus generator walks to a staging point at
transverse radius 0.1, sweeps an arc of 2 pi / n_H counterclockwise in the
normalized transverse coordinate, and returns along the g_H-image of the
approach; its n_H-th power is the full counterclockwise circle around H.
The endpoint is then g_H x + gamma, so the stored deck element w is g_H^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundles import FlatLineBundle
from .connection import ConnectionMatrixForm
from .errors import BasepointOnHypertorus, StepUnderflow, ToleranceNotMet
from .operators import ParameterSet, SectionCache
from .torus import ComplexTorus, FiniteGroup, ReflectionHypertorus

TWO_PI_I = 2j * np.pi

_SECTIONS = SectionCache()


# ---------------------------------------------------------------------------
# path geometry

@dataclass(frozen=True)
class LineSeg:
    z0: np.ndarray
    z1: np.ndarray

    def point(self, s):
        return self.z0 + s * (self.z1 - self.z0)

    def velocity(self, s):
        return self.z1 - self.z0

    def mapped(self, a, b):
        return LineSeg(a @ self.z0 + b, a @ self.z1 + b)

    def reversed(self):
        return LineSeg(self.z1, self.z0)


@dataclass(frozen=True)
class ArcSeg:
    center: np.ndarray
    vec: np.ndarray
    radius: float
    th0: float
    dth: float

    def point(self, s):
        return self.center + self.radius * np.exp(1j * (self.th0 + s * self.dth)) * self.vec

    def velocity(self, s):
        return 1j * self.dth * self.radius * np.exp(1j * (self.th0 + s * self.dth)) * self.vec

    def mapped(self, a, b):
        return ArcSeg(a @ self.center + b, a @ self.vec, self.radius, self.th0, self.dth)

    def reversed(self):
        return ArcSeg(self.center, self.vec, self.radius, self.th0 + self.dth, -self.dth)


@dataclass
class PathSpec:
    """Piecewise path with orbifold endpoint data: end = w^{-1} start + gamma."""

    segments: list
    end_w: int                      # group element index of w
    end_gamma: np.ndarray           # integer lattice coordinates of gamma
    basepoint: np.ndarray
    clearance: float = field(default=np.inf)

    def endpoint(self):
        return self.segments[-1].point(1.0)

    def validate(self, group: FiniteGroup, torus: ComplexTorus, hypertori,
                 min_clearance=0.05):
        w = group.elements[self.end_w]
        target = np.linalg.inv(w.matrix) @ self.basepoint \
            + self.end_gamma @ torus.lattice_basis
        if np.max(np.abs(self.endpoint() - target)) > 1e-12:
            raise ValueError("path endpoint inconsistent with its deck data")
        for k in range(len(self.segments) - 1):
            gap = np.max(np.abs(self.segments[k].point(1.0)
                                - self.segments[k + 1].point(0.0)))
            if gap > 1e-12:
                raise ValueError(f"path discontinuous at joint {k}")
        cl = path_clearance(self.segments, hypertori)
        self.clearance = cl
        if cl < min_clearance - 1e-12:
            raise ValueError(f"path clearance {cl:.4f} below {min_clearance}")
        return self


def path_clearance(segments, hypertori, samples=160):
    s = np.linspace(0.0, 1.0, samples)
    worst = np.inf
    for seg in segments:
        pts = np.array([seg.point(t) for t in s])
        for h in hypertori:
            worst = min(worst, float(np.min(h.distance(pts))))
    return worst


def compose_paths(group: FiniteGroup, torus: ComplexTorus,
                  p1: PathSpec, p2: PathSpec) -> PathSpec:
    """p1 o p2: run p2 first, then the deck image of p1 under p2's endpoint."""
    w2 = group.elements[p2.end_w]
    a = np.linalg.inv(w2.matrix)
    b = p2.end_gamma @ torus.lattice_basis
    segs = list(p2.segments) + [s.mapped(a, b) for s in p1.segments]
    w_new = group.mul(p1.end_w, p2.end_w)
    gamma_new = w2.lattice_matrix_inv @ p1.end_gamma + p2.end_gamma
    out = PathSpec(segs, w_new, gamma_new, p1.basepoint,
                   min(p1.clearance, p2.clearance))
    return out


def reverse_path(group: FiniteGroup, torus: ComplexTorus, p: PathSpec) -> PathSpec:
    w = group.elements[p.end_w]
    gamma_vec = p.end_gamma @ torus.lattice_basis
    a = w.matrix
    b = -(w.matrix @ gamma_vec)
    segs = [s.reversed().mapped(a, b) for s in reversed(p.segments)]
    return PathSpec(segs, group.inv(p.end_w),
                    -(w.lattice_matrix @ p.end_gamma),
                    p.basepoint, p.clearance)


def _route(hypertori, z_from, z_to, rng, clearance, depth=7):
    """Straight segment, or recursive seeded detour when clearance fails."""
    seg = LineSeg(np.asarray(z_from), np.asarray(z_to))
    if path_clearance([seg], hypertori) >= clearance:
        return [seg]
    if depth == 0:
        raise BasepointOnHypertorus("could not route path with required clearance")
    span = np.max(np.abs(np.asarray(z_to) - np.asarray(z_from))) + 0.2
    for _ in range(40):
        mid = 0.5 * (np.asarray(z_from) + np.asarray(z_to))
        mid = mid + (rng.normal(size=mid.shape) + 1j * rng.normal(size=mid.shape)) \
            * 0.25 * span
        try:
            left = _route(hypertori, z_from, mid, rng, clearance, depth - 1)
            right = _route(hypertori, mid, z_to, rng, clearance, depth - 1)
            return left + right
        except BasepointOnHypertorus:
            continue
    raise BasepointOnHypertorus("could not route path with required clearance")


def pick_basepoint(torus: ComplexTorus, group: FiniteGroup, hypertori,
                   seed, clearance=0.1):
    rng = np.random.default_rng(seed)
    for _ in range(4000):
        z = torus.random_point(rng)
        if any(h.distance(z) < clearance for h in hypertori):
            continue
        y = torus.lattice_coords(z)
        stab = [w.index for w in group.elements[1:]
                if torus.is_lattice_vector(w.lattice_matrix @ y - y, tol=1e-7)]
        if not stab:
            return z
    raise BasepointOnHypertorus("no basepoint with trivial stabilizer found")


def braid_generators(group: FiniteGroup, torus: ComplexTorus,
                     hypertori: list[ReflectionHypertorus], basepoint,
                     seed=5151, radius=0.1, clearance=0.05):
    """Translation loops for the lattice generators plus one loop per
    hypertorus, each validated for clearance and endpoint consistency."""
    rng = np.random.default_rng(seed)
    x = np.asarray(basepoint, dtype=np.complex128)
    two_n = 2 * torus.n
    gens = {"translation": [], "hypertorus": {}}

    for i in range(two_n):
        gamma = torus.lattice_basis[i]
        segs = _route(hypertori, x, x + gamma, rng, clearance)
        k = np.zeros(two_n, dtype=np.int64)
        k[i] = 1
        p = PathSpec(segs, 0, k, x).validate(group, torus, hypertori, clearance)
        gens["translation"].append(p)

    for h in hypertori:
        g = h.generator
        th0 = float(rng.uniform(0.2, 1.2))
        p_base = h.generic_point()
        p_stage = p_base + radius * np.exp(1j * th0) * h.transverse_dir
        approach = _route(hypertori, x, p_stage, rng, clearance)
        arc = ArcSeg(p_base, h.transverse_dir, radius, th0, 2 * np.pi / h.order)
        # return leg: g_H-image of the reversed approach, shifted by the exact
        # lattice vector closing the arc onto g_H * staging
        shift = arc.point(1.0) - g.matrix @ p_stage
        shift_coords = np.round(torus.lattice_coords(shift))
        shift = shift_coords @ torus.lattice_basis
        back = [s.reversed().mapped(g.matrix, shift) for s in reversed(approach)]
        segs = approach + [arc] + back
        p = PathSpec(segs, group.inv(g.index), shift_coords.astype(np.int64), x)
        p.validate(group, torus, hypertori, clearance)
        gens["hypertorus"][h.index] = p

    return gens


# ---------------------------------------------------------------------------
# transport

_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])


_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])


def _integrate_segment(rhs, seg, y, rtol, atol, max_steps):
    s = 0.0
    h = 0.05
    k1 = rhs(seg, s) @ y
    steps = 0
    while s < 1.0:
        steps += 1
        if steps > max_steps:
            raise ToleranceNotMet("step budget exhausted on one segment")
        h = min(h, 1.0 - s)
        if h < 1e-13:
            raise StepUnderflow("integration step underflow (pole too close?)")
        k = [k1]
        for i in range(1, 7):
            yi = y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
            k.append(rhs(seg, s + h * _DP_C[i]) @ yi)
        y5 = y + h * sum(_DP_B5[j] * k[j] for j in range(7))
        y4 = y + h * sum(_DP_B4[j] * k[j] for j in range(7))
        err = np.max(np.abs(y5 - y4) / (atol + rtol * np.maximum(np.abs(y5), np.abs(y))))
        if err <= 1.0:
            s += h
            y = y5
            k1 = k[6]  # FSAL
            h *= min(5.0, max(0.2, 0.9 * (err + 1e-16) ** -0.2))
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    return y


@dataclass
class MonodromyMatrix:
    matrix: np.ndarray
    path: PathSpec
    error_estimate: float


class TransportSystem:
    """Protocol: ode_matrix(z, v) drives dY/ds = ode_matrix(z(s))[z'(s)] Y and
    gluing(w, gamma) closes the orbifold loop."""

    def ode_matrix(self, z, v):
        raise NotImplementedError

    def gluing(self, w_idx, gamma_coords):
        raise NotImplementedError

    size: int


class FlatSectionSystem(TransportSystem):
    """Flat sections of the connection form: dY = -A Y, glued by Pi_w D_gamma."""

    def __init__(self, acf: ConnectionMatrixForm):
        self.acf = acf
        self.size = acf.size

    def ode_matrix(self, z, v):
        return -self.acf.matrix_at(z, v)

    def gluing(self, w_idx, gamma_coords):
        return self.acf.gluing(w_idx, gamma_coords)


def _fundamental_matrix(system, path, rtol, atol, max_steps=40000):
    y = np.eye(system.size, dtype=np.complex128)

    def rhs(seg, s):
        return system.ode_matrix(seg.point(s), seg.velocity(s))

    for seg in path.segments:
        y = _integrate_segment(rhs, seg, y, rtol, atol, max_steps)
    return y


def transport(system, path: PathSpec, rtol=1e-10, atol=1e-12) -> MonodromyMatrix:
    """Monodromy along one orbifold loop with a step-doubling error estimate.

    Integrates once at the requested tolerance and once at half of it;
    reports the finer result, with the discrepancy (doubled) as the error
    estimate, so a further halving stays within the reported bound.
    """
    coarse = _fundamental_matrix(system, path, rtol, atol)
    fine = _fundamental_matrix(system, path, rtol / 2, atol / 2)
    glue = system.gluing(path.end_w, path.end_gamma)
    err = 2.0 * float(np.max(np.abs(glue @ (fine - coarse)))) + 1e-15
    return MonodromyMatrix(glue @ fine, path, err)


# ---------------------------------------------------------------------------
# Hecke data

def hecke_exponents(params: ParameterSet, h: ReflectionHypertorus):
    """The predicted eigenvalue exponents of the loop around H:

        tau_m = -(2 pi i / n_H) sum_{j=1}^{n_H - 1} C(H, j) exp(-2 pi i j m / n_H).
    """
    n = h.order
    out = []
    for m in range(1, n + 1):
        s = sum(params.coupling(h, j) * np.exp(-TWO_PI_I * j * m / n)
                for j in range(1, n))
        out.append(complex(-TWO_PI_I / n * s))
    return out


def predicted_eigenvalues(params: ParameterSet, h: ReflectionHypertorus):
    taus = hecke_exponents(params, h)
    n = h.order
    return [complex(np.exp(TWO_PI_I * m / n) * np.exp(taus[m - 1]))
            for m in range(1, n + 1)]


@dataclass
class HeckeData:
    orbit_id: int
    order: int
    exponents: list
    predicted: list
    observed: list
    matched_error: float
    polynomial_residual: float
    det_residual: float
    multiplicities: list


def _match_eigenvalues(observed, predicted):
    """Greedy nearest-neighbor matching; returns (max distance, multiplicities)."""
    preds = list(predicted)
    mult = [0] * len(preds)
    worst = 0.0
    for ev in observed:
        d = [abs(ev - p) for p in preds]
        k = int(np.argmin(d))
        worst = max(worst, d[k])
        mult[k] += 1
    return worst, mult


def hecke_check(params: ParameterSet, system, generators,
                hypertori) -> list[HeckeData]:
    """Per-orbit verification of the deformed cyclotomic relation of the loop
    monodromy: prod_m (T - e^{2 pi i m/n} e^{tau_m}) small, eigenvalues on the
    predicted set, determinant consistent."""
    by_orbit = {}
    for h in hypertori:
        by_orbit.setdefault(h.orbit_id, h)
    out = []
    for oid in sorted(by_orbit):
        h = by_orbit[oid]
        t_mat = transport(system, generators["hypertorus"][h.index]).matrix
        preds = predicted_eigenvalues(params, h)
        r = np.eye(len(t_mat), dtype=np.complex128)
        for lam in preds:
            r = r @ (t_mat - lam * np.eye(len(t_mat)))
        tnorm = np.linalg.norm(t_mat, 2)
        poly_res = float(np.linalg.norm(r) / tnorm ** h.order)
        observed = np.linalg.eigvals(t_mat)
        worst, mult = _match_eigenvalues(observed, preds)
        det_pred = np.prod([p ** m for p, m in zip(preds, mult)])
        det_res = abs(np.linalg.det(t_mat) - det_pred) / abs(det_pred)
        out.append(HeckeData(
            orbit_id=oid, order=h.order,
            exponents=hecke_exponents(params, h),
            predicted=preds, observed=observed.tolist(),
            matched_error=float(worst), polynomial_residual=poly_res,
            det_residual=float(det_res), multiplicities=mult,
        ))
    return out


# ---------------------------------------------------------------------------
# the companion (solution-sheaf) system and the duality check

class CompanionSystem(TransportSystem):
    """Vectorized scalar Dunkl system: components Psi_w(z) = psi(w^{-1} z).

    dPsi_w = -beta(w^{-1}v) Psi_w
             + sum_{(H,j)} C(H,j) <f_{H,j}(w^{-1}z), w^{-1}v> Psi_{w g_H^j};
    integrated forward, glued by the conjugate multipliers.
    """

    def __init__(self, bundle: FlatLineBundle, params: ParameterSet,
                 group: FiniteGroup, hypertori):
        self.group = group
        self.bundle = bundle
        self.size = len(group)
        from .torus import dual_action
        self.component_multipliers = np.array(
            [dual_action(w, bundle.multiplier_exponents) for w in group])
        self.beta_rows = np.array(
            [bundle.connection_covector @ np.linalg.inv(w.matrix) for w in group])
        from .theta import get_evaluator
        groups = {}
        for wi, w in enumerate(group):
            winv_c = np.linalg.inv(w.matrix)
            for h in hypertori:
                acc = h.generator.index
                row = (h.normal_covector / h.scale) @ winv_c
                off = complex(h.base_point @ (h.normal_covector / h.scale))
                tau_key = complex(round(h.modulus.real, 12), round(h.modulus.imag, 12))
                for j in range(1, h.order):
                    c = params.coupling(h, j)
                    if c != 0:
                        handle = _SECTIONS.get(bundle, h, j)
                        g_fun = handle.transverse
                        rec = groups.setdefault(tau_key, {
                            "w_row": [], "w_col": [], "rows": [], "offs": [],
                            "coeff": [], "aexp": [], "mu": []})
                        rec["w_row"].append(wi)
                        rec["w_col"].append(group.mul(wi, acc))
                        rec["rows"].append(row)
                        rec["offs"].append(off)
                        rec["coeff"].append(c * handle.chart_factor * g_fun._c)
                        rec["aexp"].append(g_fun.a_exp)
                        rec["mu"].append(g_fun.mu)
                    acc = group.mul(acc, h.generator.index)
        self._classes = []
        for tau_key, rec in groups.items():
            self._classes.append({
                "ev": get_evaluator(tau_key),
                "w_row": np.array(rec["w_row"], dtype=np.intp),
                "w_col": np.array(rec["w_col"], dtype=np.intp),
                "rows": np.array(rec["rows"]),
                "offs": np.array(rec["offs"], dtype=np.complex128),
                "coeff": np.array(rec["coeff"], dtype=np.complex128),
                "aexp": np.array(rec["aexp"], dtype=np.float64),
                "mu": np.array(rec["mu"], dtype=np.complex128),
            })

    def matrix_at(self, z, v):
        a = np.zeros((self.size, self.size), dtype=np.complex128)
        a[np.diag_indices(self.size)] = -(self.beta_rows @ np.asarray(v))
        for cls in self._classes:
            t = cls["rows"] @ np.asarray(z) - cls["offs"]
            nt = len(t)
            th, _, _ = cls["ev"].theta_batch(np.concatenate([t, t + cls["mu"]]), 0)
            vals = (cls["coeff"] * np.exp(TWO_PI_I * cls["aexp"] * t)
                    * th[nt:] / th[:nt]) * (cls["rows"] @ np.asarray(v))
            np.add.at(a, (cls["w_row"], cls["w_col"]), vals)
        return a

    def ode_matrix(self, z, v):
        return self.matrix_at(z, v)

    def gluing(self, w_idx, gamma_coords):
        k = np.asarray(gamma_coords, dtype=np.float64)
        p = np.zeros((self.size, self.size))
        for b in range(self.size):
            p[self.group.mul(w_idx, b), b] = 1.0
        return p @ np.diag(np.exp(-TWO_PI_I * (self.component_multipliers @ k)))


def companion_system(bundle, params, group, hypertori) -> CompanionSystem:
    return CompanionSystem(bundle, params, group, hypertori)


def dual_consistency_check(pi_mats: dict, xi_mats: dict, words) -> list[float]:
    """|tr pi(word) - tr xi(word^{-1})| per word; matrices per generator key."""
    out = []
    for word in words:
        acc_pi = None
        for gkey in word:
            m = pi_mats[gkey]
            acc_pi = m if acc_pi is None else acc_pi @ m
        acc_xi = None
        for gkey in word:
            m = np.linalg.inv(xi_mats[gkey])
            acc_xi = m if acc_xi is None else m @ acc_xi
        size = len(next(iter(pi_mats.values())))
        tr_pi = np.trace(acc_pi) if acc_pi is not None else size
        tr_xi = np.trace(acc_xi) if acc_xi is not None else size
        out.append(float(abs(tr_pi - tr_xi)))
    return out


# ---------------------------------------------------------------------------
# conjecture evidence

def irreducibility_evidence(matrices, threshold=1e-6):
    """Numerical commutant dimension of a matrix family, with the singular
    value gap across the rank threshold."""
    mats = [np.asarray(m) for m in matrices]
    n = mats[0].shape[0]
    eye = np.eye(n)
    blocks = [np.kron(eye, m) - np.kron(m.T, eye) for m in mats]
    stack = np.vstack(blocks)
    sv = np.linalg.svd(stack, compute_uv=False)
    scale = max(sv[0], 1.0)
    small = sv[sv < threshold * scale]
    dim = int(len(small))
    above = sv[sv >= threshold * scale]
    gap = float(above[-1] / small[0]) if len(small) and len(above) else np.inf
    return dim, gap, sv


def parameter_family_probe(make_traces, m0, beta0, step=1e-4, rank_tol=1e-6):
    """Finite-difference Jacobian of monodromy traces in the bundle and
    connection parameters; reports the real rank (full = twice the complex
    parameter count)."""
    m0 = np.asarray(m0, dtype=np.float64)
    beta0 = np.asarray(beta0, dtype=np.complex128)
    n2 = len(m0)
    n = len(beta0)

    def traces_at(pvec):
        m = pvec[:n2]
        beta = pvec[n2:n2 + n] + 1j * pvec[n2 + n:]
        return np.asarray(make_traces(m, beta), dtype=np.complex128)

    p0 = np.concatenate([m0, beta0.real, beta0.imag])
    cols = []
    for i in range(len(p0)):
        dp = np.zeros_like(p0)
        dp[i] = step
        tp = traces_at(p0 + dp)
        tm = traces_at(p0 - dp)
        cols.append((tp - tm) / (2 * step))
    jac_c = np.array(cols).T
    jac = np.vstack([jac_c.real, jac_c.imag])
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    return {"jacobian_singular_values": sv.tolist(), "real_rank": rank,
            "full_real_rank": jac.shape[1], "complex_rank": rank // 2,
            "full": rank == jac.shape[1]}
