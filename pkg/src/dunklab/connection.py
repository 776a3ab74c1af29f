"""The rank-|W| flat connection built from the Dunkl reflection terms.

Components of the bundle are indexed by group elements (the dual bundles
pulled back along each element, in group order).  The matrix 1-form has

    A_v(z)[w', w] = < sum_{g_H^j = w' w^{-1}} C(H,j) f^{L^w}_{H,j}(z), v >

off the diagonal and the connection scalar -beta(w^{-1} v) on it.  Flat
sections satisfy dY = -A Y; parallel transport of that system is what the
monodromy module integrates.  Entries are evaluated in one batched theta
call per modulus class, which is what makes transport affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import FlatLineBundle
from .errors import StabilizedBundle
from .operators import SectionCache, ParameterSet, bundle_pullback_cached
from .theta import get_evaluator
from .torus import FiniteGroup, ReflectionHypertorus, dual_action

TWO_PI_I = 2j * np.pi

_SECTIONS = SectionCache()


class ConnectionMatrixForm:
    """Evaluable |W| x |W| matrix 1-form with its orbifold gluing data."""

    def __init__(self, bundle: FlatLineBundle, params: ParameterSet,
                 group: FiniteGroup, hypertori: list[ReflectionHypertorus]):
        if not bundle.stabilizer_free:
            raise StabilizedBundle("connection requires a stabilizer-free bundle")
        self.bundle = bundle
        self.params = params
        self.group = group
        self.hypertori = hypertori
        self.size = len(group)

        self.component_multipliers = np.array(
            [dual_action(w, bundle.multiplier_exponents) for w in group])
        # -beta(w^{-1} v) on the diagonal: rows of beta_w = beta o w^{-1}
        self.beta_rows = np.array(
            [bundle.connection_covector @ np.linalg.inv(w.matrix) for w in group])

        self.rows = np.array([h.normal_covector / h.scale for h in hypertori])
        self.offs = np.array([complex(h.base_point @ (h.normal_covector / h.scale))
                              for h in hypertori])
        self._tau_key = [complex(round(h.modulus.real, 12), round(h.modulus.imag, 12))
                         for h in hypertori]

        # flat term arrays, grouped by theta modulus
        groups = {}
        for wi, w in enumerate(group):
            bw = bundle_pullback_cached(w, bundle)
            for h in hypertori:
                acc = h.generator.index
                for j in range(1, h.order):
                    c = params.coupling(h, j)
                    if c != 0:
                        handle = _SECTIONS.get(bw, h, j)
                        g_fun = handle.transverse
                        rec = groups.setdefault(self._tau_key[h.index], {
                            "w_row": [], "w_col": [], "h": [], "coeff": [],
                            "aexp": [], "mu": [],
                        })
                        rec["w_row"].append(group.mul(acc, wi))
                        rec["w_col"].append(wi)
                        rec["h"].append(h.index)
                        rec["coeff"].append(c * handle.chart_factor * g_fun._c)
                        rec["aexp"].append(g_fun.a_exp)
                        rec["mu"].append(g_fun.mu)
                    acc = group.mul(acc, h.generator.index)
        self._classes = []
        for tau, rec in groups.items():
            self._classes.append({
                "ev": get_evaluator(tau),
                "h_list": sorted({hi for hi in rec["h"]}),
                "w_row": np.array(rec["w_row"], dtype=np.intp),
                "w_col": np.array(rec["w_col"], dtype=np.intp),
                "h": np.array(rec["h"], dtype=np.intp),
                "coeff": np.array(rec["coeff"], dtype=np.complex128),
                "aexp": np.array(rec["aexp"], dtype=np.float64),
                "mu": np.array(rec["mu"], dtype=np.complex128),
            })
        for cls in self._classes:
            pos = {hi: k for k, hi in enumerate(cls["h_list"])}
            cls["h_slot"] = np.array([pos[hi] for hi in cls["h"]], dtype=np.intp)
            cls["h_rows"] = self.rows[cls["h_list"]]
            cls["h_offs"] = self.offs[cls["h_list"]]

    # -- evaluation ---------------------------------------------------------

    def _section_values(self, z, nder=0):
        """G values (and dG/dt) for every stored (component, H, j) term."""
        z = np.asarray(z, dtype=np.complex128)
        out = []
        for cls in self._classes:
            t_h = cls["h_rows"] @ z - cls["h_offs"]
            t_terms = t_h[cls["h_slot"]]
            args = np.concatenate([t_h, t_terms + cls["mu"]])
            nh = t_h.shape[0]
            th, th1, _ = cls["ev"].theta_batch(args, nder)
            th_t, th_tm = th[:nh][cls["h_slot"]], th[nh:]
            e = np.exp(TWO_PI_I * cls["aexp"] * t_terms)
            f = cls["coeff"] * th_tm / th_t
            g = e * f
            if nder == 0:
                out.append((cls, t_terms, g, None))
                continue
            rho_t = (th1[:nh] / th[:nh])[cls["h_slot"]]
            rho_tm = th1[nh:] / th_tm
            g1 = e * (TWO_PI_I * cls["aexp"] * f + f * (rho_tm - rho_t))
            out.append((cls, t_terms, g, g1))
        return out

    def matrix_at(self, z, v):
        """A_v(z) as a dense matrix; v may be any complex direction."""
        v = np.asarray(v, dtype=np.complex128)
        a = np.zeros((self.size, self.size), dtype=np.complex128)
        a[np.diag_indices(self.size)] = -(self.beta_rows @ v)
        for cls, _, g, _ in self._section_values(z, 0):
            vals = g * (cls["h_rows"][cls["h_slot"]] @ v)
            np.add.at(a, (cls["w_row"], cls["w_col"]), vals)
        return a

    def matrix_deriv_at(self, z, v, u):
        """Directional derivative d_u [A_v](z)."""
        v = np.asarray(v, dtype=np.complex128)
        u = np.asarray(u, dtype=np.complex128)
        a = np.zeros((self.size, self.size), dtype=np.complex128)
        for cls, _, _, g1 in self._section_values(z, 1):
            rows = cls["h_rows"][cls["h_slot"]]
            vals = g1 * (rows @ v) * (rows @ u)
            np.add.at(a, (cls["w_row"], cls["w_col"]), vals)
        return a

    def entry_evaluator(self, v):
        """Contract-level closure: z -> A_v(z)."""
        return lambda z: self.matrix_at(z, v)

    # -- orbifold gluing data ------------------------------------------------

    def permutation_matrix(self, w_idx: int):
        """Component permutation of the deck action: component b -> w*b."""
        p = np.zeros((self.size, self.size))
        for b in range(self.size):
            p[self.group.mul(w_idx, b), b] = 1.0
        return p

    def translation_diag(self, gamma_coords):
        """Diagonal gluing of a lattice translation loop."""
        k = np.asarray(gamma_coords, dtype=np.float64)
        return np.diag(np.exp(TWO_PI_I * (self.component_multipliers @ k)))

    def gluing(self, w_idx: int, gamma_coords):
        return self.permutation_matrix(w_idx) @ self.translation_diag(gamma_coords)


def build_connection(bundle, params, group, hypertori) -> ConnectionMatrixForm:
    return ConnectionMatrixForm(bundle, params, group, hypertori)


def apply_rho_dv(acf: ConnectionMatrixForm, v, section, z):
    """The derivation of the representation: d_v + A_v(z) on a section vector."""
    return section.d(z, v) + acf.matrix_at(z, v) @ section.val(z)


def mixed_partial_residual(acf: ConnectionMatrixForm, u, v, section, z):
    """|rho(d_u) rho(d_v) s - rho(d_v) rho(d_u) s| at z (flatness, pointwise)."""
    au = acf.matrix_at(z, u)
    av = acf.matrix_at(z, v)
    dau_v = acf.matrix_deriv_at(z, v, u)
    dav_u = acf.matrix_deriv_at(z, u, v)
    s = section.val(z)
    su = section.d(z, u)
    sv = section.d(z, v)
    m_uv = dau_v @ s + av @ su + au @ sv + au @ (av @ s)
    m_vu = dav_u @ s + au @ sv + av @ su + av @ (au @ s)
    return float(np.max(np.abs(m_uv - m_vu)))


# ---------------------------------------------------------------------------
# Dunkl-Opdam local forms and the holomorphy-preservation check

@dataclass
class DunklOpdamForm:
    """Per-hypertorus logarithmic 1-forms: theta'/theta in the normalized
    transverse coordinate (a valid d log of a function with a simple zero on
    the hypertorus translates) plus an optional holomorphic part."""

    hypertori: list
    scale: float = 1.0                # negative control doubles the form

    def pairing(self, h: ReflectionHypertorus, z, v) -> complex:
        ev = get_evaluator(h.modulus)
        t = complex(h.t_coord(z))
        th, th1, _ = ev.theta_batch(np.array([t]), 1)
        row = h.normal_covector / h.scale
        return self.scale * complex(th1[0] / th[0]) * complex(row @ np.asarray(v))


class DunklOpdamOperator:
    """Local Dunkl-Opdam operator on one component:

        nabla_v psi + sum_{(H,j)} C(H,j) ( <f^{L^w}_{H,j}, v> psi
                                           - <phi_H, v> psi(g_H^j z) ).

    On holomorphic inputs the two simple poles cancel; the Laurent check
    measures the leftover residue coefficient.  In the constant-multiplier
    trivialization the group factor acts by precomposition with the inverse;
    that is the unique choice whose automorphy matches the multiplication
    term it is paired with.  Theta arguments are batched per modulus class,
    so one application costs a handful of series calls however many walls
    carry couplings.
    """

    def __init__(self, acf: ConnectionMatrixForm, params: ParameterSet,
                 phi: DunklOpdamForm, w_idx: int):
        self.phi = phi
        self.beta_w = acf.beta_rows[w_idx]
        bw = bundle_pullback_cached(acf.group.elements[w_idx], acf.bundle)
        walls = []           # one entry per wall with coupling
        terms = []           # (coupling, wall slot, G data, chart, g^{-j})
        for h in acf.hypertori:
            row = h.normal_covector / h.scale
            off = complex(h.base_point @ row)
            ginv = np.linalg.inv(h.generator.matrix)
            gpow = ginv
            slot = None
            for j in range(1, h.order):
                c = params.coupling(h, j)
                if c != 0:
                    if slot is None:
                        slot = len(walls)
                        walls.append((row, off, get_evaluator(h.modulus)))
                    handle = _SECTIONS.get(bw, h, j)
                    g_fun = handle.transverse
                    terms.append((c, slot, g_fun.a_exp, g_fun.mu,
                                  g_fun._c * handle.chart_factor, gpow.copy()))
                gpow = ginv @ gpow
        self.walls = walls
        self.rows = np.array([w[0] for w in walls]) if walls else np.zeros((0, 0))
        self.offs = np.array([w[1] for w in walls], dtype=np.complex128)
        self.terms = terms

    def __call__(self, v, section, z):
        v = np.asarray(v, dtype=np.complex128)
        z = np.asarray(z, dtype=np.complex128)
        out = section.d(z, v) - (self.beta_w @ v) * section.val(z)
        if not self.terms:
            return out
        psi_z = section.val(z)
        t_wall = self.rows @ z - self.offs
        row_v = self.rows @ v
        # theta(t), theta'(t) per wall and theta(t + mu) per term, batched by
        # modulus class
        by_ev = {}
        for slot, (_, _, ev) in enumerate(self.walls):
            by_ev.setdefault(id(ev), (ev, []))[1].append(slot)
        th_t = np.empty(len(self.walls), dtype=np.complex128)
        th1_t = np.empty(len(self.walls), dtype=np.complex128)
        for ev, slots in by_ev.values():
            th, th1, _ = ev.theta_batch(t_wall[slots], 1)
            th_t[slots], th1_t[slots] = th, th1
        mu_args = {}
        for k, (_, slot, _, mu, _, _) in enumerate(self.terms):
            ev = self.walls[slot][2]
            mu_args.setdefault(id(ev), (ev, [], []))[1].append(k)
            mu_args[id(ev)][2].append(t_wall[slot] + mu)
        th_tm = np.empty(len(self.terms), dtype=np.complex128)
        for ev, idx, args in mu_args.values():
            th, _, _ = ev.theta_batch(np.array(args), 0)
            th_tm[idx] = th
        rho = self.phi.scale * th1_t / th_t
        reflected = np.array([gpow @ z for _, _, _, _, _, gpow in self.terms])
        if hasattr(section, "val_many"):
            psi_refl = section.val_many(reflected)
        else:
            psi_refl = np.array([section.val(p) for p in reflected])
        for k, (c, slot, a_exp, mu, c0, gpow) in enumerate(self.terms):
            t = t_wall[slot]
            pair_f = c0 * np.exp(TWO_PI_I * a_exp * t) * th_tm[k] / th_t[slot]
            out += c * (pair_f * row_v[slot] * psi_z
                        - rho[slot] * row_v[slot] * psi_refl[k])
        return out


def dunkl_opdam_action(acf: ConnectionMatrixForm, params: ParameterSet,
                       phi: DunklOpdamForm, v, w_idx: int, section, z):
    return DunklOpdamOperator(acf, params, phi, w_idx)(v, section, z)


def laurent_pole_coefficient(func, h: ReflectionHypertorus, radius=1e-2, nodes=256):
    """Residue-type coefficient of func at the generic point of H, by contour."""
    p = h.generic_point()
    theta_s = 2 * np.pi * np.arange(nodes) / nodes
    vals = np.empty(nodes, dtype=np.complex128)
    for k, th in enumerate(theta_s):
        t = radius * np.exp(1j * th)
        vals[k] = func(p + t * h.transverse_dir) * t
    return complex(np.mean(vals))


def radial_boundedness(func, h: ReflectionHypertorus, radii=(1e-2, 1e-3, 1e-4),
                       phases=(0.3, 1.9, 3.7, 5.1)):
    """Max |func| on small circles around H, per radius (pole would grow ~1/r)."""
    p = h.generic_point()
    out = []
    for r in radii:
        m = 0.0
        for ph in phases:
            z = p + r * np.exp(1j * ph) * h.transverse_dir
            m = max(m, abs(func(z)))
        out.append(m)
    return out


# ---------------------------------------------------------------------------
# quasi-periodic holomorphic test sections (product lattices)

class ThetaQuotientSection:
    """exp-linear times theta quotients, matching a prescribed multiplier
    vector on a product lattice; holomorphic away from its seeded pole set."""

    def __init__(self, exponents, eta, pole_base, rng):
        exps = np.asarray(exponents, dtype=np.float64)
        if exps.shape[0] % 2:
            raise ValueError("multiplier vector must have even length")
        self.n = exps.shape[0] // 2
        self.eta = complex(eta)
        self.ev = get_evaluator(self.eta)
        self.a = exps[0::2]
        b = exps[1::2]
        self.sp = np.asarray(pole_base, dtype=np.complex128)
        self.s = self.sp + b - self.a * self.eta
        # normalize to O(1) values at the cell center
        self.norm = 1.0
        mid = np.full(self.n, 0.5 + 0.5j * self.eta.imag)
        self.norm = 1.0 / abs(self.val(mid))

    def _logderiv(self, z, order=1):
        z = np.asarray(z, dtype=np.complex128)
        th_s, th1_s, th2_s = self.ev.theta_batch(z - self.s, order + 1)
        th_p, th1_p, th2_p = self.ev.theta_batch(z - self.sp, order + 1)
        l1 = TWO_PI_I * self.a + th1_s / th_s - th1_p / th_p
        rho1_s = th2_s / th_s - (th1_s / th_s) ** 2
        rho1_p = th2_p / th_p - (th1_p / th_p) ** 2
        return l1, rho1_s - rho1_p

    def val(self, z):
        z = np.asarray(z, dtype=np.complex128)
        th_s, _, _ = self.ev.theta_batch(z - self.s, 0)
        th_p, _, _ = self.ev.theta_batch(z - self.sp, 0)
        return self.norm * complex(np.exp(TWO_PI_I * (self.a @ z)) * np.prod(th_s / th_p))

    def val_many(self, points):
        pts = np.asarray(points, dtype=np.complex128).reshape(-1, self.n)
        th_s, _, _ = self.ev.theta_batch((pts - self.s).ravel(), 0)
        th_p, _, _ = self.ev.theta_batch((pts - self.sp).ravel(), 0)
        quot = (th_s / th_p).reshape(pts.shape)
        return self.norm * np.exp(TWO_PI_I * (pts @ self.a)) * np.prod(quot, axis=1)

    def d(self, z, u):
        l1, _ = self._logderiv(z)
        return self.val(z) * complex(l1 @ np.asarray(u))

    def d2(self, z, u1, u2):
        l1, l2 = self._logderiv(z)
        u1 = np.asarray(u1)
        u2 = np.asarray(u2)
        return self.val(z) * (complex(l1 @ u1) * complex(l1 @ u2)
                              + complex(l2 @ (u1 * u2)))

    def pole_clear(self, points, margin=0.12):
        from .theta import lattice_distance
        for z in points:
            d = lattice_distance(np.asarray(z) - self.sp, self.eta)
            if np.min(d) < margin:
                return False
        return True


def holomorphic_test_sections(exponents, eta, count, seed, avoid_points=()):
    """Seeded basis of quasi-periodic meromorphic functions with the given
    automorphy, holomorphic on the neighborhood of the supplied points."""
    rng = np.random.default_rng(seed)
    n = len(exponents) // 2
    out = []
    guard = 0
    while len(out) < count:
        guard += 1
        if guard > 200:
            raise RuntimeError("could not seed test sections clear of the contours")
        pole_base = (rng.uniform(0.05, 0.95, n) + rng.uniform(0.05, 0.95, n) * complex(eta))
        sec = ThetaQuotientSection(exponents, eta, pole_base, rng)
        if not avoid_points or sec.pole_clear(avoid_points):
            out.append(sec)
    return out


class EntireVectorSection:
    """Vector of entire exponential-affine components with analytic derivatives."""

    def __init__(self, size, n, rng):
        self.xi = rng.normal(size=(size, n)) * 0.4 + 1j * rng.normal(size=(size, n)) * 0.4
        self.c0 = rng.normal(size=size) + 1j * rng.normal(size=size)
        self.c1 = rng.normal(size=(size, n)) * 0.5

    def val(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.exp(self.xi @ z) * (self.c0 + self.c1 @ z)

    def d(self, z, u):
        z = np.asarray(z, dtype=np.complex128)
        u = np.asarray(u, dtype=np.complex128)
        e = np.exp(self.xi @ z)
        return e * ((self.xi @ u) * (self.c0 + self.c1 @ z) + self.c1 @ u)

    def d2(self, z, u1, u2):
        z = np.asarray(z, dtype=np.complex128)
        u1 = np.asarray(u1, dtype=np.complex128)
        u2 = np.asarray(u2, dtype=np.complex128)
        e = np.exp(self.xi @ z)
        lin = self.c0 + self.c1 @ z
        return e * ((self.xi @ u1) * (self.xi @ u2) * lin
                    + (self.xi @ u1) * (self.c1 @ u2)
                    + (self.xi @ u2) * (self.c1 @ u1))
