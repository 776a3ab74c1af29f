"""Odd Jacobi theta function, its derivatives, and the Kronecker function.

The odd theta function used everywhere is

    theta(z | tau) = 2 q^{1/8} sum_{k>=0} (-1)^k q^{k(k+1)/2} sin((2k+1) pi z),
    q = exp(2 pi i tau),

the unique-up-to-scale odd entire function with

    theta(z + 1)   = -theta(z),
    theta(z + tau) = -exp(-pi i tau - 2 pi i z) theta(z).

Arguments are reduced into the fundamental cell before summation and the
exact multiplier from the functional equation is applied afterwards, so the
series never sees a large imaginary part.

The Kronecker function

    F(t, mu) = theta'(0) theta(t + mu) / (theta(t) theta(mu))

is 1-periodic in t, picks up exp(-2 pi i mu) under t -> t + tau, and has a
simple pole of residue 1 on the lattice.  It realizes the residue-one
sections on the transverse elliptic curve.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import PoleEvaluation, TrivialBundleParameter

TWO_PI_I = 2j * np.pi

MIN_IM_TAU = 0.05
PARAM_GUARD = 1e-9   # nontriviality guard for the bundle parameter mu
POLE_GUARD = 1e-12   # evaluation guard at the pole divisor


def lattice_split(t, tau):
    """Write t = t0 + p + q*tau with integer p, q and t0 in the centered cell."""
    t = np.asarray(t, dtype=np.complex128)
    q = np.round(t.imag / tau.imag)
    t1 = t - q * tau
    p = np.round(t1.real)
    return t1 - p, p.astype(np.int64), q.astype(np.int64)


def lattice_distance(t, tau):
    """Distance from t to the nearest point of Z + tau*Z."""
    t0, _, _ = lattice_split(t, tau)
    # t0 is the representative closest in lattice coordinates; refine over the
    # four neighboring lattice points in case the cell is very skew
    cands = [t0, t0 - 1, t0 + 1, t0 - tau, t0 + tau, t0 - 1 - tau, t0 + 1 - tau,
             t0 - 1 + tau, t0 + 1 + tau]
    return np.min(np.abs(np.array(cands)), axis=0)


class ThetaEvaluator:
    """Cached q-series evaluator for one modulus tau (Im tau >= 0.05)."""

    def __init__(self, tau, min_terms: int = 8, max_terms: int = 400):
        tau = complex(tau)
        if tau.imag < MIN_IM_TAU:
            raise ValueError(
                f"Im tau = {tau.imag:.4g} < {MIN_IM_TAU}; reduce the lattice first"
            )
        self.tau = tau
        self.nome = np.exp(TWO_PI_I * tau)
        self.truncation = self._pick_truncation(min_terms, max_terms)
        k = np.arange(self.truncation, dtype=np.float64)
        sign = np.where(k.astype(np.int64) % 2 == 0, 1.0, -1.0)
        self.cached_powers = (sign * np.exp(TWO_PI_I * tau * (k * (k + 1) / 2))
                              ).astype(np.complex128)
        self.prefactor = 2.0 * np.exp(1j * np.pi * tau / 4.0)
        # theta'(0): the sine terms vanish, only S1 survives
        w = (2 * k + 1) * np.pi
        self._dz0 = self.prefactor * np.sum(self.cached_powers * w)
        self._self_check()

    def _pick_truncation(self, min_terms, max_terms):
        # worst case before reduction margin: |Im z| up to Im tau
        im = self.tau.imag
        logq = -2 * np.pi * im
        best = -np.inf
        small = 0
        n = min_terms
        for k in range(max_terms):
            logterm = logq * (k * (k + 1) / 2) + (2 * k + 1) * np.pi * im
            best = max(best, logterm)
            if logterm < best + np.log(1e-19):
                small += 1
                if small >= 2:
                    n = max(min_terms, k + 1)
                    break
            else:
                small = 0
        else:
            n = max_terms
        return n

    def _self_check(self):
        # adding 5 more terms must not move any value by 1e-14 relative
        rng = np.random.default_rng(7)
        z = (rng.uniform(-0.5, 0.5, 4)
             + 1j * rng.uniform(-1.0, 1.0, 4) * self.tau.imag)
        full = self.theta(z)
        k = np.arange(self.truncation + 5, dtype=np.float64)
        sign = np.where(k.astype(np.int64) % 2 == 0, 1.0, -1.0)
        coeffs = (sign * np.exp(TWO_PI_I * self.tau * (k * (k + 1) / 2))).astype(np.complex128)
        z0, p, q = lattice_split(z, self.tau)
        s0, _, _ = _kernels.theta_sums(z0, coeffs, 0)
        longer = self._multiplier(z0, p, q) * self.prefactor * s0
        if np.max(np.abs(full - longer) / np.maximum(np.abs(full), 1e-300)) > 1e-14:
            raise ValueError("theta series truncation failed its self-consistency check")

    def _multiplier(self, z0, p, q):
        sign = np.where((p + q) % 2 == 0, 1.0, -1.0)
        return sign * np.exp(-1j * np.pi * q * q * self.tau - TWO_PI_I * q * z0)

    def theta_batch(self, z, nder: int = 0):
        """theta and derivatives at an array of points; returns (th, th', th'')."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        z0, p, q = lattice_split(z, self.tau)
        s0, s1, s2 = _kernels.theta_sums(z0, self.cached_powers, nder)
        mult = self._multiplier(z0, p, q) * self.prefactor
        th = mult * s0
        th1 = th2 = None
        if nder >= 1:
            jq = TWO_PI_I * q
            th1 = mult * (s1 - jq * s0)
            if nder >= 2:
                th2 = mult * (s2 - 2 * jq * s1 + jq * jq * s0)
        return th, th1, th2

    def theta(self, z):
        th, _, _ = self.theta_batch(z, 0)
        return th if np.ndim(z) else complex(th[0])

    def theta_dz(self, z):
        _, th1, _ = self.theta_batch(z, 1)
        return th1 if np.ndim(z) else complex(th1[0])

    def theta_ddz(self, z):
        _, _, th2 = self.theta_batch(z, 2)
        return th2 if np.ndim(z) else complex(th2[0])

    def theta_dz0(self):
        return complex(self._dz0)


_EVALUATOR_CACHE: dict[complex, ThetaEvaluator] = {}


def get_evaluator(tau) -> ThetaEvaluator:
    tau = complex(tau)
    key = complex(round(tau.real, 12), round(tau.imag, 12))
    ev = _EVALUATOR_CACHE.get(key)
    if ev is None:
        ev = ThetaEvaluator(tau)
        _EVALUATOR_CACHE[key] = ev
    return ev


def theta(z, ev: ThetaEvaluator):
    return ev.theta(z)


def theta_dz(z, ev: ThetaEvaluator):
    return ev.theta_dz(z)


def theta_dz0(ev: ThetaEvaluator):
    return ev.theta_dz0()


def _check_param(mu, ev):
    if np.any(lattice_distance(mu, ev.tau) < PARAM_GUARD):
        raise TrivialBundleParameter(
            f"bundle parameter mu = {mu} lies on the lattice; no residue-one section"
        )


def _check_point(t, ev):
    if np.any(lattice_distance(t, ev.tau) < POLE_GUARD):
        raise PoleEvaluation(f"evaluation point t = {t} is on the pole divisor")


def kronecker_f(t, mu, ev: ThetaEvaluator):
    """F(t, mu) = theta'(0) theta(t+mu) / (theta(t) theta(mu))."""
    _check_param(mu, ev)
    _check_point(t, ev)
    scalar = np.ndim(t) == 0 and np.ndim(mu) == 0
    t = np.atleast_1d(np.asarray(t, dtype=np.complex128))
    mu = np.atleast_1d(np.asarray(mu, dtype=np.complex128))
    th_tm, _, _ = ev.theta_batch(t + mu, 0)
    th_t, _, _ = ev.theta_batch(t, 0)
    th_m, _, _ = ev.theta_batch(mu, 0)
    out = ev.theta_dz0() * th_tm / (th_t * th_m)
    return complex(out[0]) if scalar else out


def kronecker_f_dt(t, mu, ev: ThetaEvaluator):
    """dF/dt in logarithmic-derivative form F * (theta'/theta(t+mu) - theta'/theta(t))."""
    _check_param(mu, ev)
    _check_point(t, ev)
    scalar = np.ndim(t) == 0 and np.ndim(mu) == 0
    t = np.atleast_1d(np.asarray(t, dtype=np.complex128))
    mu = np.atleast_1d(np.asarray(mu, dtype=np.complex128))
    th_tm, th1_tm, _ = ev.theta_batch(t + mu, 1)
    th_t, th1_t, _ = ev.theta_batch(t, 1)
    th_m, _, _ = ev.theta_batch(mu, 0)
    f = ev.theta_dz0() * th_tm / (th_t * th_m)
    out = f * (th1_tm / th_tm - th1_t / th_t)
    return complex(out[0]) if scalar else out


class ExpKronecker:
    """G(u) = exp(2 pi i a u) F(u, mu): the descended residue-one section.

    Carries exact first and second derivatives; these feed the operator
    composition engine, where finite differences would lose too much accuracy
    near the poles.
    """

    __slots__ = ("ev", "mu", "a_exp", "_theta_mu", "_c")

    def __init__(self, ev: ThetaEvaluator, mu: complex, a_exp: float):
        _check_param(mu, ev)
        self.ev = ev
        self.mu = complex(mu)
        self.a_exp = a_exp
        self._theta_mu = complex(ev.theta_batch(np.array([mu]))[0][0])
        self._c = ev.theta_dz0() / self._theta_mu

    def _parts(self, u, nder):
        _check_point(u, self.ev)
        u = np.atleast_1d(np.asarray(u, dtype=np.complex128))
        th_um, th1_um, th2_um = self.ev.theta_batch(u + self.mu, nder)
        th_u, th1_u, th2_u = self.ev.theta_batch(u, nder)
        f = self._c * th_um / th_u
        e = np.exp(TWO_PI_I * self.a_exp * u)
        if nder == 0:
            return e * f, None, None
        rho_um = th1_um / th_um
        rho_u = th1_u / th_u
        ft = f * (rho_um - rho_u)
        ja = TWO_PI_I * self.a_exp
        g = e * f
        g1 = e * (ja * f + ft)
        if nder == 1:
            return g, g1, None
        rho1_um = th2_um / th_um - rho_um * rho_um
        rho1_u = th2_u / th_u - rho_u * rho_u
        ftt = ft * (rho_um - rho_u) + f * (rho1_um - rho1_u)
        g2 = e * (ja * ja * f + 2 * ja * ft + ftt)
        return g, g1, g2

    def value_batch(self, u, nder: int = 0):
        return self._parts(u, nder)

    def value(self, u):
        g, _, _ = self._parts(u, 0)
        return complex(g[0])

    def d1(self, u):
        _, g1, _ = self._parts(u, 1)
        return complex(g1[0])

    def d2(self, u):
        _, _, g2 = self._parts(u, 2)
        return complex(g2[0])
