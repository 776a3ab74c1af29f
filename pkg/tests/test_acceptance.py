"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
come.  Every tolerance is pinned here; nothing is calibrated at runtime.
"""

import numpy as np
import pytest

from dunklab.bundles import make_bundle, residue_at, section_f
from dunklab.connection import (DunklOpdamForm, DunklOpdamOperator,
                                build_connection, holomorphic_test_sections,
                                laurent_pole_coefficient, mixed_partial_residual,
                                EntireVectorSection)
from dunklab.monodromy import (FlatSectionSystem, braid_generators,
                               companion_system, compose_paths,
                               dual_consistency_check, hecke_check,
                               pick_basepoint, transport)
from dunklab.operators import (ParameterSet, check_equivariance,
                               check_reflection_sum_identities,
                               commutator_coefficients)
from dunklab.theta import ThetaEvaluator, get_evaluator, kronecker_f
from dunklab.torus import dual_action


def report(num, name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} ({name}): {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


# -- 1 -----------------------------------------------------------------------

def test_c01_theta_kronecker():
    worst_theta = worst_f = 0.0
    for tau in (1j, np.exp(2j * np.pi / 3), 2j):
        ev = get_evaluator(tau)
        rng = np.random.default_rng(42)
        z = rng.uniform(-1, 1, 20) + tau * rng.uniform(-1, 1, 20)
        th = ev.theta(z)
        r1 = np.abs(ev.theta(z + 1) + th)
        r2 = np.abs(ev.theta(z + tau)
                    + np.exp(-1j * np.pi * tau - 2j * np.pi * z) * th)
        scale = np.maximum(np.abs(th), 1e-30)
        worst_theta = max(worst_theta, float(np.max(r1 / scale)),
                          float(np.max((r2 / scale)
                                       / np.maximum(np.abs(np.exp(
                                           -1j * np.pi * tau - 2j * np.pi * z)), 1.0))))
        mu = 0.31 + 0.17j
        t = rng.uniform(0.1, 0.9, 20) + tau * rng.uniform(0.1, 0.9, 20)
        mus = np.full(20, mu)
        f = kronecker_f(t, mus, ev)
        worst_f = max(worst_f, float(np.max(np.abs(
            kronecker_f(t + 1, mus, ev) - f) / np.abs(f))))
        worst_f = max(worst_f, float(np.max(np.abs(
            kronecker_f(t + tau, mus, ev) * np.exp(2j * np.pi * mu) - f)
            / np.abs(f))))

    # residue extrapolation (phase-averaged Richardson)
    ev = get_evaluator(1j)
    mu = 0.37 + 0.21j
    means = []
    for r in (1e-3, 1e-4):
        ts = r * np.exp(2j * np.pi * np.arange(8) / 8)
        means.append(np.mean(ts * kronecker_f(ts, np.full(8, mu), ev)))
    res_err = abs((1e-3 * means[1] - 1e-4 * means[0]) / (1e-3 - 1e-4) - 1)

    q = np.exp(-2 * np.pi)
    eta = q ** (1 / 24) * np.prod([1 - q ** n for n in range(1, 80)])
    eta_err = abs(get_evaluator(1j).theta_dz0() - 2 * np.pi * eta ** 3)

    ok = worst_theta < 1e-10 and worst_f < 1e-10 and res_err < 1e-8 and eta_err < 1e-10
    report(1, "theta/kronecker", ok,
           f"theta qp {worst_theta:.1e} < 1e-10, F qp {worst_f:.1e} < 1e-10, "
           f"residue {res_err:.1e} < 1e-8, eta {eta_err:.1e} < 1e-10")


# -- 2 -----------------------------------------------------------------------

def test_c02_sections(cyclic2, cyclic4, symmetric2, symmetric3, wreath22):
    worst_auto = worst_res = worst_uni = 0.0
    npairs = 0
    for inst in (cyclic2, cyclic4, symmetric2, symmetric3, wreath22):
        bundle = inst.generic_bundle()
        torus = inst.torus
        pts = inst.points(10, seed=777)
        for h in inst.hypertori:
            for j in range(1, h.order):
                npairs += 1
                f = section_f(bundle, h, j)
                worst_res = max(worst_res, abs(residue_at(f, h) - 1.0))
                f2 = section_f(bundle, h, j,
                               base_shift=np.asarray(h.trans_vec_1)
                               + np.asarray(h.trans_vec_2))
                for z in pts:
                    fz = f(z)
                    scale = max(float(np.max(np.abs(fz))), 1.0)
                    worst_uni = max(worst_uni,
                                    float(np.max(np.abs(fz - f2(z)))) / scale)
                    for i in range(2 * torus.n):
                        pred = np.exp(2j * np.pi * f.automorphy[i]) * fz
                        got = f(z + torus.lattice_basis[i])
                        worst_auto = max(worst_auto,
                                         float(np.max(np.abs(got - pred))) / scale)
    ok = worst_auto < 1e-9 and worst_res < 1e-8 and worst_uni < 1e-9
    report(2, "sections", ok,
           f"{npairs} pairs: automorphy {worst_auto:.1e} < 1e-9, "
           f"residue {worst_res:.1e} < 1e-8, uniqueness {worst_uni:.1e} < 1e-9")


# -- 3 -----------------------------------------------------------------------

def test_c03_commutativity(symmetric3, wreath22):
    worst = {"second": 0.0, "first": 0.0, "zeroth": 0.0, "identity": 0.0}
    for inst in (symmetric3, wreath22):
        bundle = inst.generic_bundle()
        rng = np.random.default_rng(1234)
        params = ParameterSet(inst.hypertori,
                              {h.orbit_id: complex(rng.normal(), rng.normal()) * 0.35
                               for h in inst.hypertori})
        pts = inst.points(20, seed=888)
        n = inst.torus.n
        for a in range(n):
            for b in range(a + 1, n):
                rep = commutator_coefficients(bundle, params, np.eye(n)[a],
                                              np.eye(n)[b], pts, inst.hypertori)
                for gi, r in rep.items():
                    worst["second"] = max(worst["second"], r["second"])
                    worst["first"] = max(worst["first"], r["first"])
                    worst["zeroth"] = max(worst["zeroth"], r["zeroth"])
                    if gi == 0:
                        worst["identity"] = max(worst["identity"], r["zeroth"])
    ok = (worst["second"] < 1e-9 and worst["first"] < 1e-9
          and worst["zeroth"] < 1e-8 and worst["identity"] < 1e-10)
    report(3, "commutativity", ok,
           f"second {worst['second']:.1e} < 1e-9, first {worst['first']:.1e} < 1e-9, "
           f"phi_g {worst['zeroth']:.1e} < 1e-8, phi_1 {worst['identity']:.1e} < 1e-10")


# -- 4 -----------------------------------------------------------------------

def test_c04_equivariance_and_identities(symmetric3, wreath22):
    worst_eq = 0.0
    worst = {"i": 0.0, "ii": 0.0, "iii": 0.0, "iv": 0.0}
    for inst in (symmetric3, wreath22):
        bundle = inst.generic_bundle()
        params = inst.params(0.3 - 0.12j)
        pts = inst.points(8, seed=999)
        n = inst.torus.n
        for w in inst.group.elements[1:]:
            for a in range(n):
                worst_eq = max(worst_eq, check_equivariance(
                    bundle, params, w, np.eye(n)[a], pts, inst.hypertori))
        res = check_reflection_sum_identities(bundle, params, inst.hypertori, pts)
        for k in worst:
            worst[k] = max(worst[k], res[k])
    ok = (worst_eq < 1e-9 and worst["i"] < 1e-9 and worst["ii"] < 1e-8
          and worst["iii"] < 1e-9 and worst["iv"] < 1e-9)
    report(4, "equivariance/identities", ok,
           f"equivariance {worst_eq:.1e} < 1e-9, (i) {worst['i']:.1e} < 1e-9, "
           f"(ii) {worst['ii']:.1e} < 1e-8, (iii) {worst['iii']:.1e} < 1e-9, "
           f"(iv) {worst['iv']:.1e} < 1e-9")


# -- 5 -----------------------------------------------------------------------

def test_c05_flatness(cyclic2, symmetric2):
    from dunklab.cli import contractible_rectangles
    worst_loop = worst_mixed = 0.0
    for inst in (cyclic2, symmetric2):
        bundle = inst.generic_bundle()
        params = inst.params(0.25 + 0.1j)
        acf = build_connection(bundle, params, inst.group, inst.hypertori)
        sysf = FlatSectionSystem(acf)
        size = len(inst.group)
        for path in contractible_rectangles(inst.torus, inst.group,
                                            inst.hypertori, seed=4242, count=5):
            mono = transport(sysf, path)
            worst_loop = max(worst_loop,
                             float(np.max(np.abs(mono.matrix - np.eye(size)))))
        sec = EntireVectorSection(size, inst.torus.n, np.random.default_rng(5))
        n = inst.torus.n
        for z in inst.points(6, seed=4243):
            u = np.eye(n)[0]
            v = np.eye(n)[n - 1] if n > 1 else np.array([1j])
            worst_mixed = max(worst_mixed,
                              mixed_partial_residual(acf, u, v, sec, z))
    ok = worst_loop < 1e-7 and worst_mixed < 1e-7
    report(5, "flatness", ok,
           f"contractible loops {worst_loop:.1e} < 1e-7, "
           f"mixed partials {worst_mixed:.1e} < 1e-7")


# -- 6 -----------------------------------------------------------------------

def test_c06_holomorphy(cyclic2, cyclic4, symmetric2):
    worst = 0.0
    control = np.inf
    cases = 0
    for inst in (cyclic2, cyclic4, symmetric2):
        bundle = inst.generic_bundle()
        eta = complex(inst.torus.lattice_basis[1, 0])
        m_comp = -bundle.multiplier_exponents
        orbits_seen = set()
        for h in inst.hypertori:
            if h.orbit_id in orbits_seen:
                continue
            orbits_seen.add(h.orbit_id)
            contour = [h.generic_point() + 1e-2 * np.exp(1j * t) * h.transverse_dir
                       for t in np.linspace(0, 2 * np.pi, 12)]
            secs = holomorphic_test_sections(m_comp, eta, 3, seed=606,
                                             avoid_points=contour)
            v = h.transverse_dir / np.max(np.abs(h.transverse_dir))
            for j in range(1, h.order):
                # isolate each exponent so every (H, j) term is exercised
                params = ParameterSet(inst.hypertori, {
                    oid: [0.25 if (oid == h.orbit_id and jj == j) else 0.0
                          for jj in range(1, order + 1)][:order - 1]
                    for oid, order in {hh.orbit_id: hh.order
                                       for hh in inst.hypertori}.items()})
                acf = build_connection(bundle, params, inst.group, inst.hypertori)
                phi_op = DunklOpdamOperator(acf, params,
                                            DunklOpdamForm(inst.hypertori), 0)
                phi2_op = DunklOpdamOperator(
                    acf, params, DunklOpdamForm(inst.hypertori, scale=2.0), 0)
                for sec in secs:
                    cases += 1

                    def out(z, _s=sec):
                        return phi_op(v, _s, z)

                    def out_bad(z, _s=sec):
                        return phi2_op(v, _s, z)

                    worst = max(worst, abs(laurent_pole_coefficient(out, h)))
                    control = min(control, abs(laurent_pole_coefficient(out_bad, h)))
    ok = worst < 1e-6 and control > 1e-2
    report(6, "holomorphy", ok,
           f"{cases} cases: |a_-1| {worst:.1e} < 1e-6, "
           f"negative control {control:.1e} > 1e-2")


# -- 7 -----------------------------------------------------------------------

def _monodromy_setup(inst, params, m=None, seed=77):
    bundle = make_bundle(m if m is not None else inst.generic_bundle().multiplier_exponents,
                         np.zeros(inst.torus.n, complex), inst.group)
    x = pick_basepoint(inst.torus, inst.group, inst.hypertori, seed=seed)
    gens = braid_generators(inst.group, inst.torus, inst.hypertori, x,
                            seed=seed + 1)
    acf = build_connection(bundle, params, inst.group, inst.hypertori)
    return bundle, gens, FlatSectionSystem(acf)


def test_c07_hecke_relations(cyclic2, cyclic4, symmetric2):
    worst_eig2 = worst_poly2 = worst_sum = 0.0
    for c in (0.1, 0.3 + 0.2j):
        params = ParameterSet.constant(cyclic2.hypertori, c)
        _, gens, sysf = _monodromy_setup(cyclic2, params,
                                         m=np.array([0.287, 0.643]))
        for d in hecke_check(params, sysf, gens, cyclic2.hypertori):
            worst_eig2 = max(worst_eig2, d.matched_error)
            worst_poly2 = max(worst_poly2, d.polynomial_residual)
            worst_sum = max(worst_sum, abs(sum(d.exponents)))

    params = ParameterSet.constant(symmetric2.hypertori, 0.25)
    _, gens, sysf = _monodromy_setup(symmetric2, params, seed=31)
    for d in hecke_check(params, sysf, gens, symmetric2.hypertori):
        worst_eig2 = max(worst_eig2, d.matched_error)
        worst_poly2 = max(worst_poly2, d.polynomial_residual)
        worst_sum = max(worst_sum, abs(sum(d.exponents)))

    # cyclic(4): independent parameters on the two order-4 orbits and the
    # order-2 orbit
    rng = np.random.default_rng(9)
    pv = {oid: [complex(rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1))
                for _ in range(order - 1)]
          for oid, order in sorted({h.orbit_id: h.order
                                    for h in cyclic4.hypertori}.items())}
    params4 = ParameterSet(cyclic4.hypertori, pv)
    _, gens4, sysf4 = _monodromy_setup(cyclic4, params4,
                                       m=np.array([0.287, 0.643]))
    worst_poly4 = 0.0
    for d in hecke_check(params4, sysf4, gens4, cyclic4.hypertori):
        worst_poly4 = max(worst_poly4, d.polynomial_residual)
        worst_sum = max(worst_sum, abs(sum(d.exponents)))

    ok = (worst_eig2 < 1e-5 and worst_poly2 < 1e-5 and worst_poly4 < 1e-4
          and worst_sum < 1e-12)
    report(7, "hecke relations", ok,
           f"eigenvalues {worst_eig2:.1e} < 1e-5, polynomial {worst_poly2:.1e} "
           f"< 1e-5, cyclic(4) polynomial {worst_poly4:.1e} < 1e-4, "
           f"exponent sums {worst_sum:.1e} < 1e-12")


# -- 8 -----------------------------------------------------------------------

def test_c08_degeneration(all_families):
    worst_tn = worst_tr = worst_cmp = 0.0
    for inst in all_families:
        params = ParameterSet.zero(inst.hypertori)
        bundle, gens, sysf = _monodromy_setup(inst, params, seed=97)
        size = len(inst.group)
        for h in inst.hypertori:
            t = transport(sysf, gens["hypertorus"][h.index]).matrix
            worst_tn = max(worst_tn, float(np.max(np.abs(
                np.linalg.matrix_power(t, h.order) - np.eye(size)))))
        for p in gens["translation"]:
            got = transport(sysf, p).matrix
            pred = np.diag([np.exp(2j * np.pi * (dual_action(
                w, bundle.multiplier_exponents) @ p.end_gamma))
                for w in inst.group])
            worst_tr = max(worst_tr, float(np.max(np.abs(got - pred))))
        glist = gens["translation"] + list(gens["hypertorus"].values())
        mats = [transport(sysf, g).matrix for g in glist]
        rng = np.random.default_rng(13)
        for _ in range(10):
            i, j = rng.integers(0, len(glist), 2)
            comp = compose_paths(inst.group, inst.torus, glist[i], glist[j])
            worst_cmp = max(worst_cmp, float(np.max(np.abs(
                transport(sysf, comp).matrix - mats[i] @ mats[j]))))
    ok = worst_tn < 1e-6 and worst_tr < 1e-8 and worst_cmp < 1e-6
    report(8, "degeneration", ok,
           f"T^n - 1 {worst_tn:.1e} < 1e-6, translations {worst_tr:.1e} < 1e-8, "
           f"composition {worst_cmp:.1e} < 1e-6")


# -- 9 -----------------------------------------------------------------------

def test_c09_duality(cyclic2):
    params = ParameterSet.constant(cyclic2.hypertori, 0.2 + 0.1j)
    bundle, gens, sysf = _monodromy_setup(cyclic2, params,
                                          m=np.array([0.287, 0.643]))
    comp = companion_system(bundle, params, cyclic2.group, cyclic2.hypertori)
    glist = gens["translation"] + list(gens["hypertorus"].values())
    pi_mats = {k: transport(sysf, g).matrix for k, g in enumerate(glist)}
    xi_mats = {k: transport(comp, g).matrix for k, g in enumerate(glist)}
    rng = np.random.default_rng(14)
    words = [tuple(int(x) for x in rng.integers(0, len(glist), rng.integers(1, 5)))
             for _ in range(10)]
    res = dual_consistency_check(pi_mats, xi_mats, words)
    ok = max(res) < 1e-5
    report(9, "duality", ok, f"10 words, trace residual {max(res):.1e} < 1e-5")


# -- 10 ----------------------------------------------------------------------

def test_c10_conjecture_evidence(cyclic2, symmetric2):
    from dunklab.cli import LabConfig, run_monodromy
    worst_gap = np.inf
    dims = []
    ranks_ok = True
    for name, order_or_rank in (("cyclic", 2), ("symmetric", 2)):
        key = "order" if name == "cyclic" else "rank"
        cfg = LabConfig.from_dict({"family": name, key: 2,
                                   "couplings": [0.2, 0.0], "seed": 4141})
        rep, code = run_monodromy(cfg, suites=["irreducibility", "probe"])
        dims.append(rep["monodromy"]["irreducibility"]["commutant_dimension"])
        worst_gap = min(worst_gap, rep["monodromy"]["irreducibility"]["gap"])
        ranks_ok &= rep["monodromy"]["probe"]["full"]
    ok = all(d == 1 for d in dims) and worst_gap > 1e3 and ranks_ok
    report(10, "conjecture evidence", ok,
           f"commutant dims {dims} == 1, gap {worst_gap:.1e} > 1e3, "
           f"parameter Jacobian full rank: {ranks_ok}")


# -- 11 ----------------------------------------------------------------------

def test_c11_robustness(cyclic2):
    params = ParameterSet.constant(cyclic2.hypertori, 0.22 + 0.13j)
    bundle, gens, sysf = _monodromy_setup(cyclic2, params,
                                          m=np.array([0.287, 0.643]))
    worst = 0.0
    ok_est = True
    for path in [gens["translation"][0], gens["hypertorus"][0]]:
        base = transport(sysf, path)
        finer = transport(sysf, path, rtol=5e-11, atol=5e-13)
        delta = float(np.max(np.abs(finer.matrix - base.matrix)))
        ok_est &= delta <= base.error_estimate
        worst = max(worst, delta)

    ev = get_evaluator(1j)
    ev2 = ThetaEvaluator(1j, min_terms=2 * ev.truncation)
    rng = np.random.default_rng(15)
    z = rng.uniform(-1, 1, 40) + 1j * rng.uniform(-1, 1, 40)
    trunc = float(np.max(np.abs(ev.theta(z) - ev2.theta(z)) / np.abs(ev.theta(z))))
    ok = ok_est and trunc < 1e-13
    report(11, "robustness", ok,
           f"tolerance-halving shift {worst:.1e} within reported estimates: "
           f"{ok_est}; truncation doubling {trunc:.1e} < 1e-13")
