"""Configuration, orchestration and JSON reporting.

One structured JSON config file describes a family instance (group, lattice,
bundle multipliers, connection, couplings, seed); the subcommands run the
verification or monodromy suites against it and emit a deterministic report:
identical config and seed give byte-identical report bodies, with timestamps
and runtimes segregated into a header that is excluded from the content hash.

Exit codes: 0 all residuals pass, 1 residual failure, 2 config error,
3 numeric failure inside the integrator.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bundles import make_bundle, residue_at, section_f
from .connection import (DunklOpdamForm, DunklOpdamOperator, build_connection,
                         holomorphic_test_sections, laurent_pole_coefficient,
                         mixed_partial_residual, EntireVectorSection)
from .errors import ConfigError, DunklabError, StepUnderflow, ToleranceNotMet
from .families import (cyclic_family, custom_family, symmetric_family,
                       wreath_family, BUILTIN_FAMILIES)
from .monodromy import (FlatSectionSystem, LineSeg, PathSpec, braid_generators,
                        companion_system, compose_paths, dual_consistency_check,
                        hecke_check, irreducibility_evidence,
                        parameter_family_probe, pick_basepoint, transport)
from .operators import (ParameterSet, check_equivariance,
                        check_reflection_sum_identities, commutator_coefficients,
                        regular_points)
from .torus import dual_action, enumerate_hypertori

VERIFY_SUITES = ("sections", "commutativity", "equivariance", "lemma-inv",
                 "flatness", "holomorphy")
MONODROMY_SUITES = ("hecke", "degeneration", "duality", "irreducibility", "probe")

ORIENTATION_NOTE = ("hypertorus loops sweep +2pi/n_H counterclockwise in the "
                    "normalized transverse coordinate (Im tau > 0); their n_H-th "
                    "power is the full counterclockwise circle")


def _cplx(pair):
    if np.isscalar(pair):
        return complex(pair)
    if len(pair) != 2:
        raise ConfigError(f"complex values are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _cplx_out(z):
    z = complex(z)
    return [z.real, z.imag]


@dataclass
class LabConfig:
    family: str
    order: int | None = None          # cyclic / wreath rotation order
    rank: int | None = None           # number of torus factors
    lattice_tau: complex | None = None
    generators: list | None = None    # custom family
    lattice_basis: list | None = None
    multipliers: list | None = None
    connection: list | None = None
    couplings: object = None          # scalar, list, or {orbit: list}
    seed: int = 20240
    tolerance_scale: float = 1.0
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "LabConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "family" not in raw:
            raise ConfigError("config needs a 'family' key")
        cfg = cls(**raw)
        if cfg.lattice_tau is not None:
            cfg.lattice_tau = _cplx(cfg.lattice_tau)
        return cfg

    def to_jsonable(self):
        out = {"family": self.family, "seed": self.seed,
               "tolerance_scale": self.tolerance_scale}
        if self.order is not None:
            out["order"] = self.order
        if self.rank is not None:
            out["rank"] = self.rank
        if self.lattice_tau is not None:
            out["lattice_tau"] = _cplx_out(self.lattice_tau)
        if self.multipliers is not None:
            out["multipliers"] = [float(x) for x in self.multipliers]
        if self.connection is not None:
            out["connection"] = [_cplx_out(_cplx(p)) for p in self.connection]
        if self.couplings is not None:
            out["couplings"] = self.couplings
        if self.tolerances:
            out["tolerances"] = self.tolerances
        return out


@dataclass
class Instance:
    config: LabConfig
    torus: object
    group: object
    hypertori: list
    bundle: object
    params: ParameterSet
    rng_seed: int


def parse_family_name(name: str):
    """'cyclic(4)', 'symmetric(3)', 'wreath(2,2)' -> config fields."""
    name = name.strip().lower().replace(" ", "")
    for fam in ("cyclic", "symmetric", "wreath"):
        if name.startswith(fam + "(") and name.endswith(")"):
            args = name[len(fam) + 1:-1].split(",")
            try:
                nums = [int(a) for a in args]
            except ValueError:
                raise ConfigError(f"cannot parse family spec {name!r}")
            if fam == "cyclic" and len(nums) == 1:
                return {"family": "cyclic", "order": nums[0]}
            if fam == "symmetric" and len(nums) == 1:
                return {"family": "symmetric", "rank": nums[0]}
            if fam == "wreath" and len(nums) == 2:
                return {"family": "wreath", "rank": nums[0], "order": nums[1]}
    raise ConfigError(f"unrecognized family {name!r}")


def _build_group(cfg: LabConfig):
    fam = cfg.family
    if fam == "cyclic":
        if cfg.order is None:
            raise ConfigError("cyclic family needs 'order'")
        return cyclic_family(cfg.order, cfg.lattice_tau)
    if fam == "symmetric":
        if cfg.rank is None:
            raise ConfigError("symmetric family needs 'rank'")
        return symmetric_family(cfg.rank, cfg.lattice_tau)
    if fam == "wreath":
        if cfg.rank is None or cfg.order is None:
            raise ConfigError("wreath family needs 'rank' and 'order'")
        return wreath_family(cfg.rank, cfg.order, cfg.lattice_tau)
    if fam == "custom":
        if not cfg.generators or not cfg.lattice_basis:
            raise ConfigError("custom family needs 'generators' and 'lattice_basis'")
        gens = [np.array([[_cplx(x) for x in row] for row in g]) for g in cfg.generators]
        basis = np.array([[_cplx(x) for x in row] for row in cfg.lattice_basis])
        return custom_family(gens, basis)
    raise ConfigError(f"unknown family kind {fam!r}")


def _seeded_multipliers(group, hypertori, seed):
    """Generic stabilizer-free multipliers with all descents well clear of
    the trivial locus, for every component bundle."""
    from .bundles import descent_parameters
    from .operators import bundle_pullback_cached
    rng = np.random.default_rng(seed)
    n2 = 2 * group.torus.n
    for _ in range(64):
        m = rng.uniform(0.08, 0.92, n2)
        bundle = make_bundle(m, None, group)
        if not bundle.stabilizer_free:
            continue
        ok = True
        for w in group:
            bw = bundle_pullback_cached(w, bundle)
            for h in hypertori:
                for j in range(1, h.order):
                    try:
                        d = descent_parameters(bw, h, j)
                    except DunklabError:
                        ok = False
                        break
                    frac = np.array([d.a - round(d.a), d.b - round(d.b)])
                    if np.max(np.abs(frac)) < 1e-3:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return m
    raise ConfigError("could not seed generic multipliers; supply 'multipliers'")


def build_instance(cfg: LabConfig) -> Instance:
    torus, group = _build_group(cfg)
    hypertori = enumerate_hypertori(group, torus, seed=cfg.seed)
    if cfg.multipliers is not None:
        m = np.asarray([float(x) for x in cfg.multipliers])
        if m.shape != (2 * torus.n,):
            raise ConfigError(f"multipliers must have length {2 * torus.n}")
    else:
        m = _seeded_multipliers(group, hypertori, cfg.seed)
    beta = np.zeros(torus.n, dtype=np.complex128) if cfg.connection is None \
        else np.array([_cplx(p) for p in cfg.connection])
    if beta.shape != (torus.n,):
        raise ConfigError(f"connection covector must have length {torus.n}")
    bundle = make_bundle(m, beta, group)

    orbit_orders = {}
    for h in hypertori:
        orbit_orders.setdefault(h.orbit_id, h.order)
    couplings = cfg.couplings
    if couplings is None:
        couplings = [0.0, 0.0]
    if isinstance(couplings, dict):
        per_orbit = {}
        for key, vals in couplings.items():
            oid = int(key)
            if oid not in orbit_orders:
                raise ConfigError(f"coupling for unknown orbit {oid}")
            per_orbit[oid] = [_cplx(v) for v in vals]
    else:
        c = _cplx(couplings)
        per_orbit = {oid: [c] * (order - 1) for oid, order in orbit_orders.items()}
    params = ParameterSet(hypertori, per_orbit)
    return Instance(cfg, torus, group, hypertori, bundle, params, cfg.seed)


def family_summary(inst: Instance):
    rows = []
    for h in inst.hypertori:
        rows.append({
            "index": h.index,
            "orbit": h.orbit_id,
            "order": h.order,
            "base_point": [_cplx_out(z) for z in h.base_point],
            "normal": [_cplx_out(z) for z in h.normal_covector],
            "scale": _cplx_out(h.scale),
            "modulus": _cplx_out(h.modulus),
        })
    return {
        "group_order": len(inst.group),
        "dimension": inst.torus.n,
        "hypertori": rows,
        "component_ordering": "group elements in closure order, identity first",
        "orientation": ORIENTATION_NOTE,
    }


# ---------------------------------------------------------------------------
# residual bookkeeping

class ResidualTable:
    def __init__(self, scale: float, overrides: dict):
        self.scale = scale
        self.overrides = overrides
        self.entries = {}

    def add(self, suite, name, value, tol, mode="max"):
        tol = float(self.overrides.get(f"{suite}.{name}", tol)) * self.scale
        value = float(value)
        passed = value <= tol if mode == "max" else value >= tol
        self.entries.setdefault(suite, {})[name] = {
            "value": value, "tolerance": tol,
            "mode": mode, "pass": bool(passed),
        }
        return passed

    @property
    def all_pass(self):
        return all(e["pass"] for s in self.entries.values() for e in s.values())


def _finish_report(body: dict, t_start: float) -> dict:
    blob = json.dumps(body, sort_keys=True).encode()
    return {
        "header": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "runtime_ms": int(1000 * (time.time() - t_start)),
            "content_hash": hashlib.sha256(blob).hexdigest(),
        },
        **body,
    }


# ---------------------------------------------------------------------------
# verify suites

def run_verify(cfg: LabConfig, suites=None):
    t_start = time.time()
    suites = list(suites or VERIFY_SUITES)
    for s in suites:
        if s not in VERIFY_SUITES:
            raise ConfigError(f"unknown verify suite {s!r}; choose from {VERIFY_SUITES}")
    inst = build_instance(cfg)
    table = ResidualTable(cfg.tolerance_scale, cfg.tolerances)
    return _with_error_entries(_run_verify_suites, cfg, inst, table, suites, t_start)


def _with_error_entries(runner, cfg, inst, table, suites, t_start):
    """Propagated module errors become structured report entries (numeric
    integrator failures keep their own exit path)."""
    errors = {}
    try:
        extra = runner(cfg, inst, table, suites)
    except (ConfigError, StepUnderflow, ToleranceNotMet):
        raise  # these carry their own exit codes
    except DunklabError as exc:
        errors[type(exc).__name__] = str(exc)
        extra = {}
    body = {
        "config": cfg.to_jsonable(),
        "versions": _versions(),
        "seed": cfg.seed,
        "family": family_summary(inst),
        "suites": suites,
        "residuals": table.entries,
        "pass": table.all_pass and not errors,
    }
    if errors:
        body["errors"] = errors
    body.update(extra)
    return _finish_report(body, t_start), (0 if body["pass"] else 1)


def _run_verify_suites(cfg: LabConfig, inst: Instance, table: ResidualTable, suites):
    torus, group, hs = inst.torus, inst.group, inst.hypertori
    bundle, params = inst.bundle, inst.params
    pts = regular_points(torus, hs, 20, seed=cfg.seed + 1)
    n = torus.n

    if "sections" in suites:
        worst_auto = worst_res = worst_uni = 0.0
        for h in hs:
            for j in range(1, h.order):
                f = section_f(bundle, h, j)
                worst_res = max(worst_res, abs(residue_at(f, h) - 1.0))
                f_shift = section_f(bundle, h, j,
                                    base_shift=np.asarray(h.trans_vec_1)
                                    + np.asarray(h.trans_vec_2))
                for z in pts[:10]:
                    fz = f(z)
                    scale = max(float(np.max(np.abs(fz))), 1.0)
                    worst_uni = max(worst_uni,
                                    float(np.max(np.abs(fz - f_shift(z)))) / scale)
                    for i in range(2 * n):
                        pred = np.exp(2j * np.pi * f.automorphy[i]) * fz
                        got = f(z + torus.lattice_basis[i])
                        worst_auto = max(worst_auto,
                                         float(np.max(np.abs(got - pred))) / scale)
        table.add("sections", "automorphy", worst_auto, 1e-9)
        table.add("sections", "residue", worst_res, 1e-8)
        table.add("sections", "uniqueness", worst_uni, 1e-9)

    if "commutativity" in suites:
        w2 = w1 = w0 = wid = 0.0
        # dimension 1 has no independent pair; (v, iv) still drives the whole
        # composition engine even though cancellation is then structural
        dir_pairs = [(np.eye(n)[a], np.eye(n)[b])
                     for a in range(n) for b in range(a + 1, n)] \
            or [(np.eye(1)[0], 1j * np.eye(1)[0])]
        for u, v in dir_pairs:
            rep = commutator_coefficients(bundle, params, u, v, pts, hs)
            for gi, r in rep.items():
                w2 = max(w2, r["second"])
                w1 = max(w1, r["first"])
                w0 = max(w0, r["zeroth"])
                if gi == 0:
                    wid = max(wid, r["zeroth"])
        table.add("commutativity", "second_order", w2, 1e-9)
        table.add("commutativity", "first_order", w1, 1e-9)
        table.add("commutativity", "zeroth_order", w0, 1e-8)
        table.add("commutativity", "identity_coefficient", wid, 1e-10)

    if "equivariance" in suites:
        worst = 0.0
        for w in group.elements[1:]:
            for a in range(n):
                worst = max(worst, check_equivariance(bundle, params, w,
                                                      np.eye(n)[a], pts[:8], hs))
        table.add("equivariance", "conjugation", worst, 1e-9)

    if "lemma-inv" in suites:
        res = check_reflection_sum_identities(bundle, params, hs, pts[:8])
        table.add("lemma-inv", "part_i", res["i"], 1e-9)
        table.add("lemma-inv", "part_ii", res["ii"], 1e-8)
        table.add("lemma-inv", "part_iii", res["iii"], 1e-9)
        table.add("lemma-inv", "part_iv", res["iv"], 1e-9)

    if "flatness" in suites or "holomorphy" in suites:
        acf = build_connection(bundle, params, group, hs)

    if "flatness" in suites:
        sysf = FlatSectionSystem(acf)
        worst = 0.0
        for path in contractible_rectangles(torus, group, hs, cfg.seed + 2, count=5):
            mono = transport(sysf, path)
            worst = max(worst, float(np.max(np.abs(mono.matrix - np.eye(len(group))))))
        table.add("flatness", "contractible_loops", worst, 1e-7)
        sec = EntireVectorSection(len(group), n, np.random.default_rng(cfg.seed + 3))
        worst = 0.0
        for z in pts[:6]:
            for a in range(n):
                for b in range(n):
                    if a < b or (n == 1 and a == b == 0):
                        u = np.eye(n)[a]
                        v = 1j * np.eye(n)[b] if n == 1 else np.eye(n)[b]
                        worst = max(worst, mixed_partial_residual(acf, u, v, sec, z))
        table.add("flatness", "mixed_partials", worst, 1e-7)

    if "holomorphy" in suites:
        phi_op = DunklOpdamOperator(acf, params, DunklOpdamForm(hs), 0)
        phi2_op = DunklOpdamOperator(acf, params, DunklOpdamForm(hs, scale=2.0), 0)
        worst = 0.0
        control = np.inf
        for h in hs:
            contour = [h.generic_point() + 1e-2 * np.exp(1j * t) * h.transverse_dir
                       for t in np.linspace(0, 2 * np.pi, 12)]
            m_comp = -dual_action(group.identity, bundle.multiplier_exponents)
            secs = holomorphic_test_sections(m_comp, _family_eta(inst), 3,
                                             seed=cfg.seed + 7, avoid_points=contour)
            v = h.transverse_dir / np.max(np.abs(h.transverse_dir))
            coup = sum(abs(params.coupling(h, j)) for j in range(1, h.order))
            if coup == 0:
                continue
            row_v = abs((h.normal_covector / h.scale) @ v)
            for sec in secs:
                def out(z, _s=sec):
                    return phi_op(v, _s, z)

                def out_bad(z, _s=sec):
                    return phi2_op(v, _s, z)

                worst = max(worst, abs(laurent_pole_coefficient(out, h)))
                # doubled form leaves a pole of size ~ sum_j C(H,j) psi(p);
                # normalize so the sensitivity check is parameter-independent
                scale = coup * abs(sec.val(h.generic_point())) * row_v
                control = min(control,
                              abs(laurent_pole_coefficient(out_bad, h)) / scale)
        table.add("holomorphy", "pole_cancellation", worst, 1e-6)
        if not params.is_zero:
            table.add("holomorphy", "negative_control", control, 1e-2, mode="min")

    return {}


def contractible_rectangles(torus, group, hypertori, seed, count=5,
                            size=0.11, interior_clearance=0.03):
    """Seeded closed rectangles whose spanned surface stays clear of every
    hypertorus, so the enclosed loop is contractible in the regular locus."""
    rng = np.random.default_rng(seed)
    n = torus.n
    out = []
    guard = 0
    grid = np.linspace(0.0, 1.0, 9)
    while len(out) < count:
        guard += 1
        if guard > 3000:
            raise ConfigError("could not seed contractible rectangles")
        z0 = torus.random_point(rng)
        d1 = (rng.normal(size=n) + 1j * rng.normal(size=n)) * size / np.sqrt(n)
        d2 = (rng.normal(size=n) + 1j * rng.normal(size=n)) * size / np.sqrt(n)
        surface = np.array([z0 + s * d1 + t * d2 for s in grid for t in grid])
        if any(float(np.min(h.distance(surface))) < interior_clearance
               for h in hypertori):
            continue
        segs = [LineSeg(z0, z0 + d1), LineSeg(z0 + d1, z0 + d1 + d2),
                LineSeg(z0 + d1 + d2, z0 + d2), LineSeg(z0 + d2, z0)]
        path = PathSpec(segs, 0, np.zeros(2 * n, dtype=np.int64), z0)
        try:
            path.validate(group, torus, hypertori, interior_clearance)
        except ValueError:
            continue
        out.append(path)
    return out


def _family_eta(inst: Instance) -> complex:
    basis = inst.torus.lattice_basis
    n = inst.torus.n
    eta = complex(basis[1, 0])
    want = np.zeros((2 * n, n), dtype=np.complex128)
    for k in range(n):
        want[2 * k, k] = 1.0
        want[2 * k + 1, k] = eta
    if np.max(np.abs(basis - want)) > 1e-12:
        raise ConfigError("holomorphy suite requires a product lattice "
                          "(generators e_k, eta e_k)")
    return eta


# ---------------------------------------------------------------------------
# monodromy suites

def run_monodromy(cfg: LabConfig, suites=None, n_words: int = 10):
    t_start = time.time()
    suites = list(suites or ("hecke", "degeneration", "duality", "irreducibility"))
    for s in suites:
        if s not in MONODROMY_SUITES:
            raise ConfigError(f"unknown monodromy suite {s!r}; choose from {MONODROMY_SUITES}")
    inst = build_instance(cfg)
    table = ResidualTable(cfg.tolerance_scale, cfg.tolerances)

    def runner(cfg, inst, table, suites):
        return _run_monodromy_suites(cfg, inst, table, suites, n_words)

    return _with_error_entries(runner, cfg, inst, table, suites, t_start)


def _run_monodromy_suites(cfg: LabConfig, inst: Instance, table: ResidualTable,
                          suites, n_words: int):
    torus, group, hs = inst.torus, inst.group, inst.hypertori
    bundle, params = inst.bundle, inst.params

    basepoint = pick_basepoint(torus, group, hs, seed=cfg.seed + 11)
    gens = braid_generators(group, torus, hs, basepoint, seed=cfg.seed + 12)
    glist = gens["translation"] + [gens["hypertorus"][h.index] for h in hs]

    mono_out = {"basepoint": [_cplx_out(z) for z in basepoint]}
    acf = build_connection(bundle, params, group, hs)
    sysf = FlatSectionSystem(acf)

    if "hecke" in suites:
        data = hecke_check(params, sysf, gens, hs)
        rows = []
        worst_sum = 0.0
        for d in data:
            taus = d.exponents
            worst_sum = max(worst_sum, abs(sum(taus)))
            rows.append({
                "orbit": d.orbit_id, "order": d.order,
                "tau": [_cplx_out(t) for t in taus],
                "predicted": [_cplx_out(p) for p in d.predicted],
                "observed": [_cplx_out(o) for o in d.observed],
                "multiplicities": d.multiplicities,
                "eigenvalue_error": d.matched_error,
                "polynomial_residual": d.polynomial_residual,
                "det_residual": d.det_residual,
            })
            tol_poly = 1e-5 if d.order <= 2 else 1e-4
            table.add("hecke", f"orbit{d.orbit_id}_eigenvalues", d.matched_error,
                      1e-5 if d.order <= 2 else 1e-4)
            table.add("hecke", f"orbit{d.orbit_id}_polynomial", d.polynomial_residual,
                      tol_poly)
            table.add("hecke", f"orbit{d.orbit_id}_det", d.det_residual, 1e-5)
        table.add("hecke", "exponent_sum", worst_sum, 1e-12)
        mono_out["hecke"] = rows

    if "degeneration" in suites:
        params0 = ParameterSet.zero(hs)
        acf0 = build_connection(bundle, params0, group, hs)
        sys0 = FlatSectionSystem(acf0)
        worst_tn = 0.0
        for h in hs:
            t_mat = transport(sys0, gens["hypertorus"][h.index]).matrix
            worst_tn = max(worst_tn, float(np.max(np.abs(
                np.linalg.matrix_power(t_mat, h.order) - np.eye(len(group))))))
        table.add("degeneration", "loop_power_identity", worst_tn, 1e-6)
        worst_tr = 0.0
        for p in gens["translation"]:
            d_mat = transport(sys0, p).matrix
            pred = np.diag(np.exp(2j * np.pi * (acf0.component_multipliers
                                                @ p.end_gamma))
                           * np.exp(-(acf0.beta_rows @ (p.end_gamma
                                                        @ torus.lattice_basis))))
            worst_tr = max(worst_tr, float(np.max(np.abs(d_mat - pred))))
        table.add("degeneration", "translation_multipliers", worst_tr, 1e-8)
        rng = np.random.default_rng(cfg.seed + 13)
        worst_cmp = 0.0
        mats0 = [transport(sys0, p).matrix for p in glist]
        for _ in range(10):
            i, j = rng.integers(0, len(glist), 2)
            comp = transport(sys0, compose_paths(group, torus, glist[i], glist[j])).matrix
            worst_cmp = max(worst_cmp, float(np.max(np.abs(comp - mats0[i] @ mats0[j]))))
        table.add("degeneration", "composition_law", worst_cmp, 1e-6)

    pi_mats = None
    if "duality" in suites or "irreducibility" in suites:
        pi_mats = {k: transport(sysf, p) for k, p in enumerate(glist)}

    if "duality" in suites:
        comp_sys = companion_system(bundle, params, group, hs)
        xi_mats = {k: transport(comp_sys, p).matrix for k, p in enumerate(glist)}
        rng = np.random.default_rng(cfg.seed + 14)
        words = [tuple(int(i) for i in rng.integers(0, len(glist), rng.integers(1, 5)))
                 for _ in range(n_words)]
        res = dual_consistency_check({k: v.matrix for k, v in pi_mats.items()},
                                     xi_mats, words)
        table.add("duality", "trace_match", max(res), 1e-5)
        mono_out["duality"] = {"words": [list(w) for w in words], "residuals": res}

    if "irreducibility" in suites:
        dim, gap, sv = irreducibility_evidence([v.matrix for v in pi_mats.values()])
        mono_out["irreducibility"] = {"commutant_dimension": dim, "gap": gap}
        table.add("irreducibility", "commutant_dimension", dim, 1.0 + 1e-9)
        table.add("irreducibility", "gap_ratio", min(gap, 1e18), 1e3, mode="min")

    if "probe" in suites:
        mono_out["probe"] = _run_probe(cfg, inst, table)

    if pi_mats is not None:
        mono_out["generators"] = {
            str(k): {"matrix": [[_cplx_out(x) for x in row] for row in v.matrix],
                     "error_estimate": v.error_estimate}
            for k, v in pi_mats.items()}

    return {"monodromy": mono_out}


def _run_probe(cfg: LabConfig, inst: Instance, table: ResidualTable):
    torus, group, hs = inst.torus, inst.group, inst.hypertori
    n = torus.n
    basepoint = pick_basepoint(torus, group, hs, seed=cfg.seed + 11)
    gens = braid_generators(group, torus, hs, basepoint, seed=cfg.seed + 12)
    orbit_reps = []
    seen = set()
    for h in hs:
        if h.orbit_id not in seen:
            seen.add(h.orbit_id)
            orbit_reps.append(h.index)
    # translation traces alone pair up under conjugacy (they are class
    # functions); words mixing wall loops and double translations are needed
    # to separate all parameter directions
    trs = gens["translation"]
    paths = list(trs)
    for k, tr in enumerate(trs):
        rep = gens["hypertorus"][orbit_reps[k % len(orbit_reps)]]
        paths.append(compose_paths(group, torus, rep, tr))
    for k in range(1, len(trs)):
        paths.append(compose_paths(group, torus, trs[k], trs[0]))
    rep = gens["hypertorus"][orbit_reps[0]]
    paths.append(compose_paths(group, torus, rep,
                               compose_paths(group, torus, trs[-1], trs[0])))

    def make_traces(m, beta):
        b = make_bundle(m, beta, group)
        acf = build_connection(b, inst.params, group, hs)
        sysf = FlatSectionSystem(acf)
        return [np.trace(transport(sysf, p, rtol=1e-9, atol=1e-11).matrix)
                for p in paths]

    out = parameter_family_probe(make_traces, inst.bundle.multiplier_exponents,
                                 inst.bundle.connection_covector)
    table.add("probe", "jacobian_rank",
              out["real_rank"], out["full_real_rank"], mode="min")
    return out


def _versions():
    import numpy
    from . import _kernels
    v = {"dunklab": __version__, "numpy": numpy.__version__,
         "kernels": "numba" if _kernels.USING_NUMBA else "numpy"}
    if _kernels.USING_NUMBA:
        import numba
        v["numba"] = numba.__version__
    return v


# ---------------------------------------------------------------------------
# entry point

def _load_config(args) -> LabConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
    elif getattr(args, "family", None):
        raw = parse_family_name(args.family)
        if getattr(args, "coupling", None) is not None:
            raw["couplings"] = [args.coupling[0], args.coupling[1]]
    else:
        raise ConfigError("supply --config PATH or --family NAME")
    cfg = LabConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tolerance_scale is not None:
        cfg.tolerance_scale = args.tolerance_scale
    return cfg


def _emit(report, out_path):
    text = json.dumps(report, sort_keys=True, indent=1)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _suite_list(arg, default):
    if not arg:
        return default
    return [s.strip() for s in arg.split(",") if s.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dunklab",
        description="verification laboratory for elliptic Dunkl operators and "
                    "orbifold Hecke monodromy")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--family", help="built-in family, e.g. cyclic(2)")
        p.add_argument("--coupling", type=float, nargs=2, metavar=("RE", "IM"),
                       help="constant coupling for all orbits")
        p.add_argument("--suite", help="comma-separated suite list")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="report output path")
        p.add_argument("--tolerance-scale", type=float, default=None)

    p_fam = sub.add_parser("families", help="list built-in families")
    p_fam.add_argument("--verbose", action="store_true")

    p_ver = sub.add_parser("verify", help="run structural verification suites")
    common(p_ver)

    p_mon = sub.add_parser("monodromy", help="run monodromy/Hecke suites")
    common(p_mon)
    p_mon.add_argument("--words", type=int, default=10)

    p_rep = sub.add_parser("report", help="summarize an existing report")
    p_rep.add_argument("path")

    args = parser.parse_args(argv)

    try:
        if args.command == "families":
            for name, builder in BUILTIN_FAMILIES.items():
                torus, group = builder()
                hs = enumerate_hypertori(group, torus)
                orbits = {}
                for h in hs:
                    orbits.setdefault(h.orbit_id, []).append(h.index)
                print(f"{name}: |W| = {len(group)}, dim = {torus.n}, "
                      f"{len(hs)} hypertori in {len(orbits)} orbits "
                      f"(n_H = {[hs[v[0]].order for v in orbits.values()]})")
                if args.verbose:
                    for h in hs:
                        base = np.round(h.base_point, 4).tolist()
                        print(f"    wall {h.index}: orbit {h.orbit_id}, "
                              f"n_H = {h.order}, base {base}, "
                              f"modulus {complex(np.round(h.modulus, 4))}")
            return 0
        if args.command == "verify":
            cfg = _load_config(args)
            report, code = run_verify(cfg, _suite_list(args.suite, VERIFY_SUITES))
            _emit(report, args.out)
            return code
        if args.command == "monodromy":
            cfg = _load_config(args)
            report, code = run_monodromy(
                cfg, _suite_list(args.suite,
                                 ["hecke", "degeneration", "duality", "irreducibility"]),
                n_words=args.words)
            _emit(report, args.out)
            return code
        if args.command == "report":
            with open(args.path) as fh:
                rep = json.load(fh)
            print(f"config: {json.dumps(rep.get('config', {}), sort_keys=True)}")
            print(f"pass: {rep.get('pass')}")
            for err, msg in rep.get("errors", {}).items():
                print(f"  [ERR ] {err}: {msg}")
            for suite, entries in rep.get("residuals", {}).items():
                for name, e in entries.items():
                    mark = "ok " if e["pass"] else "FAIL"
                    rel = "<=" if e.get("mode", "max") == "max" else ">="
                    print(f"  [{mark}] {suite}.{name}: {e['value']:.3e} "
                          f"{rel} {e['tolerance']:.3e}")
            return 0 if rep.get("pass") else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StepUnderflow, ToleranceNotMet) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
