"""Scenario execution and JSON reports."""
from __future__ import annotations

import json
import time
from functools import cached_property
from typing import Callable, Dict, List, Optional

import numpy as np

from .corpus import (EX53_Q, EX53_QT, EX53_SEED, Scenario, ScenarioError, ex53_samples, get_scenario,
                     load_scenario)
from .cr_manifold import admissible_coframe
from .forms import FrameCalculus
from .immersion import MapGeometry, huang_polarization_check
from .jets import Jet, get_context
from .pseudoconformal import chern_moser_tensor, cm_structure_residuals, deb_coefficients, pulled_back_phi_forms
from .pseudohermitian import Connections, lee_identity_residual, webster_connection, webster_curvature
from .qframe import (adapted_qframe_along, induced_route_agreement, maurer_cartan, mc_residuals,
                     piphi_dictionary_residual)
from .tensors import IndexedTensor, check_curvature_symmetry, trace_free_violation

SCHEMA_VERSION = 1
DEFAULT_TOLERANCES = {"structural": 1e-8, "dual": 1e-7, "exact": 0.0, "ex53": 1e-12}

# residual keys compared between two independent routes; everything else is structural
DUAL = {
    "webster.lee", "prop31.S_dual_route", "prop31.E_dual_route", "prop31.B_dual_route",
    "sff.route_agreement", "codazzi.codazzi", "codazzi.Dhat_dual_route",
    "gauss.pseudoconformal", "gauss.pseudoconformal_expanded", "gauss.sff_conformally_flat",
    "induced.C_dual_route", "induced.F_dual_route", "induced.A_dual_route", "induced.slot_identity",
    "qframe.induced_phi_ba", "qframe.induced_phi_a", "qframe.induced_psi",
}
EXACT = {"ek.profile_mismatch", "ek.pinned_mismatch"}

# smallest jet order at which every quantity a task checks is still trusted at the base point
# (each derivative costs one order: curvature K-3, B and A K-5, derivatives of psi K-6)
MIN_ORDER = {"chart": 2, "webster": 3, "chern_moser": 3, "prop31": 6, "codazzi": 3, "gauss": 3,
             "induced": 5, "qframe": 5, "ex53": 0}


def required_order(task: str, k_max: int) -> int:
    if task in ("sff", "ek"):
        return max(3, k_max)
    return MIN_ORDER[task]


def check_budget(sc: Scenario, order: int):
    """Raise a ScenarioError naming every task whose order budget exceeds ``order``."""
    short = [f"{t} needs order >= {required_order(t, sc.k_max)}" for t in sc.closure()
             if order < required_order(t, sc.k_max)]
    if short:
        raise ScenarioError(f"scenario {sc.name!r}: jet order {order} too small: " + "; ".join(short))


def tolerance_for(key: str, overrides: Dict[str, float]) -> float:
    """Precedence: exact ``task.key``, then ``task``, then the tolerance class, then the default."""
    if key in overrides:
        return overrides[key]
    task = key.split(".", 1)[0]
    if task in overrides:
        return overrides[task]
    if key.startswith("ex53."):
        cls = "ex53"
    elif key in EXACT:
        cls = "exact"
    elif key in DUAL:
        cls = "dual"
    else:
        cls = "structural"
    return overrides.get(cls, DEFAULT_TOLERANCES[cls])


def _pair(z) -> List[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def dump_tensor(data, kinds=None, name: str = "") -> dict:
    """Base-point values flattened row-major; ``kinds`` adds the index-signature header."""
    if kinds is not None:
        return IndexedTensor(data, kinds, name).dump()
    arr = data.value if isinstance(data, Jet) else np.asarray(data, dtype=complex)
    return {"name": name, "shape": list(arr.shape), "data": [_pair(v) for v in np.ravel(arr)]}


class SourceGeometry:
    """Cached pseudohermitian and pseudoconformal data of a hypersurface with theta = i dbar(rho)."""

    def __init__(self, spec, order: int, rotation=None):
        self.spec = spec
        self.rotation = rotation
        self.ctx = get_context(2 * spec.n + 1, order)

    @cached_property
    def cf(self):
        return admissible_coframe(self.spec, self.ctx, self.rotation)

    @cached_property
    def calc(self):
        return FrameCalculus(self.cf.E, self.cf.Theta)

    @cached_property
    def conn(self):
        return webster_connection(self.cf, self.calc)

    @cached_property
    def pack(self):
        pack = webster_curvature(self.conn, self.cf, self.calc)
        chern_moser_tensor(pack)
        return pack

    @cached_property
    def deb(self):
        return deb_coefficients(self.pack, self.conn, self.cf, self.calc)

    @cached_property
    def structure(self):
        phi = pulled_back_phi_forms(self.conn, self.deb, self.cf, self.calc)
        return cm_structure_residuals(phi, self.pack, self.cf, self.calc)


class _MapSource:
    """Source data of a map, exposed with the SourceGeometry interface."""

    def __init__(self, geom: MapGeometry):
        self.g = geom

    cf = property(lambda self: self.g.src_cf)
    calc = property(lambda self: self.g.src_calc)
    conn = property(lambda self: self.g.src_conn)
    pack = property(lambda self: self.g.src_pack)
    deb = property(lambda self: self.g.src_deb)
    structure = property(lambda self: self.g.src_structure)


class TaskContext:
    def __init__(self, scenario: Scenario, order: int, dump: bool, rotation=None):
        self.scenario = scenario
        self.order = order
        self.dump = dump
        self.geom = None
        if scenario.map is not None:
            self.geom = MapGeometry(scenario.map, order, rotation=rotation, k_max=scenario.k_max)
            self.src = _MapSource(self.geom)
        elif scenario.source is not None:
            self.src = SourceGeometry(scenario.source, order, rotation)
        self.qframe = None
        self.pi = None


# -- tasks: each returns (residuals, info, tensors, flagged) ----------------------------

def _task_chart(ctx: TaskContext):
    s = ctx.scenario
    chart = ctx.src.cf.chart
    res = {"rho_on_chart": chart.ambient(s.source.rho).max_abs()}
    res.update(ctx.src.cf.residuals())
    info = {"solve_var": chart.solve_var, "trusted_order": ctx.src.cf.Theta.trusted}
    if ctx.geom is not None:
        chk = ctx.geom.map_check
        res["map_into_target"] = chk["composed_rho"]
        info["pushforward_rank"] = chk["pushforward_rank"]
    tens = {"Theta": dump_tensor(ctx.src.cf.Theta)} if ctx.dump else {}
    return res, info, tens, False


def _task_webster(ctx: TaskContext):
    conn, pack = ctx.src.conn, ctx.src.pack
    res = dict(conn.residuals)
    res.update(pack.residuals)
    lee = lee_identity_residual(pack, conn, Connections(ctx.src.calc, conn.omega))
    res["lee"] = lee["lee"]
    info = {"W_norm": lee["W_norm"], "dA_norm": lee["dA_norm"], "torsion_norm": float(np.max(np.abs(conn.torsion.value))),
            "R_norm": float(np.max(np.abs(pack.R.value))), "solve_rank": conn.info.rank,
            "solve_unknowns": conn.info.n_unknown}
    tens = {}
    if ctx.dump:
        tens = {"omega": dump_tensor(conn.omega, ("u", "u", "f")), "torsion": dump_tensor(conn.torsion, ("b", "b")),
                "R": dump_tensor(pack.R, ("u", "b", "u", "b"))}
    return res, info, tens, False


def _task_chern_moser(ctx: TaskContext):
    S = ctx.src.pack.S
    res = {"S_trace": trace_free_violation(S), "S_symmetry": check_curvature_symmetry(S)}
    info = {"S_norm": float(np.max(np.abs(S.at_base())))}
    if ctx.scenario.expect.get("spherical"):
        res["S_vanishing"] = S.data.max_abs()
    tens = {"S": dump_tensor(S.data, S.kinds)} if ctx.dump else {}
    return res, info, tens, False


def _task_prop31(ctx: TaskContext):
    rep = ctx.src.structure
    res = {k: v for k, v in rep.residuals.items() if not k.endswith("_norm")}
    D, E, B = ctx.src.deb
    info = {"S_norm": rep.residuals.get("S_norm", 0.0), "B": _pair(B.value),
            "E_norm": float(np.max(np.abs(E.value)))}
    tens = {}
    if ctx.dump:
        tens = {"D": dump_tensor(D, ("u", "b")), "E": dump_tensor(E, ("b",)), "B": dump_tensor(B)}
    return res, info, tens, False


def _task_sff(ctx: TaskContext):
    g = ctx.geom
    sff = g.sff
    res = {("adapted_" + k): v for k, v in g.adapted.residuals.items()}
    res.update({k: v for k, v in sff.residuals.items() if k != "sff_norm"})
    info = {"sff_norm": float(np.linalg.norm(sff.omega_sff.value)),
            "target_chart_trusted": g.tgt_cf.Theta.trusted, "derivative_orders": sorted(sff.derivs)}
    tens = {"sff": dump_tensor(sff.omega_sff, ("u", "nb", "u")), "U": dump_tensor(g.adapted.U)} if ctx.dump else {}
    return res, info, tens, False


def _task_ek(ctx: TaskContext):
    g = ctx.geom
    k_max = ctx.scenario.k_max
    a = g.ek_profile(k_max)
    b = g.sff_profile(k_max)
    res = {"profile_mismatch": float(max(abs(x - y) for x, y in zip(a.dims, b.dims)))
           + float(a.s0 != b.s0)}
    exp = ctx.scenario.expect
    if "dims" in exp:
        want = list(exp["dims"])[: len(a.dims)]
        mism = float(want != a.dims[: len(want)]) + float(exp.get("s0", a.s0) != a.s0)
        if "k0" in exp:
            mism += float(exp["k0"] != a.k0)
        res["pinned_mismatch"] = mism
    info = {"ek": a.as_dict(), "sff_route": b.as_dict(),
            "singular_values": [[float(x) for x in sv] for sv in a.singular_values]}
    return res, info, {}, bool(a.unstable or b.unstable or b.lower_bound)


def _task_codazzi(ctx: TaskContext):
    out = ctx.geom.codazzi()
    res = {k: v for k, v in out.items() if not k.endswith("_norm")}
    info = {"Dhat_norm": float(np.linalg.norm(ctx.geom.sff.Dhat.value))}
    tens = {"Dhat": dump_tensor(ctx.geom.sff.Dhat)} if ctx.dump else {}
    return res, info, tens, False


def _task_gauss(ctx: TaskContext):
    out = ctx.geom.gauss()
    res = {k: out[k] for k in ("pseudohermitian", "pseudoconformal", "pseudoconformal_expanded")}
    if ctx.scenario.expect.get("spherical"):
        res["sff_conformally_flat"] = out["sff_traceless_norm"]
    info = {k: out[k] for k in ("sff_traceless_norm", "sff_product_norm", "S_hat_norm")}
    return res, info, {}, False


def _task_induced(ctx: TaskContext):
    out = ctx.geom.induced()
    res = dict(out["residuals"])
    info = {"C_norm": float(np.linalg.norm(out["C"].value))}
    if out.get("F") is not None:
        info["F_norm"] = float(np.linalg.norm(out["F"].value))
        info["A"] = _pair(out["A"].value)
    tens = {}
    if ctx.dump:
        tens = {"C": dump_tensor(out["C"], ("u", "b"))}
        if out.get("F") is not None:
            tens["F"] = dump_tensor(out["F"], ("b",))
    return res, info, tens, False


def _task_qframe(ctx: TaskContext):
    g = ctx.geom
    fr = adapted_qframe_along(g)
    pi = maurer_cartan(fr)
    ctx.qframe, ctx.pi = fr, pi
    res = {("frame_" + k): v for k, v in fr.residuals.items()}
    res.update({("mc_" + k): v for k, v in mc_residuals(fr, pi).items()})
    res.update({("dict_" + k): v for k, v in piphi_dictionary_residual(fr, pi, g).items()})
    res.update({("induced_" + k): v for k, v in induced_route_agreement(g).items()})
    tens = {"Z": dump_tensor(fr.Z), "pi": dump_tensor(pi)} if ctx.dump else {}
    return res, {}, tens, False


def _task_ex53(ctx: TaskContext):
    z = ex53_samples()
    out = huang_polarization_check(EX53_Q, EX53_QT, z)
    H = out["H"]
    model = np.array([[0, 8], [8, 0]], dtype=complex)
    Hzz_model = np.einsum("si,ij,sj->s", z, model, z.conj())
    res = {"traceless_residual": out["traceless_residual"],
           "identity_residual": out["identity_residual"] / max(1.0, float(np.max(np.abs(out["lhs"])))),
           "H_matches_model": float(np.max(np.abs(out["Hzz"] - Hzz_model)) / max(1.0, float(np.max(np.abs(Hzz_model)))))}
    info = {"H": [[_pair(v) for v in row] for row in H], "samples": len(z), "seed": EX53_SEED}
    return res, info, {}, False


TASK_FUNCS: Dict[str, Callable] = {
    "chart": _task_chart, "webster": _task_webster, "chern_moser": _task_chern_moser,
    "prop31": _task_prop31, "sff": _task_sff, "ek": _task_ek, "codazzi": _task_codazzi,
    "gauss": _task_gauss, "induced": _task_induced, "qframe": _task_qframe, "ex53": _task_ex53,
}


# -- running ---------------------------------------------------------------------------

def resolve_scenario(name_or_path) -> Scenario:
    s = str(name_or_path)
    if s.endswith(".json"):
        return load_scenario(s)
    return get_scenario(s)


def run_scenario(name_or_path, order: Optional[int] = None, tol_overrides: Optional[Dict[str, float]] = None,
                 dump_tensors: bool = False, timing: bool = False, rotation=None) -> dict:
    """Run a scenario's task closure and return the report dictionary.

    ``rotation`` is an optional constant unitary applied to the source CR frame.
    """
    from .corpus import DEPENDS
    sc = resolve_scenario(name_or_path) if not isinstance(name_or_path, Scenario) else name_or_path
    K = sc.order if order is None else int(order)
    check_budget(sc, K)
    overrides = dict(sc.tolerances)
    overrides.update(tol_overrides or {})
    ctx = TaskContext(sc, K, dump_tensors, rotation)
    tasks = {}
    for t in sc.closure():
        failed = [d for d in DEPENDS[t] if tasks.get(d, {}).get("status") in ("fail", "skipped")]
        if failed:
            tasks[t] = {"status": "skipped", "reason": f"depends on failed task(s) {', '.join(failed)}"}
            continue
        t0 = time.perf_counter()
        try:
            res, info, tens, flagged = TASK_FUNCS[t](ctx)
        except Exception as exc:                    # reported, and dependents are skipped
            tasks[t] = {"status": "fail", "error": f"{type(exc).__name__}: {exc}"}
            continue
        res = {k: float(v) for k, v in res.items()}
        tols = {k: tolerance_for(f"{t}.{k}", overrides) for k in res}
        bad = sorted(k for k in res if not res[k] <= tols[k])
        status = "fail" if bad else ("flagged" if flagged else "pass")
        entry = {"status": status, "residuals": res, "tolerances": tols}
        if bad:
            entry["failed"] = bad
        if info:
            entry["info"] = info
        if tens:
            entry["tensors"] = {k: dict(v, name=k) for k, v in tens.items()}
        if timing:
            entry["seconds"] = round(time.perf_counter() - t0, 3)
        tasks[t] = entry
    ok = all(v["status"] in ("pass", "flagged") for v in tasks.values())
    report = {"schema_version": SCHEMA_VERSION, "scenario": sc.name, "description": sc.description,
              "order": K, "k_max": sc.k_max,
              "base_point": [_pair(z) for z in sc.base_point] if sc.base_point is not None else None,
              "requested_tasks": list(sc.tasks), "status": "pass" if ok else "fail", "tasks": tasks}
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"
