"""Acceptance gate: twelve criteria at jet order 6, one PASS/FAIL line each."""
import time

import numpy as np
from scipy.stats import unitary_group

from crlab.corpus import builtin_scenarios
from crlab.runner import run_scenario

K = 6
SOURCE_SCENARIOS = ["heisenberg-basics", "sphere-basics-n2", "sphere-basics-n3", "perturbed-sphere"]
MAP_SCENARIOS = ["linear-embedding-d1", "linear-embedding-d2", "sphere-section", "whitney"]
LINEAR = ["linear-embedding-d1", "linear-embedding-d2"]

_reports = {}
_wall = {}


def report(name):
    if name not in _reports:
        t0 = time.perf_counter()
        _reports[name] = run_scenario(name, order=None if name == "ex53-identity" else K, timing=True)
        _wall[name] = time.perf_counter() - t0
    return _reports[name]


def res(name, task):
    return report(name)["tasks"][task]["residuals"]


def info(name, task):
    return report(name)["tasks"][task].get("info", {})


def verdict(capsys, label, checks):
    """Print one line for the criterion and fail with the offending checks."""
    bad = [msg for ok, msg in checks if not ok]
    with capsys.disabled():
        print(f"\n[{'PASS' if not bad else 'FAIL'}] {label}" + ("" if not bad else ": " + "; ".join(bad)))
    assert not bad, bad


def below(value, tol, msg):
    return value < tol, f"{msg} = {value:.3e} (tol {tol:g})"


def test_c01_structure_equation_suite(capsys):
    checks = []
    for name in SOURCE_SCENARIOS:
        for task in ("chart", "webster", "prop31"):
            for key, val in res(name, task).items():
                checks.append(below(val, 1e-8, f"{name} {task}.{key}"))
        checks.append(below(_wall[name], 10.0, f"{name} runtime seconds"))
    verdict(capsys, "1 structure equations < 1e-8 on source corpus, < 10 s each", checks)


def test_c02_sphere_flatness(capsys):
    checks = []
    for name in ("sphere-basics-n2", "sphere-basics-n3"):
        checks.append(below(info(name, "chern_moser")["S_norm"], 1e-8, f"{name} |S|"))
        R = info(name, "webster")["R_norm"]
        checks.append((R > 0.5, f"{name} |R| = {R:.3e} should be nontrivial"))
    verdict(capsys, "2 Chern-Moser tensor of the sphere vanishes with R != 0", checks)


def test_c03_lee_identity(capsys):
    i = info("perturbed-sphere", "webster")
    checks = [below(res("perturbed-sphere", "webster")["lee"], 1e-8, "lee residual"),
              (i["W_norm"] > 1e-3, f"|W| = {i['W_norm']:.3e} should be nonzero"),
              (i["dA_norm"] > 1e-3, f"|nabla A| = {i['dA_norm']:.3e} should be nonzero")]
    verdict(capsys, "3 Lee identity dual route < 1e-8 on perturbed sphere", checks)


def test_c04_structure_slot_curvature(capsys):
    S = info("perturbed-sphere", "prop31")["S_norm"]
    checks = [below(res("perturbed-sphere", "prop31")["S_dual_route"], 1e-7, "S slots vs traceless R"),
              (S > 1e-3, f"|S| = {S:.3e} should be nonzero")]
    verdict(capsys, "4 S from structure slots equals traceless part of R < 1e-7", checks)


def test_c05_sff_routes(capsys):
    checks = [below(res(name, "sff")["route_agreement"], 1e-8, f"{name} sff routes") for name in MAP_SCENARIOS]
    verdict(capsys, "5 intrinsic and extrinsic second fundamental forms agree < 1e-8", checks)


def test_c06_gauss(capsys):
    checks = []
    for name in MAP_SCENARIOS:
        r = res(name, "gauss")
        checks.append(below(r["pseudohermitian"], 1e-8, f"{name} pseudohermitian Gauss"))
        checks.append(below(r["pseudoconformal_expanded"], 1e-7, f"{name} expanded pseudoconformal Gauss"))
    sff = info("whitney", "sff")["sff_norm"]
    checks.append(below(res("whitney", "gauss")["sff_conformally_flat"], 1e-7, "whitney <Pi,Pi> conformally flat"))
    checks.append((sff > 1e-2, f"whitney |Pi| = {sff:.3e} should be nonzero"))
    verdict(capsys, "6 Gauss equations on all maps; whitney has [<Pi,Pi>] = 0 with Pi != 0", checks)


def test_c07_quadratic_identity(capsys):
    r, i = res("ex53-identity", "ex53"), info("ex53-identity", "ex53")
    H = np.array(i["H"])[..., 0] + 1j * np.array(i["H"])[..., 1]
    checks = [below(r["identity_residual"], 1e-12, "decomposition residual"),
              below(r["traceless_residual"], 1e-12, "traceless residual"),
              below(float(np.abs(H - np.array([[0, 8], [8, 0]])).max()), 1e-12, "H vs 8(z1 zb2 + zb1 z2)"),
              (i["samples"] == 20, f"samples = {i['samples']}")]
    verdict(capsys, "7 quadratic decomposition identity at 20 seeded points", checks)


def test_c08_degeneracy(capsys):
    checks = []
    pinned = {"linear-embedding-d1": ([1, 3, 3, 3], 1), "linear-embedding-d2": ([1, 3, 3, 3], 2),
              "whitney": ([1, 3, 5, 5], 0)}
    for name, (dims, s0) in pinned.items():
        ek = info(name, "ek")["ek"]
        checks.append((res(name, "ek")["profile_mismatch"] == 0, f"{name} jet and covariant spans differ"))
        checks.append((ek["dims"] == dims and ek["s0"] == s0, f"{name} dims {ek['dims']} s0 {ek['s0']}"))
        checks.append((not ek["unstable"] and not ek["lower_bound"], f"{name} rank decision flagged"))
    verdict(capsys, "8 E_k dimensions agree exactly between both routes and match pinned values", checks)


def test_c09_codazzi(capsys):
    r = res("whitney", "codazzi")
    verdict(capsys, "9 Codazzi equation < 1e-7 on whitney",
            [below(r["codazzi"], 1e-7, "codazzi"), below(r["Dhat_dual_route"], 1e-7, "Dhat dual route")])


def test_c10_induced_connection(capsys):
    checks = [below(res(name, "induced")["C_dual_route"], 1e-7, f"{name} C dual route")
              for name in ("whitney",) + tuple(LINEAR)]
    C = info("whitney", "induced")["C_norm"]
    checks.append((C > 1e-3, f"whitney |C| = {C:.3e} should be nonzero"))
    verdict(capsys, "10 induced connection C agrees with Dhat - D < 1e-7", checks)


def test_c11_qframe(capsys):
    checks = []
    for name in LINEAR:
        for key, val in res(name, "qframe").items():
            if key.startswith("frame_"):
                checks.append(below(val, 1e-9, f"{name} {key}"))
            elif key.startswith("mc_") or key.startswith("dict_"):
                checks.append(below(val, 1e-8, f"{name} {key}"))
    verdict(capsys, "11 Q-frame invariants, Maurer-Cartan flatness and dictionary rows", checks)


def test_c12_unitary_covariance(capsys):
    checks = []
    for sc in builtin_scenarios():
        if sc.source is None:
            continue
        U = unitary_group.rvs(sc.source.n, random_state=12)
        rot = run_scenario(sc.name, order=K, rotation=U)
        for task, entry in report(sc.name)["tasks"].items():
            for key, val in entry["residuals"].items():
                diff = abs(rot["tasks"][task]["residuals"][key] - val)
                checks.append(below(diff, 1e-9, f"{sc.name} {task}.{key} shift"))
    verdict(capsys, "12 constant unitary frame rotation leaves every residual unchanged to 1e-9", checks)


def test_full_suite_runtime(capsys):
    for sc in builtin_scenarios():
        report(sc.name)
    total = sum(_wall.values())
    checks = [below(total, 300.0, "seconds for every built-in scenario")]
    checks += [(report(sc.name)["status"] == "pass", f"{sc.name} status {report(sc.name)['status']}")
               for sc in builtin_scenarios()]
    verdict(capsys, f"suite: every scenario passes, total {total:.1f} s < 300 s", checks)
