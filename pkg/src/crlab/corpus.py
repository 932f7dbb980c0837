"""Built-in hypersurfaces, CR maps and scenarios, and scenario-file parsing."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cr_manifold import HypersurfaceSpec
from .immersion import CRMapSpec
from .polynomial import PolynomialSpec

P = PolynomialSpec

TASKS = ("chart", "webster", "chern_moser", "prop31", "sff", "ek", "codazzi", "gauss",
         "induced", "qframe", "ex53")
MAP_TASKS = ("sff", "ek", "codazzi", "gauss", "induced", "qframe")
DEPENDS = {
    "chart": (),
    "webster": ("chart",),
    "chern_moser": ("webster",),
    "prop31": ("chern_moser",),
    "sff": ("webster",),
    "ek": ("chart",),
    "codazzi": ("sff",),
    "gauss": ("sff", "chern_moser"),
    "induced": ("codazzi", "prop31"),
    "qframe": ("induced",),
    "ex53": (),
}


class ScenarioError(ValueError):
    pass


def task_closure(tasks: Sequence[str]) -> List[str]:
    """Requested tasks plus everything they depend on, in execution order."""
    need = set()

    def add(t):
        if t not in DEPENDS:
            raise ScenarioError(f"unknown task {t!r}")
        if t in need:
            return
        for d in DEPENDS[t]:
            add(d)
        need.add(t)

    for t in tasks:
        add(t)
    return [t for t in TASKS if t in need]


# -- hypersurfaces and maps -------------------------------------------------------

def sphere_spec(n: int, base: Sequence[complex], radius: float = 1.0) -> HypersurfaceSpec:
    return HypersurfaceSpec(n + 1, P.sphere(n + 1, radius), tuple(base))


def heisenberg_spec(n: int) -> HypersurfaceSpec:
    """|z|^2 - Im w = 0 in C^{n+1} at the origin (w is the last coordinate)."""
    N = n + 1
    w = tuple(int(k == n) for k in range(N))
    zero = (0,) * N
    terms = {(w, zero): 0.5j, (zero, w): -0.5j}
    for k in range(n):
        e = tuple(int(j == k) for j in range(N))
        terms[(e, e)] = 1.0
    return HypersurfaceSpec(N, P.from_terms(N, terms), (0,) * N)


def perturbed_sphere_spec(eps: float = 0.05) -> HypersurfaceSpec:
    """|Z|^2 - 1 + eps (z1^2 zbar2^2 + zbar1^2 z2^2) in C^3, a non-spherical real ellipsoid-like surface."""
    rho = P.sphere(3) + (P.z(3, 0) ** 2 * P.zbar(3, 1) ** 2 + P.zbar(3, 0) ** 2 * P.z(3, 1) ** 2) * eps
    z1, z2 = 0.4, 0.3
    w = np.sqrt(1 - z1 ** 2 - z2 ** 2 - 2 * eps * z1 ** 2 * z2 ** 2)
    return HypersurfaceSpec(3, rho, (z1, z2, w))


GENERIC_S5 = (0.5, 0.5j, np.sqrt(0.5))


def linear_embedding(n: int, d: int, base: Sequence[complex] = GENERIC_S5) -> CRMapSpec:
    """z -> (z, 0, .., 0) from S^{2n+1} into S^{2(n+d)+1}."""
    N = n + 1
    comps = [P.z(N, k) for k in range(N)] + [P.constant(N, 0.0)] * d
    return CRMapSpec.to_sphere(sphere_spec(n, base), comps)


def sphere_section(base: Sequence[complex] = GENERIC_S5) -> CRMapSpec:
    """An isometric linear map C^3 -> C^4 whose image plane mixes two target axes."""
    cols = np.array([[1, 0, 0, 0], [0, 0.6, 0, 0.8j], [0, 0.8, 0, -0.6j]], dtype=complex).T
    comps = []
    for row in cols:
        p = P.constant(3, 0.0)
        for k, c in enumerate(row):
            if c != 0:
                p = p + P.z(3, k) * c
        comps.append(p)
    return CRMapSpec.to_sphere(sphere_spec(2, base), comps)


def whitney_map(n: int, base: Optional[Sequence[complex]] = None) -> CRMapSpec:
    """(z_1, .., z_n, z_1 z_{n+1}, .., z_n z_{n+1}, z_{n+1}^2) from S^{2n+1} into S^{4n+1}."""
    if n < 1:
        raise ScenarioError("whitney_map needs n >= 1")
    N = n + 1
    if base is None:
        base = (2 ** -0.5,) + (0,) * (n - 1) + (2 ** -0.5,)
    z = [P.z(N, k) for k in range(N)]
    comps = z[:n] + [z[k] * z[n] for k in range(n)] + [z[n] * z[n]]
    return CRMapSpec.to_sphere(sphere_spec(n, base), comps)


# quadratic forms of the example pair, as symmetric coefficient matrices (Q(z) = z^T Q z)
EX53_Q = np.array([[4, 0.5], [0.5, 4]], dtype=complex)
EX53_QT = np.array([[4, -0.5], [-0.5, 4]], dtype=complex)
EX53_SEED = 53


def ex53_samples(count: int = 20, seed: int = EX53_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=(count, 2)) + 1j * rng.normal(size=(count, 2))


# -- scenarios ------------------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    description: str = ""
    source: Optional[HypersurfaceSpec] = None
    map: Optional[CRMapSpec] = None
    order: int = 6
    k_max: int = 3
    tasks: Tuple[str, ...] = ()
    tolerances: Dict[str, float] = field(default_factory=dict)
    expect: Dict[str, object] = field(default_factory=dict)
    fast: bool = False

    def __post_init__(self):
        self.tasks = tuple(self.tasks)
        if self.map is not None and self.source is None:
            self.source = self.map.source
        self.validate()

    @property
    def target(self) -> Optional[HypersurfaceSpec]:
        return self.map.target if self.map is not None else None

    @property
    def base_point(self):
        return self.source.base_point if self.source is not None else None

    def validate(self):
        problems = []
        for t in self.tasks:
            if t not in DEPENDS:
                problems.append(f"unknown task {t!r}")
            elif t in MAP_TASKS and self.map is None:
                problems.append(f"task {t!r} requires a map but the scenario has none")
        if self.source is None and any(t != "ex53" for t in self.tasks):
            problems.append("tasks other than ex53 require a source hypersurface")
        if self.order < 1:
            problems.append("order must be positive")
        if problems:
            raise ScenarioError(f"scenario {self.name!r}: " + "; ".join(problems))
        return self

    def closure(self) -> List[str]:
        return task_closure(self.tasks)


SOURCE_TASKS = ("chart", "webster", "chern_moser", "prop31")
ALL_MAP_TASKS = SOURCE_TASKS + MAP_TASKS


def builtin_scenarios() -> List[Scenario]:
    return [
        Scenario("heisenberg-basics", "Heisenberg hypersurface |z|^2 = Im w in C^3 at the origin",
                 heisenberg_spec(2), tasks=SOURCE_TASKS, expect={"spherical": True}, fast=True),
        Scenario("sphere-basics-n2", "unit sphere in C^3 at a generic point", sphere_spec(2, GENERIC_S5),
                 tasks=SOURCE_TASKS, expect={"spherical": True}, fast=True),
        Scenario("sphere-basics-n3", "unit sphere in C^4 at a generic point",
                 sphere_spec(3, (0.5, 0.5j, 0.5, 0.5)), tasks=SOURCE_TASKS,
                 expect={"spherical": True}, fast=True),
        Scenario("perturbed-sphere", "quartic perturbation of the sphere in C^3 with nonzero torsion",
                 perturbed_sphere_spec(), tasks=SOURCE_TASKS, fast=True),
        Scenario("linear-embedding-d1", "z -> (z, 0) from S^5 into S^7", map=linear_embedding(2, 1),
                 tasks=ALL_MAP_TASKS, expect={"spherical": True, "dims": [1, 3, 3, 3], "s0": 1, "k0": 1},
                 fast=True),
        Scenario("linear-embedding-d2", "z -> (z, 0, 0) from S^5 into S^9", map=linear_embedding(2, 2),
                 tasks=ALL_MAP_TASKS, expect={"spherical": True, "dims": [1, 3, 3, 3], "s0": 2, "k0": 1}),
        Scenario("sphere-section", "isometric linear map S^5 -> S^7 onto a tilted section",
                 map=sphere_section(), tasks=ALL_MAP_TASKS,
                 expect={"spherical": True, "dims": [1, 3, 3, 3], "s0": 1, "k0": 1}),
        Scenario("whitney", "Whitney map S^5 -> S^9 at (1/sqrt 2, 0, 1/sqrt 2)", map=whitney_map(2),
                 tasks=ALL_MAP_TASKS, expect={"spherical": True, "dims": [1, 3, 5, 5], "s0": 0, "k0": 2}),
        Scenario("ex53-identity", "two quadratic forms with equal traceless part and different |Q|^2",
                 tasks=("ex53",), fast=True),
    ]


def get_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise ScenarioError(f"unknown scenario {name!r}")


# -- scenario files -------------------------------------------------------------------

def _complex_list(value, where: str) -> List[complex]:
    try:
        return [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in value]
    except (TypeError, ValueError, IndexError):
        raise ScenarioError(f"{where}: expected a list of numbers or [re, im] pairs") from None


def _poly(n: int, records, where: str) -> PolynomialSpec:
    try:
        return P.from_records(n, records)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: bad polynomial records ({exc})") from None


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("field 'name': required non-empty string")
    source = None
    if "source" in data:
        src = data["source"]
        try:
            dim = int(src["dim"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("field 'source.dim': required integer") from None
        rho = _poly(dim, src.get("rho", []), "field 'source.rho'")
        base = _complex_list(src.get("base_point", []), "field 'source.base_point'")
        try:
            source = HypersurfaceSpec(dim, rho, tuple(base)).validate()
        except ValueError as exc:
            raise ScenarioError(f"field 'source': {exc}") from None
    cr_map = None
    if "map" in data:
        if source is None:
            raise ScenarioError("field 'map': needs a 'source'")
        mp = data["map"]
        comps = [_poly(source.ambient_complex_dim, c, f"field 'map.components[{k}]'")
                 for k, c in enumerate(mp.get("components", []))]
        try:
            cr_map = CRMapSpec.to_sphere(source, comps, float(mp.get("radius", 1.0)))
        except ValueError as exc:
            raise ScenarioError(f"field 'map': {exc}") from None
    tol = data.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ScenarioError("field 'tolerances': expected an object")
    return Scenario(name, str(data.get("description", "")), source, cr_map,
                    order=int(data.get("order", data.get("jet_order", 6))), k_max=int(data.get("k_max", 3)),
                    tasks=tuple(data.get("tasks", ())), tolerances={k: float(v) for k, v in tol.items()},
                    expect=dict(data.get("expect", {})))


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)


def _pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


def scenario_to_dict(s: Scenario) -> dict:
    out = {"name": s.name, "description": s.description}
    if s.source is not None:
        out["source"] = {"dim": s.source.ambient_complex_dim, "rho": s.source.rho.to_records(),
                         "base_point": [_pair(z) for z in s.source.base_point]}
    if s.map is not None:
        out["map"] = {"components": [c.to_records() for c in s.map.components], "radius": s.map.radius}
    out.update({"order": s.order, "k_max": s.k_max, "tasks": list(s.tasks),
                "tolerances": dict(s.tolerances), "expect": dict(s.expect)})
    return out
