"""Command line interface: ``crlab run|list|check|describe``.

Scenario files are JSON objects::

    {"name": "...", "description": "...",
     "source": {"dim": 3, "rho": [RECORD, ...], "base_point": [[re, im], ...]},
     "map": {"components": [[RECORD, ...], ...], "radius": 1.0},
     "order": 6, "k_max": 3, "tasks": ["chart", "sff"],
     "tolerances": {"dual": 1e-7, "sff.route_agreement": 1e-9},
     "expect": {"spherical": true, "dims": [1, 3, 3, 3], "s0": 1}}

A polynomial RECORD is ``{"re": a, "im": b, "z_exponents": [..], "zbar_exponents": [..]}``
and stands for (a + ib) z^p zbar^q.  The map, when present, goes into the
sphere of the given radius centred at the origin.

Reports are JSON with ``schema_version``; complex numbers are [re, im] pairs
and tensor dumps carry ``shape``, row-major ``data`` and an ``index_signature`` of index kinds.
"""
from __future__ import annotations

import argparse
import sys
from typing import Dict, List, Optional

from .corpus import ScenarioError, builtin_scenarios
from .runner import DEFAULT_TOLERANCES, report_json, required_order, resolve_scenario, run_scenario


def _parse_tols(items: List[str]) -> Dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep or not name:
            raise ScenarioError(f"--tol expects NAME=VAL, got {item!r}")
        try:
            out[name] = float(val)
        except ValueError:
            raise ScenarioError(f"--tol {name}: {val!r} is not a number") from None
    return out


def _summary_lines(report: dict) -> List[str]:
    lines = [f"{report['scenario']}: {report['status']}"]
    for task, entry in report["tasks"].items():
        extra = ""
        if entry.get("failed"):
            extra = " (" + ", ".join(entry["failed"]) + ")"
        elif entry.get("error"):
            extra = " (" + entry["error"] + ")"
        elif entry.get("reason"):
            extra = " (" + entry["reason"] + ")"
        worst = max(entry.get("residuals", {}).values(), default=None)
        w = f"  max residual {worst:.2e}" if worst is not None else ""
        lines.append(f"  {task:<12} {entry['status']:<8}{w}{extra}")
    return lines


def cmd_run(args) -> int:
    report = run_scenario(args.scenario, order=args.order, tol_overrides=_parse_tols(args.tol),
                          dump_tensors=args.dump_tensors, timing=args.timing)
    text = report_json(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print("\n".join(_summary_lines(report)), file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0 if report["status"] == "pass" else 1


def cmd_list(args) -> int:
    for s in builtin_scenarios():
        tag = " [fast]" if s.fast else ""
        print(f"{s.name:<22} {s.description}{tag}")
    return 0


def cmd_check(args) -> int:
    failed = 0
    for s in builtin_scenarios():
        if args.suite == "fast" and not s.fast:
            continue
        report = run_scenario(s)
        print("\n".join(_summary_lines(report)))
        failed += report["status"] != "pass"
    print(f"{failed} scenario(s) failed" if failed else "all scenarios passed")
    return 1 if failed else 0


def cmd_describe(args) -> int:
    s = resolve_scenario(args.scenario)
    print(f"name:        {s.name}")
    print(f"description: {s.description}")
    if s.source is not None:
        print(f"source:      hypersurface in C^{s.source.ambient_complex_dim}, "
              f"base point {tuple(complex(z) for z in s.source.base_point)}")
    if s.map is not None:
        print(f"map:         {len(s.map.components)} components into the sphere of radius {s.map.radius:g}")
    print(f"jet order:   {s.order}")
    print(f"k_max:       {s.k_max}")
    print(f"tasks:       {', '.join(s.tasks)}")
    print(f"closure:     {', '.join(s.closure())}")
    print("budgets:     " + ", ".join(f"{t}>={required_order(t, s.k_max)}" for t in s.closure()))
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(s.tolerances)
    print("tolerances:  " + ", ".join(f"{k}={v:g}" for k, v in tol.items()))
    if s.expect:
        print(f"expect:      {s.expect}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crlab", description="CR geometry jet computations and checks")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario (builtin name or JSON file)")
    r.add_argument("scenario")
    r.add_argument("--order", type=int, default=None, help="jet order K")
    r.add_argument("--tol", action="append", default=[], metavar="NAME=VAL",
                   help="tolerance override: class (structural, dual, exact, ex53), task, or task.key")
    r.add_argument("--out", default=None, help="write the report here instead of stdout")
    r.add_argument("--dump-tensors", action="store_true", help="include base-point tensor values")
    r.add_argument("--timing", action="store_true", help="include per-task wall time (not byte-stable)")
    r.set_defaults(func=cmd_run)
    sub.add_parser("list", help="list builtin scenarios").set_defaults(func=cmd_list)
    c = sub.add_parser("check", help="run the builtin corpus")
    c.add_argument("--suite", choices=("all", "fast"), default="all")
    c.set_defaults(func=cmd_check)
    d = sub.add_parser("describe", help="print a scenario's tasks and budgets")
    d.add_argument("scenario")
    d.set_defaults(func=cmd_describe)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError) as exc:
        print(f"crlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
