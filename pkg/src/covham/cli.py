"""Command line front end.

    covham derive   --model kg_flat
    covham bracket  --model kg_flat phi0 pi^0_0
    covham verify   [--scenario kg-flat]
    covham simulate --model kg_1d_curved --out run/
    covham list-scenarios

Results go to stdout, diagnostics to stderr.  The exit status is 0 iff every
requested check passed, 1 when a check failed and 2 for unusable input.
"""

import argparse
import json
import math
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import sympy as sp

from .dynamics import reduce_to_second_order
from .grammar import ExpressionSyntaxError, UndeclaredSymbolError, chart_namespace, parse_expression
from .kernel import canonical, serialize
from .modelfile import ModelError, bundled_models, parse_model
from .polysymplectic import poisson_bracket
from .scenarios import DESCRIPTIONS, SCENARIOS, verify_scenario
from .solver import (CSV_COLUMNS, GridState, SolverConfig, compile_evolution, content_hash,
                     diagnostics, step, write_series, write_snapshots)

OK, FAILED, BAD_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


def _resolve_model(name: str) -> str:
    """Accept a path, a bundled model name, or a scenario name like kg-flat."""
    if Path(name).exists():
        return name
    alt = name.replace("-", "_")
    return alt if alt in bundled_models() else name


def _load(args):
    if not args.model:
        raise UsageError(f"{args.command} needs --model")
    return parse_model(_resolve_model(args.model))


def _emit(args, text: str, data: dict) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------

def cmd_derive(args) -> int:
    model = _load(args)
    eqs = model.field_equations(seed=args.seed)
    c = model.chart
    momentum = [{"I": i, "a": a, "residual": serialize(eqs.momentum[i][a])}
                for i in range(c.N) for a in range(c.n)]
    divergence = [{"I": i, "residual": serialize(e)} for i, e in enumerate(eqs.divergence)]
    reduced = [{"I": i, "residual": serialize(e)} for i, e in enumerate(reduce_to_second_order(eqs))]

    lines = [f"model {Path(model.path).stem} (n={c.n}, N={c.N}, route {eqs.route})",
             "momentum definitions:"]
    lines += [f"  D^{m['a']}_{m['I']} = {m['residual']}" for m in momentum]
    lines.append("divergence equations:")
    lines += [f"  E_{d['I']} = {d['residual']}" for d in divergence]
    lines.append("reduced second-order equations:")
    lines += [f"  R_{d['I']} = {d['residual']}" for d in reduced]
    if eqs.constraint is not None:
        lines.append(f"note: momentum map has rank {eqs.constraint.rows} of {c.n * c.N}; "
                     "equations hold on the constraint surface")
    data = {"model": Path(model.path).stem, "n": c.n, "N": c.N, "route": eqs.route,
            "momentum": momentum, "divergence": divergence, "reduced": reduced}
    _emit(args, "\n".join(lines), data)
    return OK


# ---------------------------------------------------------------------------
# bracket
# ---------------------------------------------------------------------------

def one_form_text(components, chart) -> str:
    terms = []
    for a, coeff in enumerate(components):
        coeff = canonical(coeff)
        if coeff == 0:
            continue
        basis = f"dx{a}"
        if coeff == 1:
            terms.append(basis)
        elif coeff == -1:
            terms.append(f"-{basis}")
        else:
            terms.append(f"({serialize(coeff)})*{basis}")
    if not terms:
        return "0"
    return " + ".join(terms).replace("+ -", "- ")


def cmd_bracket(args) -> int:
    model = _load(args)
    ns = chart_namespace(model.chart)
    f = parse_expression(args.f, ns)
    g = parse_expression(args.g, ns)
    comps = poisson_bracket(f, g, model.chart)
    text = one_form_text(comps, model.chart)
    data = {"f": serialize(f), "g": serialize(g), "bracket": text,
            "components": {f"dx{a}": serialize(e) for a, e in enumerate(comps)}}
    _emit(args, text, data)
    return OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    names = [args.scenario] if args.scenario else list(SCENARIOS)
    for name in names:
        if name not in SCENARIOS:
            raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    reports = []
    for name in names:
        r = verify_scenario(name, seed=args.seed)
        print(f"{name}: {'pass' if r.passed else 'FAIL'} ({r.elapsed:.1f} s)", file=sys.stderr)
        reports.append(r)
    if args.format == "json":
        print(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True))
    else:
        print("\n".join(r.to_text() for r in reports))
    return OK if all(r.passed for r in reports) else FAILED


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _grid_values(expr, x: sp.Symbol, grid: np.ndarray) -> np.ndarray:
    fn = sp.lambdify(x, expr, "numpy")
    return np.broadcast_to(np.asarray(fn(grid), dtype=float), grid.shape).copy()


def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__, "sympy": sp.__version__}
    try:
        out["artifact"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["artifact"] = "unknown"
    return out


def cmd_simulate(args) -> int:
    model = _load(args)
    if not args.out:
        raise UsageError("simulate needs --out")
    c = model.chart
    settings = model.solve
    if not settings:
        raise UsageError(f"{model.path} has no [solve] section")
    eqs = model.field_equations(seed=args.seed)
    rule = compile_evolution(eqs, model.bindings, model.parameter_values)

    M, length = settings["M"], float(settings["length"])
    dx = length / M
    dt = float(settings["cfl"]) * dx
    config = SolverConfig(dt, settings["steps"], cadence=settings["cadence"],
                          parameters=dict(model.parameter_values), bindings=dict(model.bindings))
    x = c.x[1]
    init_phi = settings["init_phi"]
    if init_phi is None:
        init_phi = sp.cos(2 * sp.pi * x / settings["length"])
    grid = np.arange(M) * dx
    state = GridState(_grid_values(init_phi, x, grid), _grid_values(settings["init_pi"], x, grid),
                      length=length)

    every = 0
    if settings["snapshots"]:
        every = max(1, math.ceil(config.steps / settings["snapshots"]))
    records, snaps = [diagnostics(state, rule, dt)], [state] if every else []
    for _ in range(config.steps):
        state = step(state, rule, dt)
        if state.step % config.cadence == 0 or state.step == config.steps:
            records.append(diagnostics(state, rule, dt))
        if every and (state.step % every == 0 or state.step == config.steps):
            snaps.append(state)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "series.csv", records)
    outputs = {"series.csv": content_hash((out / "series.csv").read_bytes())}
    if snaps:
        write_snapshots(out / "snapshots.csv", snaps)
        outputs["snapshots.csv"] = content_hash((out / "snapshots.csv").read_bytes())

    echo = {"M": M, "cfl": str(settings["cfl"]), "dt": dt, "steps": config.steps,
            "cadence": config.cadence, "length": str(settings["length"]), "scheme": config.scheme,
            "init_phi": serialize(init_phi), "init_pi": serialize(settings["init_pi"]),
            "snapshots": settings["snapshots"], "seed": args.seed,
            "parameters": {k: str(v) for k, v in model.parameter_values.items()},
            "bindings": {k: serialize(v) for k, v in model.bindings.items()}}
    E0, E1 = records[0]["energy"], records[-1]["energy"]
    manifest = {
        "model": {"path": str(model.path), "sha256": model.digest},
        "input_hash": content_hash(model.text.encode("utf-8"),
                                   json.dumps(echo, sort_keys=True).encode("utf-8")),
        "config": echo,
        "rule": {"c0": serialize(rule.c0), "c1": serialize(rule.c1), "w": serialize(rule.w),
                 "force": serialize(rule.force), "potential": serialize(rule.potential)},
        "columns": list(CSV_COLUMNS),
        "outputs": outputs,
        "summary": {"final_t": state.t, "final_step": state.step,
                    "relative_energy_change": abs(E1 - E0) / abs(E0) if E0 else abs(E1 - E0)},
        "versions": _versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    summary = (f"wrote {out / 'series.csv'} ({len(records)} rows) and {out / 'manifest.json'}; "
               f"relative energy change {manifest['summary']['relative_energy_change']:.3e}")
    _emit(args, summary, manifest)
    return OK


# ---------------------------------------------------------------------------
# list-scenarios
# ---------------------------------------------------------------------------

def cmd_list(args) -> int:
    data = {"scenarios": dict(DESCRIPTIONS), "models": bundled_models()}
    lines = ["scenarios:"] + [f"  {k:22s} {v}" for k, v in DESCRIPTIONS.items()]
    lines += ["bundled models:"] + [f"  {m}" for m in bundled_models()]
    _emit(args, "\n".join(lines), data)
    return OK


COMMANDS = {"derive": cmd_derive, "bracket": cmd_bracket, "verify": cmd_verify,
            "simulate": cmd_simulate, "list-scenarios": cmd_list}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", metavar="PATH", help="model file or bundled model name")
    common.add_argument("--scenario", metavar="NAME", help="built-in scenario")
    common.add_argument("--out", metavar="DIR", help="output directory for simulate")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized evaluation points")

    p = argparse.ArgumentParser(prog="covham", description="Covariant Hamiltonian field theory toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("derive", parents=[common], help="first-order and reduced field equations")
    b = sub.add_parser("bracket", parents=[common], help="Poisson bracket of two functions")
    b.add_argument("f")
    b.add_argument("g")
    sub.add_parser("verify", parents=[common], help="run the oracle scenarios")
    sub.add_parser("simulate", parents=[common], help="evolve a 1+1 dimensional scalar model")
    sub.add_parser("list-scenarios", parents=[common], help="list scenarios and bundled models")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ModelError, ExpressionSyntaxError, UndeclaredSymbolError, UsageError, FileNotFoundError) as exc:
        print(f"covham {args.command}: {exc}", file=sys.stderr)
        return BAD_INPUT
    except Exception as exc:     # inner failures carry the command as context
        print(f"covham {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
