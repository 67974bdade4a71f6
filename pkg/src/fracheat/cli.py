"""Command-line front end.

Usage::

    fracheat <command> [key=value ...] [--config FILE]

Arguments are ``key=value`` pairs; ``--config`` reads further pairs from a
file (one per line, ``#`` starts a comment) and command-line pairs override
them. Unknown keys are rejected. Output goes to standard output, or to
``output=NAME`` inside the directory named by ``$FRACHEAT_OUTPUT_DIR``
(default: the working directory). Every artifact starts with the code version
and the fully resolved configuration.

Exit status is ``0`` on success, ``1`` for a domain error raised by the
library and ``2`` for an invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from fracheat import __version__, fracops, scenarios, solutions, solvers, subspace
from fracheat.errors import ConfigError, FracHeatError
from fracheat.fracops import SampledFunction, TimeGrid
from fracheat.specfun import gamma as gamma_fn
from fracheat.specfun import mittag_leffler

OUTPUT_ENV = "FRACHEAT_OUTPUT_DIR"


# {{{ parameter parsing


def floats(text: str) -> list[float]:
    """Comma-separated floats; ``a:b:n`` expands to *n* evenly spaced values."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b, n = part.split(":")
            out.extend(np.linspace(float(a), float(b), int(n)).tolist())
        else:
            out.append(float(part))
    return out


def ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def strings(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ConfigError(f"expected one of {', '.join(options)}; got {text!r}")
        return text
    parse.__name__ = "choice"
    return parse


Schema = dict[str, tuple[Callable[[str], Any], str]]

COMMON: Schema = {
    "output": (str, ""),
    "format": (choice("csv", "json"), "csv"),
}


def resolve(schema: Schema, pairs: dict[str, str]) -> dict[str, Any]:
    unknown = sorted(set(pairs) - set(schema) - set(COMMON))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    full = {**COMMON, **schema}
    out = {}
    for key, (parse, default) in full.items():
        text = pairs.get(key, default)
        try:
            out[key] = parse(text)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc
    return out


def read_pairs(items: Sequence[str]) -> dict[str, str]:
    pairs = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def read_config(path: str) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    items = [ln.split("#", 1)[0].strip() for ln in lines]
    return read_pairs([it for it in items if it])


# }}}


# {{{ output


class Table:
    def __init__(self, columns: Sequence[str], rows: Sequence[Sequence[Any]],
                 extra: dict[str, Any] | None = None) -> None:
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.extra = extra or {}


def _cell(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_value(v: Any) -> Any:
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


Result = Table | subspace.ReducedSystem


def render(command: str, config: dict[str, Any], result: Result) -> str:
    echo = dict(config)
    if config["format"] == "json":
        doc: dict[str, Any] = {"version": __version__, "command": command, "config": echo}
        if isinstance(result, Table):
            doc["columns"] = result.columns
            doc["rows"] = result.rows
            doc.update(result.extra)
        else:
            doc["system"] = result.to_dict()
        return json.dumps(_json_value(doc), sort_keys=True, indent=1, ensure_ascii=False) + "\n"

    buf = io.StringIO()
    buf.write(f"# fracheat {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config: {json.dumps(_json_value(echo), sort_keys=True, ensure_ascii=False)}\n")
    if isinstance(result, Table):
        for key in sorted(result.extra):
            buf.write(f"# {key}: {json.dumps(_json_value(result.extra[key]), sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_cell(v) for v in row])
    else:
        buf.write(result.to_text() + "\n")
    return buf.getvalue()


# }}}


# {{{ commands


def cmd_ml_eval(c: dict[str, Any]) -> Table:
    z = np.array(c["z"], dtype=float)
    values = np.atleast_1d(mittag_leffler(c["alpha"], c["beta"], z))
    return Table(["z", "E"], zip(z, values))


def cmd_fracop(c: dict[str, Any]) -> Table:
    if c["grading"] == 1.0:
        grid = TimeGrid.uniform(c["tfinal"], c["n"])
    else:
        grid = TimeGrid.graded(c["tfinal"], c["n"], c["grading"])
    beta, t = c["beta"], grid.nodes
    f = SampledFunction(grid, t**beta)
    op, order = c["op"], c["order"]

    if op == "caputo":
        if 0.0 < order < 1.0:
            values = fracops.caputo_l1(f, order).values
        else:
            values = fracops.caputo_high(f, order).values
        rule = fracops.power_rule(beta, order)
        exact = rule.coefficient * t**rule.exponent
    elif op == "rl_integral":
        values = fracops.rl_integral(f, order).values
        exact = gamma_fn(beta + 1) / gamma_fn(beta + 1 + order) * t ** (beta + order)
    else:
        values = fracops.telegraph_apply(f, c["lam"], order, form=c["form"]).values
        rule = fracops.power_rule(beta, 2.0 - order)
        with np.errstate(divide="ignore"):
            exact = beta * (beta - 1.0) * t ** (beta - 2.0) \
                + c["lam"] ** order * rule.coefficient * t**rule.exponent
            if c["form"] == "flux" and beta == 1.0:
                exact = exact + c["lam"] ** order * t ** (order - 1.0) / gamma_fn(order)
        exact[0] = values[0]

    return Table(["t", "value", "exact", "error"],
                 zip(t, values, exact, np.abs(values - exact)))


def cmd_eval(c: dict[str, Any]) -> Table:
    x = np.linspace(c["xmin"], c["xmax"], c["nx"] + 1)
    times = c["t"]
    kind = c["solution"]
    if kind == "prop21":
        sol = solutions.Prop21Solution(
            solutions.TelegraphParams(c["gamma"], c["lam"], c["nu"]), c["C1"], c["C2"],
            None if math.isnan(c["shift"]) else c["shift"])
        func = lambda xv, tv: solutions.prop21_eval(sol, xv, tv)  # noqa: E731
    elif kind == "prop23":
        s23 = solutions.Prop23Solution(solutions.TelegraphParams(c["gamma"], c["lam"], c["nu"]))
        func = lambda xv, tv: solutions.prop23_eval(s23, xv, tv)  # noqa: E731
    elif kind == "wave":
        sw = solutions.WaveSolution(c["gamma"], c["nu"])
        func = lambda xv, tv: solutions.wave_eval(sw, xv, tv)  # noqa: E731
    else:
        pb = solutions.BarenblattParams(c["m"])
        func = lambda xv, tv: solutions.barenblatt_eval(pb, xv, tv)  # noqa: E731

    rows = []
    for tv in times:
        values = np.atleast_1d(func(x, tv)) * np.ones_like(x)
        rows.extend(zip(x, [tv] * x.size, values))
    return Table(["x", "t", "T"], rows)


def _sym(text: str, default: Any) -> Any:
    return default if text == "" else subspace.sympify(text)


def cmd_reduce(c: dict[str, Any]) -> subspace.ReducedSystem:
    basis = [subspace.PowerExpr.parse(b) for b in c["basis"]]
    gamma = subspace.sympify(c["gamma"])
    if c["op"] == "telegraph":
        op = subspace.telegraph(_sym(c["lam"], subspace.LAMBDA), _sym(c["nu"], subspace.NU))
    else:
        op = subspace.caputo_composite(_sym(c["nu"], subspace.NU))
    return subspace.reduce(basis, gamma, op)


def _solver_table(report: solvers.SolverReport, extra: dict[str, Any]) -> Table:
    extra = {"residual_max": float(np.max(report.residual_norms)),
             "clip_events": report.clip_events, **extra}
    return Table(["t", "x", "T"], report.rows(), extra)


def cmd_solve(c: dict[str, Any]) -> Table:
    name, nx, nt = c["scenario"], c["nx"], c["nt"]
    if name == "prop21":
        # grading=0 selects the default 2 / nu
        spec, exact = scenarios.prop21(c["gamma"], c["lam"], c["nu"], c["C1"], c["C2"],
                                       tfinal=c["tfinal"], grading=c["grading"] or None)
        rep = solvers.solve_pde(spec, nx, nt)
        return _solver_table(rep, {"max_error": rep.max_error(exact)})
    if name == "cattaneo":
        rep = solvers.solve_pde(scenarios.cattaneo(c["tau"], c["tfinal"]), nx, nt)
        ref = scenarios.cattaneo_reference(rep, c["tau"])
        return _solver_table(rep, {"max_diff_reference": float(np.max(np.abs(rep.solution - ref)))})
    if name == "ml-equivalence":
        a = solvers.solve_pde(scenarios.ml_memory(c["lam"], c["nu"], c["tfinal"]), nx, nt)
        b = solvers.solve_pde(scenarios.ml_telegraph(c["lam"], c["nu"], c["tfinal"]), nx, nt)
        return _solver_table(a, {"max_diff_telegraph": float(np.max(np.abs(a.solution - b.solution)))})
    if name == "barenblatt":
        spec, exact, p = scenarios.barenblatt(c["m"], c["decades"])
        rep = solvers.solve_pde(spec, nx, nt)
        mask = scenarios.edge_mask(rep, p)
        return _solver_table(rep, {
            "max_error_off_edge": rep.max_error(exact, mask),
            "max_mass_drift_per_step": rep.diagnostics["max_mass_drift_per_step"]})
    raise ConfigError(f"unknown scenario: {name!r}")


def _verify_setup(c: dict[str, Any]) -> tuple[Any, solvers.EquationSpec, str, list[Any]]:
    name = c["scenario"]
    if name == "prop21":
        spec, exact = scenarios.prop21(c["gamma"], c["lam"], c["nu"])
        ladder = [(n, 10 * n) for n in c["ladder"]]
        return exact, spec, "grid", ladder
    if name == "negative":
        spec, wrong = scenarios.negative_control(c["gamma"], c["lam"], c["nu"])
        return wrong, spec, "grid", [(n, 10 * n) for n in c["ladder"]]
    if name == "prop23":
        spec, exact = scenarios.prop23(c["gamma"], c["lam"], c["nu"])
        return exact, spec, "quadrature", list(c["steps"])
    if name == "wave":
        spec, exact = scenarios.wave(c["gamma"], c["nu"])
        return exact, spec, "quadrature", list(c["steps"])
    raise ConfigError(f"unknown scenario: {name!r}")


def cmd_verify(c: dict[str, Any]) -> Table:
    func, spec, route, ladder = _verify_setup(c)
    rep = solvers.verify_residual(func, spec, ladder, route=route)
    slopes = [math.nan, *rep.slopes]
    rows = [(str(r), d, s) for r, d, s in zip(rep.resolutions, rep.defects, slopes)]
    return Table(["resolution", "defect", "log2_ratio"], rows,
                 {"route": route, "converging": rep.converging})


def cmd_figure1(c: dict[str, Any]) -> Table:
    sol = solutions.Prop21Solution(
        solutions.TelegraphParams(c["gamma"], c["lam"], c["nu"]), c["C1"], c["C2"])
    x = np.linspace(c["xmin"], c["xmax"], c["nx"] + 1)
    rows = []
    for tv in c["t"]:
        f = solutions.prop21_time(sol, tv)
        values = solutions.prop21_eval(sol, x, tv)
        rows.extend((xv, tv, v, f) for xv, v in zip(x, values))
    return Table(["x", "t", "T", "f"], rows)


def cmd_scan_validity(c: dict[str, Any]) -> Table:
    rows = []
    for r in solutions.scan_validity(c["gammas"], c["nus"]):
        p23 = solutions.prop23_valid(solutions.TelegraphParams(r.gamma, c["lam"], r.nu))
        rows.append((*r, p23))
    return Table([*solutions.ValidityRow._fields, "prop23_valid"], rows)


def cmd_convergence(c: dict[str, Any]) -> Table:
    name = c["scenario"]
    if name in ("prop21", "negative"):
        spec, exact = scenarios.prop21(c["gamma"], c["lam"], c["nu"])
        if name == "negative":
            # deliberately wrong oracle: the frozen initial datum
            oracle = lambda xv, tv: exact(xv, 0.0 * tv)  # noqa: E731
        else:
            oracle = exact

        def run(nx: int) -> tuple[float, float]:
            rep = solvers.solve_pde(spec, nx, 10 * nx)
            return 1.0 / nx, rep.max_error(oracle)
    elif name == "barenblatt":
        spec, exact, p = scenarios.barenblatt(c["m"], c["decades"])

        def run(nx: int) -> tuple[float, float]:
            rep = solvers.solve_pde(spec, nx, 2 * nx)
            return (spec.domain[1] - spec.domain[0]) / nx, \
                rep.max_error(exact, scenarios.edge_mask(rep, p))
    else:
        raise ConfigError(f"unknown scenario: {name!r}")

    table = solvers.convergence_study(run, c["ladder"], workers=c["workers"])
    return Table(["h", "error", "order"], table,
                 {"monotone_decreasing": solvers.is_monotone_decreasing(table)})


_PHYS: Schema = {"gamma": (float, "1"), "lam": (float, "1"), "nu": (float, "0.5")}

COMMANDS: dict[str, tuple[Callable[[dict[str, Any]], Result], Schema]] = {
    "ml-eval": (cmd_ml_eval, {"alpha": (float, "1"), "beta": (float, "1"), "z": (floats, "1")}),
    "fracop": (cmd_fracop, {
        "op": (choice("caputo", "rl_integral", "telegraph"), "caputo"),
        "beta": (float, "2"), "order": (float, "0.5"), "lam": (float, "1"),
        "form": (choice("flux", "caputo"), "flux"), "n": (int, "64"),
        "tfinal": (float, "1"), "grading": (float, "1")}),
    "eval": (cmd_eval, {
        "solution": (choice("prop21", "prop23", "wave", "barenblatt"), "prop21"),
        **_PHYS, "C1": (float, "1"), "C2": (float, "1"), "shift": (float, "nan"),
        "m": (float, "1"), "xmin": (float, "0"), "xmax": (float, "1"), "nx": (int, "10"),
        "t": (floats, "1")}),
    "reduce": (cmd_reduce, {
        "basis": (strings, "1,x,x2"), "gamma": (str, "1"),
        "op": (choice("telegraph", "caputo_composite"), "telegraph"),
        "lam": (str, ""), "nu": (str, ""), "format": (choice("text", "json"), "text")}),
    "solve": (cmd_solve, {
        "scenario": (choice("prop21", "cattaneo", "ml-equivalence", "barenblatt"), "prop21"),
        **_PHYS, "C1": (float, "1"), "C2": (float, "1"), "tau": (float, "1"),
        "m": (float, "1"), "decades": (float, "1"), "nx": (int, "50"), "nt": (int, "500"),
        "tfinal": (float, "1"), "grading": (float, "0")}),
    "verify": (cmd_verify, {
        "scenario": (choice("prop21", "prop23", "wave", "negative"), "prop21"),
        **_PHYS, "ladder": (ints, "25,50,100"), "steps": (floats, "0.1,0.05,0.025")}),
    "figure1": (cmd_figure1, {
        **_PHYS, "C1": (float, "1"), "C2": (float, "1"), "xmin": (float, "0"),
        "xmax": (float, "3"), "nx": (int, "30"), "t": (floats, "0,0.5,1,2")}),
    "scan-validity": (cmd_scan_validity, {
        "gammas": (floats, "0.25:3:12"), "nus": (floats, "0.1:0.9:9"), "lam": (float, "1")}),
    "convergence": (cmd_convergence, {
        "scenario": (choice("prop21", "barenblatt", "negative"), "prop21"),
        **_PHYS, "m": (float, "1"), "decades": (float, "1"),
        "ladder": (ints, "50,100,200"), "workers": (int, "1")}),
}


# }}}


def run(command: str, pairs: dict[str, str]) -> str:
    """Execute *command* and return the rendered artifact."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command: {command!r}")
    func, schema = COMMANDS[command]
    config = resolve(schema, pairs)
    return render(command, config, func(config))


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracheat", description=__doc__.split("\n")[0],
        epilog="Commands: " + ", ".join(COMMANDS))
    parser.add_argument("command")
    parser.add_argument("params", nargs="*", help="key=value pairs")
    parser.add_argument("--config", help="file with key=value lines")
    args = parser.parse_intermixed_args(argv)

    try:
        pairs = read_config(args.config) if args.config else {}
        pairs.update(read_pairs(args.params))
        text = run(args.command, pairs)
        target = pairs.get("output", "")
        if target:
            path = Path(os.environ.get(OUTPUT_ENV, ".")) / target
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FracHeatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
