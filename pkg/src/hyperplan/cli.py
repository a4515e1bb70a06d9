"""Command-line front end.

Subcommands: ``synthesize``, ``check``, ``horizon``, ``encode``,
``render``, ``bench``.  Exit codes: 0 realizable / check passed,
1 unrealizable / check failed, 2 unknown, 3 usage or input errors.

Models are DTS text files, grid map files, or ``builtin:<name>``
(see ``hyperplan bench --list``).  Specification files are JSON: either
an objective template document (``{"objective": ..., "T": ..., ...}``)
or ``{"formula": "exists p1. ..."}``; a bare (non-JSON) file is read as
a formula.  The benchmark harness writes a CSV alongside aligned text
and, per solved cell, the witness JSON, an SVG, and a matplotlib PNG.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import multiprocessing as mp
import os
import sys
import time
from dataclasses import dataclass, replace

from .dts import Dts, GridMap, GridOptions, Strategy, correspond, from_grid, parse_dts, parse_grid
from .encoder import encode_problem, sidecar_map, to_solver_text
from .formula import Formula, desugar, format_formula, parse
from .horizon import NEG_INF, horizons
from .maps import builtin_names, builtin_text
from .objectives import ObjectiveSpec, build_problem, catalog, objective_from_dict
from .render import RenderStyle, render_ascii, render_svg
from .semantics import check_witness
from .solver import (SOLVER_CMD_ENV, Outcome, Problem, SolveOptions,
                     synthesize, witness_from_json, witness_to_json)

EXIT_REALIZABLE = 0
EXIT_UNREALIZABLE = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


class UsageError(Exception):
    pass


@dataclass
class Model:
    dts: Dts
    grid: GridMap | None = None
    grid_opts: GridOptions | None = None

    @property
    def row_labels(self) -> tuple[str, ...]:
        rows = {p for props in self.dts.labels.values() for p in props
                if p.startswith("row_")}
        return tuple(sorted(rows, key=lambda s: int(s.split("_")[1])))


def load_model(path: str) -> Model:
    if path.startswith("builtin:"):
        try:
            text = builtin_text(path.split(":", 1)[1])
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read model {path!r}: {exc}") from exc
    first = next((ln.strip() for ln in text.splitlines()
                  if ln.strip() and not ln.strip().startswith(";")), "")
    if first.split(":")[0] in ("states", "actions", "trans", "label"):
        return Model(parse_dts(text))
    grid, opts = parse_grid(text)
    return Model(from_grid(grid, opts), grid, opts)


def load_spec(path: str, model: Model,
              options: SolveOptions) -> tuple[Problem, ObjectiveSpec | None]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read spec {path!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {"formula": text}
    if not isinstance(doc, dict):
        raise UsageError("spec file must be a JSON object or a bare formula")

    if "objective" in doc:
        spec = objective_from_dict(doc)
        if not spec.obs_labels and model.row_labels and \
                spec.kind in ("init-state-opaque", "current-state-opaque"):
            spec = replace(spec, obs_labels=model.row_labels)
        return build_problem(spec, model.dts, options), spec

    if "formula" in doc:
        surface = parse(doc["formula"])
        obs = tuple(doc.get("obs_labels", model.row_labels))
        core = desugar(surface, action_alphabet=model.dts.actions, obs_alphabet=obs)
        return Problem.make(model.dts, core, options), None

    raise UsageError("spec file needs an 'objective' or 'formula' entry")


def _solve_options(args) -> SolveOptions:
    return SolveOptions(
        backend=args.backend,
        max_cegis_iters=args.max_iters,
        enum_budget=args.enum_budget,
        check_budget=args.check_budget,
        seed=args.seed,
        export_dialect=getattr(args, "dialect", "smtlib2"),
        export_path=getattr(args, "export", None),
    )


def _witness_traces(model: Model, witness: dict[str, Strategy]) -> list:
    return [correspond(model.dts, witness[var]) for var in sorted(witness)]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    model = load_model(args.model)
    problem, _spec = load_spec(args.spec, model, _solve_options(args))
    started = time.perf_counter()
    outcome = synthesize(problem)
    elapsed = time.perf_counter() - started
    print(f"outcome: {outcome.status}" +
          (f" ({outcome.reason})" if outcome.reason else ""))
    print(f"time: {elapsed:.3f}s")
    for key in sorted(outcome.stats):
        print(f"{key}: {outcome.stats[key]}")
    if outcome.witness:
        doc = witness_to_json(outcome.witness, outcome.verified)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(doc)
            print(f"witness: {args.out}")
        else:
            sys.stdout.write(doc)
    if outcome.is_realizable and args.render and model.grid is not None:
        traces = _witness_traces(model, outcome.witness or {})
        style = RenderStyle(row_gradient=bool(model.grid_opts
                                              and model.grid_opts.row_observation))
        with open(args.render, "w") as fh:
            fh.write(render_svg(model.grid, traces, style))
        print(f"figure: {args.render}")
    return {"realizable": EXIT_REALIZABLE,
            "unrealizable": EXIT_UNREALIZABLE}.get(outcome.status, EXIT_UNKNOWN)


def cmd_check(args) -> int:
    model = load_model(args.model)
    problem, _spec = load_spec(args.spec, model, _solve_options(args))
    try:
        with open(args.witness) as fh:
            witness, _ = witness_from_json(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read witness {args.witness!r}: {exc}") from exc
    result = check_witness(problem, witness, budget=args.check_budget,
                           seed=args.seed)
    print(f"witness {'passes' if result.ok else 'fails'} ({result.mode})")
    return EXIT_REALIZABLE if result.ok else EXIT_UNREALIZABLE


def cmd_horizon(args) -> int:
    if args.model:
        model = load_model(args.model)
        actions = model.dts.actions
        obs = model.row_labels or ("obs",)
    else:
        model = None
        actions = ("act",)  # placeholders: alphabet size never changes horizons
        obs = ("obs",)
    try:
        with open(args.spec) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read spec {args.spec!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {"formula": text}
    if "formula" in doc:
        surface = parse(doc["formula"])
    elif "objective" in doc and model is not None:
        from .objectives import instantiate
        surface = instantiate(objective_from_dict(doc), model.dts)
    else:
        raise UsageError("objective specs need --model for horizon analysis")
    core = desugar(surface, action_alphabet=actions, obs_alphabet=obs)
    hmap = horizons(core)
    width = max(len(v) for v in hmap) if hmap else 0
    for var, h in hmap.items():
        shown = "-inf" if h == NEG_INF else str(int(h))
        print(f"{var:<{width}}  {shown}")
    for var, h in hmap.items():
        shown = "-inf" if h == NEG_INF else str(int(h))
        print(f"H[{var}]={shown}")
    return EXIT_REALIZABLE


def cmd_encode(args) -> int:
    model = load_model(args.model)
    problem, _spec = load_spec(args.spec, model, _solve_options(args))
    encoding = encode_problem(problem)
    text = to_solver_text(encoding, args.dialect)
    side = sidecar_map(encoding, args.dialect)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        map_path = args.map or args.out + ".map.json"
        with open(map_path, "w") as fh:
            fh.write(side)
        print(f"encoding: {args.out}")
        print(f"variable map: {map_path}")
    else:
        sys.stdout.write(text)
    return EXIT_REALIZABLE


def cmd_render(args) -> int:
    model = load_model(args.model)
    if model.grid is None:
        raise UsageError("render needs a grid-map model")
    traces = []
    if args.witness:
        try:
            with open(args.witness) as fh:
                witness, _ = witness_from_json(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read witness {args.witness!r}: {exc}") from exc
        traces = _witness_traces(model, witness)
    style = RenderStyle(row_gradient=bool(model.grid_opts
                                          and model.grid_opts.row_observation))
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(render_svg(model.grid, traces, style))
        print(f"figure: {args.svg}")
    if args.ascii or not args.svg:
        sys.stdout.write(render_ascii(model.grid, traces))
    return EXIT_REALIZABLE


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

_BENCH_OBJECTIVES = {
    "iso": "init-state-opaque",
    "cso": "current-state-opaque",
    "isr": "init-state-robust",
    "ar": "action-robust",
    "sp": "shortest-path",
}


def _bench_cell(model_name: str, obj_key: str, T: int, seed: int,
                out_dir: str, figures: bool, queue) -> None:
    started = time.perf_counter()
    try:
        model = load_model(model_name)
        grid = model.grid
        spec = ObjectiveSpec(
            kind=_BENCH_OBJECTIVES[obj_key],
            horizon=T,
            init=grid.start_cells[0],
            goal_label="goal",
            init_region="init_region" if obj_key == "isr" else None,
            obs_labels=model.row_labels if obj_key in ("iso", "cso") else (),
        )
        problem = build_problem(spec, model.dts, SolveOptions(seed=seed))
        outcome = synthesize(problem)
        elapsed = time.perf_counter() - started
        tag = f"{model_name.split(':')[-1]}_{obj_key}"
        if outcome.witness:
            with open(os.path.join(out_dir, f"witness_{tag}.json"), "w") as fh:
                fh.write(witness_to_json(outcome.witness, outcome.verified))
        if outcome.is_realizable and grid is not None:
            traces = _witness_traces(model, outcome.witness or {})
            style = RenderStyle(row_gradient=True)
            with open(os.path.join(out_dir, f"fig_{tag}.svg"), "w") as fh:
                fh.write(render_svg(grid, traces, style))
            if figures:
                _bench_figure(grid, traces,
                              os.path.join(out_dir, f"fig_{tag}.png"),
                              f"{obj_key.upper()} T={T}")
        queue.put({
            "grid": model_name.split(":")[-1],
            "objective": obj_key.upper(),
            "T": T,
            "time_s": round(elapsed, 3),
            "outcome": outcome.status,
            "iterations": outcome.stats.get("iterations", ""),
        })
    except Exception as exc:  # pragma: no cover - defensive harness path
        queue.put({
            "grid": model_name.split(":")[-1],
            "objective": obj_key.upper(),
            "T": T,
            "time_s": round(time.perf_counter() - started, 3),
            "outcome": f"error: {exc}",
            "iterations": "",
        })


def _bench_figure(grid: GridMap, traces, path: str, title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from .render import trace_cells
    from .dts import CRASH, cell_coords

    color = {"#": (0.07, 0.07, 0.07), ".": (1.0, 1.0, 1.0),
             "S": (0.88, 0.33, 0.27), "R": (0.95, 0.63, 0.59),
             "G": (0.35, 0.70, 0.36)}
    img = [[color[ch] for ch in row] for row in grid.rows]
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.imshow(img, interpolation="nearest")
    palette = ("tab:blue", "tab:red", "tab:green", "tab:purple")
    for i, trace in enumerate(traces):
        cells = [c for c in trace_cells(grid, trace) if c != CRASH]
        rs = [cell_coords(c)[0] for c in cells]
        cs = [cell_coords(c)[1] for c in cells]
        off = (i - (len(traces) - 1) / 2) * 0.12
        ax.plot([c + off for c in cs], [r + off for r in rs],
                color=palette[i % len(palette)], linewidth=2.4, alpha=0.9)
        ax.plot(cs[0] + off, rs[0] + off, "o", color=palette[i % len(palette)])
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_bench(args) -> int:
    if args.list:
        print("builtin models:", ", ".join(builtin_names()))
        for kind, summary, variants in catalog():
            print(f"{kind:22s} {summary}  [{'/'.join(variants)}]")
        return EXIT_REALIZABLE

    os.makedirs(args.out_dir, exist_ok=True)
    grids = args.grids.split(",") if args.grids else ["grid10"]
    objectives = args.objectives.split(",") if args.objectives else list(_BENCH_OBJECTIVES)
    for o in objectives:
        if o not in _BENCH_OBJECTIVES:
            raise UsageError(f"unknown objective {o!r}; pick from "
                             f"{','.join(_BENCH_OBJECTIVES)}")
    default_T = {"grid10": 20, "grid20": 40}

    cells = []
    for g in grids:
        name = g if ":" in g or os.path.exists(g) else f"builtin:{g}"
        T = args.T if args.T else default_T.get(g.split(":")[-1], 20)
        for o in objectives:
            cells.append((name, o, T))

    rows = []
    pending = list(cells)
    running: list[tuple[mp.Process, mp.Queue, tuple, float]] = []
    jobs = max(1, args.jobs)
    while pending or running:
        while pending and len(running) < jobs:
            cell = pending.pop(0)
            queue: mp.Queue = mp.Queue()
            proc = mp.Process(target=_bench_cell,
                              args=(*cell, args.seed, args.out_dir,
                                    not args.no_figures, queue))
            proc.start()
            running.append((proc, queue, cell, time.perf_counter()))
        still = []
        for proc, queue, cell, t0 in running:
            timed_out = args.budget and (time.perf_counter() - t0) > args.budget
            if proc.is_alive() and not timed_out:
                still.append((proc, queue, cell, t0))
                continue
            if proc.is_alive():
                proc.terminate()
                proc.join()
                rows.append({"grid": cell[0].split(":")[-1],
                             "objective": cell[1].upper(), "T": cell[2],
                             "time_s": round(time.perf_counter() - t0, 3),
                             "outcome": "timeout", "iterations": ""})
            else:
                proc.join()
                try:
                    rows.append(queue.get_nowait())
                except Exception:
                    rows.append({"grid": cell[0].split(":")[-1],
                                 "objective": cell[1].upper(), "T": cell[2],
                                 "time_s": round(time.perf_counter() - t0, 3),
                                 "outcome": "error: no result", "iterations": ""})
        running = still
        if running:
            time.sleep(0.05)

    order = {(c[0].split(":")[-1], c[1].upper(), c[2]): i for i, c in enumerate(cells)}
    rows.sort(key=lambda r: order.get((r["grid"], r["objective"], r["T"]), 0))

    fields = ["grid", "objective", "T", "time_s", "outcome", "iterations"]
    csv_path = os.path.join(args.out_dir, "bench.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)

    buf = io.StringIO()
    widths = {f: max(len(f), *(len(str(r[f])) for r in rows)) if rows else len(f)
              for f in fields}
    buf.write("  ".join(f"{f:<{widths[f]}}" for f in fields) + "\n")
    for r in rows:
        buf.write("  ".join(f"{str(r[f]):<{widths[f]}}" for f in fields) + "\n")
    table = buf.getvalue()
    with open(os.path.join(args.out_dir, "bench.txt"), "w") as fh:
        fh.write(table)
    sys.stdout.write(table)
    print(f"report: {csv_path}")
    return EXIT_REALIZABLE


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="cegis",
                   choices=("cegis", "enumeration", "external"))
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--enum-budget", type=int, default=2_000_000)
    p.add_argument("--check-budget", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="hyperplan",
                  description="Strategy synthesis for bounded-horizon hyper "
                              "temporal logic objectives on discrete transition systems")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="solve a synthesis problem")
    p.add_argument("model")
    p.add_argument("spec")
    p.add_argument("--out", help="write the witness JSON here")
    p.add_argument("--render", help="write an SVG of the witness paths (grid models)")
    p.add_argument("--export", help="external backend: path for the exported text")
    p.add_argument("--dialect", default="smtlib2", choices=("smtlib2", "cnf-dimacs"))
    _add_solver_args(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("check", help="verify a witness JSON against a spec")
    p.add_argument("model")
    p.add_argument("spec")
    p.add_argument("witness")
    _add_solver_args(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("horizon", help="print the per-variable time horizons")
    p.add_argument("spec")
    p.add_argument("--model")
    p.set_defaults(func=cmd_horizon)

    p = sub.add_parser("encode", help="export constraint text for an external solver")
    p.add_argument("model")
    p.add_argument("spec")
    p.add_argument("--dialect", default="smtlib2", choices=("smtlib2", "cnf-dimacs"))
    p.add_argument("-o", "--out")
    p.add_argument("--map", help="sidecar variable-map path")
    _add_solver_args(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("render", help="draw a grid model and witness paths")
    p.add_argument("model")
    p.add_argument("--witness")
    p.add_argument("--svg")
    p.add_argument("--ascii", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="run the benchmark table")
    p.add_argument("--grids", help="comma list: grid10,grid20 or map paths")
    p.add_argument("--objectives", help=f"comma list of {','.join(_BENCH_OBJECTIVES)}")
    p.add_argument("--T", type=int, help="override the time bound")
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--budget", type=float, default=0.0,
                   help="per-cell wall-time budget in seconds (0 = none)")
    p.add_argument("--jobs", type=int, default=1,
                   help="cells to run in parallel (default sequential)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--list", action="store_true",
                   help="list builtin models and objective templates")
    p.set_defaults(func=cmd_bench)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
