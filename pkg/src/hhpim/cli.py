"""Command-line entry point: ``hhpim {lut,compare,verify,gen-workload}``.

Outputs are CSV plus a JSON summary; every file carries the config hash and
seed.  Exit codes: 0 ok, 3 config error, 4 infeasible placement, 5 verification
failure (2 is left to argparse for usage errors).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from hhpim import __version__
from hhpim.model import DEFAULT_ARCHS, ConfigError, load_arch
from hhpim.placement import PlacementError
from hhpim.sim import (SliceConfig, SliceOverrun, compare_architectures, prepare_all,
                       write_traces)
from hhpim.workload import (MODELS, SCENARIOS, ScenarioParams, UnknownScenario, dumps_stream,
                            generate, get_model, loads_stream)

log = logging.getLogger("hhpim")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_INFEASIBLE = 4
EXIT_VERIFY = 5


def _combined_hash(archs, *extra) -> str:
    h = hashlib.sha256()
    for a in archs:
        h.update(a.config_hash().encode())
    for e in extra:
        h.update(repr(e).encode())
    return h.hexdigest()[:12]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _prep_kwargs(args) -> dict:
    return {
        "budget_fraction": args.budget_fraction,
        "static_weight": 1.0 if args.static_aware else 0.0,
        "weight_groups": args.resolution,
        "max_inferences": args.max_inferences,
        "T_ns": None if args.slice_ms is None else args.slice_ms * 1e6,
    }


def cmd_lut(args) -> int:
    arch = load_arch(args.arch[0] if args.arch else "hhpim")
    model = get_model(args.model)
    T, (prep,) = prepare_all([arch], model, **_prep_kwargs(args))
    lut = prep.lut
    peak = lut.min_feasible_index
    if peak is None:
        raise PlacementError(f"{arch.name}: no feasible placement on the grid")
    e_peak = float(lut.energy[peak])
    out = _out_dir(args)
    stem = f"lut_{Path(arch.source).stem or arch.name}_{args.model}"
    chash = _combined_hash([arch], model, args.seed, args.static_aware)
    K = model.param_count
    with open(out / f"{stem}.csv", "w") as fh:
        fh.write(f"# arch: {arch.name}\n# model: {model.name}\n# config_hash: {chash}\n")
        fh.write(f"# seed: {args.seed}\n# T_ns: {T:.6g}\n# grid: {prep.grid}\n")
        cols = ["t_index", "t_constraint_ns", "feasible", "E_task_pJ", "E_task_norm"]
        cols += [f"util_{s}_%" for s in lut.space_ids]
        fh.write(",".join(cols) + "\n")
        rows = [(str(t), f"{t * lut.unit_ns:.6g}", t) for t in range(lut.steps + 1)]
        for label, t_txt, t in rows:
            if lut.feasible[t]:
                x = lut.x_weights[t]
                e = float(lut.energy[t])
                vals = [1, f"{e:.6g}", f"{e / e_peak:.6f}"] + [f"{100 * v / K:.3f}" for v in x]
            else:
                vals = [0, "inf", "inf"] + ["" for _ in lut.space_ids]
            fh.write(",".join([label, t_txt] + [str(v) for v in vals]) + "\n")
        x = lut.relaxed_x
        fh.write(",".join(["relaxed", "inf", "1", f"{lut.relaxed_energy:.6g}",
                           f"{lut.relaxed_energy / e_peak:.6f}"]
                          + [f"{100 * v / K:.3f}" for v in x]) + "\n")
    peak_x = dict(zip(lut.space_ids, (int(v) for v in lut.x_weights[peak])))
    summary = {
        "arch": arch.name, "model": model.name, "config_hash": chash, "seed": args.seed,
        "T_ns": T, "grid": {"unit_ns": prep.grid.unit_ns, "steps": prep.grid.steps,
                            "weight_unit": prep.grid.weight_unit},
        "peak_t_constraint_ns": peak * lut.unit_ns, "peak_E_task_pJ": e_peak,
        "peak_placement": peak_x,
        "relaxed_placement": dict(zip(lut.space_ids, lut.relaxed_x)),
        "relaxed_E_task_pJ": lut.relaxed_energy,
    }
    _write_json(out / f"{stem}.json", summary)
    print(f"wrote {out / (stem + '.csv')} ({lut.steps + 2} rows)")
    return EXIT_OK


def _arch_list(names):
    names = list(names or DEFAULT_ARCHS)
    return [load_arch(n) for n in names]


def cmd_compare(args) -> int:
    archs = _arch_list(args.arch)
    scenarios = args.scenario or list(SCENARIOS)
    models = args.model.split(",") if args.model else ["efficientnet"]
    out = _out_dir(args)
    params = ScenarioParams(low_fraction=args.low_fraction)
    ref = archs[-1].name
    rows = []
    traces = []
    totals = {}
    slice_lengths = {}
    chash = _combined_hash(archs, models, scenarios, args.slices, args.seed, params,
                           args.budget_fraction, args.static_aware, args.resolution)
    for mname in models:
        model = get_model(mname)
        T, preps = prepare_all(archs, model, **_prep_kwargs(args))
        slice_lengths[model.name] = T
        cfg = SliceConfig(T, args.max_inferences, args.slices, args.budget_fraction)
        for sc in scenarios:
            stream = generate(sc, args.slices, args.max_inferences, args.seed, params, model.name)
            res = compare_architectures(preps, stream, cfg, reference=ref)
            for name, r in res["results"].items():
                traces.append(r)
                totals[f"{model.name}/{stream.scenario}/{name}"] = {
                    **r.totals(), "misses": r.misses, "max_latency_ns": r.max_latency_ns}
            for name, es in res["savings"].items():
                if name == ref:
                    continue
                rows.append((model.name, stream.scenario, name,
                             res["results"][ref].total_pj, res["results"][name].total_pj, es))
    meta = {"config_hash": chash, "seed": args.seed, "reference": ref,
            "slice_ns": ";".join(f"{k}={v:.6g}" for k, v in slice_lengths.items())}
    with open(out / "traces.csv", "w") as fh:
        write_traces(traces, fh, meta)
    with open(out / "savings.csv", "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        fh.write("model,scenario,baseline,E_ref_pJ,E_baseline_pJ,ES_%\n")
        for m, sc, name, e_ref, e_b, es in rows:
            fh.write(f"{m},{sc},{name},{e_ref:.9g},{e_b:.9g},{100 * es:.4f}\n")
    averages = {}
    for _, _, name, _, _, es in rows:
        averages.setdefault(name, []).append(es)
    summary = {
        **meta, "slice_ns": slice_lengths, "models": [get_model(m).name for m in models],
        "scenarios": list(scenarios), "slices": args.slices,
        "architectures": [a.name for a in archs],
        "totals": totals,
        "savings_%": {f"{m}/{sc}/{name}": round(100 * es, 4) for m, sc, name, _, _, es in rows},
        "average_savings_%": {k: round(100 * sum(v) / len(v), 4) for k, v in sorted(averages.items())},
        "deadline_misses": sum(t["misses"] for t in totals.values()),
    }
    _write_json(out / "summary.json", summary)
    for name, v in summary["average_savings_%"].items():
        print(f"{ref} vs {name}: {v:.2f}% average savings")
    return EXIT_OK


def cmd_verify(args) -> int:
    from hhpim.verify import run_oracle, run_properties
    report = run_oracle(args.trials, args.seed, args.max_n, args.max_k, args.max_steps,
                        mutate=args.mutate)
    run_properties(report, seed=args.seed)
    for w in report.warnings:
        log.warning(w)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_gen_workload(args) -> int:
    scenarios = args.scenario or list(SCENARIOS)
    params = ScenarioParams(low_fraction=args.low_fraction)
    out = _out_dir(args)
    for sc in scenarios:
        st = generate(sc, args.slices, args.max_inferences, args.seed, params, args.model or "")
        path = out / f"workload_{st.scenario}.csv"
        path.write_text(dumps_stream(st))
        # round-trip guard so a written file always reloads to the same stream
        assert loads_stream(path.read_text()) == st
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hhpim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model_default="efficientnet"):
        sp.add_argument("--arch", action="append",
                        help="architecture file or bundled name (repeatable; last is the reference)")
        sp.add_argument("--model", default=model_default,
                        help=f"model profile(s), comma separated: {', '.join(MODELS)}")
        sp.add_argument("--scenario", action="append", help="case1..case6 (repeatable)")
        sp.add_argument("--slices", type=int, default=50)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out")
        sp.add_argument("--resolution", type=int, default=None,
                        help="number of weight groups (overrides calibration)")
        sp.add_argument("--budget-fraction", type=float, default=0.01)
        sp.add_argument("--max-inferences", type=int, default=10)
        sp.add_argument("--slice-ms", type=float, default=None,
                        help="slice length; default fits max-inferences at peak")
        sp.add_argument("--low-fraction", type=float, default=0.2)
        sp.add_argument("--static-aware", action="store_true",
                        help="charge standby power inside the optimizer")

    sp = sub.add_parser("lut", help="sweep the placement table over t_constraint")
    common(sp)
    sp.set_defaults(func=cmd_lut)
    sp = sub.add_parser("compare", help="simulate architectures over scenarios")
    common(sp)
    sp.set_defaults(func=cmd_compare)
    sp = sub.add_parser("gen-workload", help="write arrival streams")
    common(sp, model_default="")
    sp.set_defaults(func=cmd_gen_workload)
    sp = sub.add_parser("verify", help="solver vs exhaustive oracle")
    sp.add_argument("--trials", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-n", type=int, default=4)
    sp.add_argument("--max-k", type=int, default=8)
    sp.add_argument("--max-steps", type=int, default=40)
    sp.add_argument("--mutate", action="store_true", help="perturb solver energies (sanity check)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownScenario) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlacementError, SliceOverrun) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
