"""Command-line interface: verification suites, resource audits, training.

Subcommands:
  verify    --suite {circuits,lowering,derivatives,hjb}
  resources --construction {prop1,thm1,thm2,cor1} --L N [--D N] [--R N] [--native SET]
  train     [--config cfg.json] [--models a,b] [--runs N] [--epochs N]
            [--seed N] [--out DIR]

The worker pool for train jobs is capped by the QPINN_THREADS environment
variable.  All artifacts are deterministic given config and seeds; wall-ms
columns and the summary timestamp are the only timing-dependent fields.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import circuits as cir
from . import merton, models, qsp, training, verify
from .errors import ConfigError, DegenerateControlError

DEFAULT_CONFIG = {
    "market": {"r": 0.02, "T": 1.0, "gamma": 0.95, "mu": 0.0219, "sigma": 0.2},
    "weights": {"w_d": 1.0, "w_1": 1.0, "w_2": 5.0},
    "models": list(models.KINDS),
    "epochs": 1000,
    "n_runs": 10,
    "base_seed": 0,
    "n_interior": 50,
    "n_boundary": 50,
    "output_scale": 10.0,
    "eps": 1e-6,
    "grad_step": 1e-5,
    "checkpoint_every": None,
    "out_dir": "runs",
}

_SCHEMA_KEYS = {k: type(v) for k, v in DEFAULT_CONFIG.items()}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        with open(path) as f:
            doc = json.load(f)
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        for key, val in doc.items():
            if key not in _SCHEMA_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if key in ("market", "weights"):
                if not isinstance(val, dict):
                    raise ConfigError(f"{key} must be an object")
                unknown = set(val) - set(DEFAULT_CONFIG[key])
                if unknown:
                    raise ConfigError(f"unknown {key} keys {sorted(unknown)}")
                cfg[key].update({k: float(v) for k, v in val.items()})
            else:
                cfg[key] = val
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    for kind in cfg["models"]:
        if kind not in models.KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
    if not isinstance(cfg["epochs"], int) or not 1 <= cfg["epochs"] <= 1000:
        raise ConfigError("epochs must be an integer in [1, 1000]")
    if not isinstance(cfg["n_runs"], int) or cfg["n_runs"] < 1:
        raise ConfigError("n_runs must be a positive integer")
    return cfg


# ---------------------------------------------------------------------------
# verify


def cmd_verify(suite: str, seed: int = 0, out: str | None = None) -> int:
    report = verify.run_suite(suite, seed)
    for c in report["checks"]:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}")
    if out:
        Path(out).write_text(json.dumps(report, indent=2))
    print(f"suite {suite}: {'PASS' if report['passed'] else 'FAIL'}")
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# resources


def _rows(pairs):
    return [
        {"metric": m, "measured": a, "formula": b, "relation": rel,
         "passed": (a == b) if rel == "==" else (a <= b)}
        for m, a, b, rel in pairs
    ]


def resource_report(construction: str, L: int, D: int, R: int, native: str) -> dict:
    native_set = (cir.NativeGateSet.CNOT_SINGLE_QUBIT if native == "cnot-single-qubit"
                  else cir.NativeGateSet.DOUBLE_CONTROLLED)
    if construction == "prop1":
        circ = qsp.univariate_model_circuit(L)
        if native_set is cir.NativeGateSet.CNOT_SINGLE_QUBIT:
            low = cir.lower_to_cnot_single(circ)
            rep = cir.count_resources(low, native_set)
            depth_no_x = cir.greedy_depth([g for g in low.gates if g.kind != "x"])
            rows = _rows([
                ("width", rep.width, 3, "=="),
                ("n_params", rep.n_params, 2 * L + 1, "=="),
                ("n_single_qubit", rep.n_single_qubit, 36 * L, "<="),
                ("n_cnot", rep.n_cnot, 32 * L, "<="),
                ("depth (X-gates excluded)", depth_no_x, 60 * L - 5, "<="),
            ])
        else:
            rep = cir.count_resources(circ, native_set)
            rows = _rows([
                ("width", rep.width, 3, "=="),
                ("n_params", rep.n_params, 2 * L + 1, "=="),
                ("n_multi_controlled", rep.n_multi_controlled, 4 * L, "=="),
                ("n_single_qubit (Hadamards)", rep.n_single_qubit, 4, "=="),
                ("depth", rep.depth, 4 * L + 2, "<="),
            ])
    elif construction == "cor1":
        circ = qsp.rank1_circuit_template(D, L)
        rep = cir.count_resources(circ, cir.NativeGateSet.DOUBLE_CONTROLLED)
        rows = _rows([
            ("width", rep.width, 2 * D + 1, "=="),
            ("n_params", rep.n_params, (2 * L + 1) * D, "=="),
            ("depth", rep.depth, 4 * L * D + 2, "<="),
        ])
    elif construction == "thm1":
        indices = [tuple(idx) for idx in np.ndindex(*(L + 1,) * D)]
        circ = qsp.lcu_circuit_template(indices, D, L)
        rep = cir.count_resources(circ, cir.NativeGateSet.DOUBLE_CONTROLLED)
        t_count = (L + 1) ** D
        rows = _rows([
            ("width", rep.width, D + math.ceil(math.log2(t_count)) + 1, "=="),
            ("n_params", rep.n_params, t_count * D * (L + 1), "<="),
        ])
    elif construction == "thm2":
        circ = qsp.td_circuit_template(R, D, L)
        rep = cir.count_resources(circ, cir.NativeGateSet.DOUBLE_CONTROLLED)
        rows = _rows([
            ("width", rep.width, 2 * D + math.ceil(math.log2(R)) + 1, "=="),
            ("n_params", rep.n_params, R * D * (2 * L + 1), "=="),
        ])
    else:
        raise ValueError(f"unknown construction {construction!r}")
    return {
        "construction": construction,
        "L": L, "D": D, "R": R, "native": native,
        "report": rep.to_json_dict(),
        "checks": rows,
        "passed": all(r["passed"] for r in rows),
    }


def cmd_resources(construction: str, L: int, D: int, R: int, native: str,
                  out: str | None = None) -> int:
    doc = resource_report(construction, L, D, R, native)
    print(f"{construction} (L={L}, D={D}, R={R}, native={native})")
    for r in doc["checks"]:
        print(f"[{'PASS' if r['passed'] else 'FAIL'}] {r['metric']}: "
              f"measured {r['measured']} {r['relation']} formula {r['formula']}")
    if out:
        Path(out).write_text(json.dumps(doc, indent=2))
    return 0 if doc["passed"] else 1


# ---------------------------------------------------------------------------
# train


def _train_job(args):
    kind, scale, cfg, market, weights, seed = args
    spec = models.ModelSpec(kind, output_scale=scale)
    return kind, seed, training.train_run(spec, cfg, market, weights, seed)


def _pool_size(n_jobs: int) -> int:
    env = os.environ.get("QPINN_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _probe_points():
    return [(0.25, 0.3), (0.5, 0.5), (0.75, 0.4), (0.4, 0.8), (0.6, 0.2)]


def cmd_train(cfg: dict) -> int:
    market = merton.MarketParams(**cfg["market"])
    weights = merton.LossWeights(**cfg["weights"])
    tcfg = training.TrainConfig(
        epochs=cfg["epochs"], n_runs=cfg["n_runs"], base_seed=cfg["base_seed"],
        eps=cfg["eps"], n_interior=cfg["n_interior"], n_boundary=cfg["n_boundary"],
        grad_step=cfg["grad_step"], checkpoint_every=cfg["checkpoint_every"],
    )
    out = Path(cfg["out_dir"])
    (out / "runs").mkdir(parents=True, exist_ok=True)

    jobs = [(kind, cfg["output_scale"], tcfg, market, weights, tcfg.base_seed + i)
            for kind in cfg["models"] for i in range(tcfg.n_runs)]
    workers = _pool_size(len(jobs))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(j) for j in jobs]

    grid = np.linspace(0.01, 0.99, 50)
    tg, xg = np.meshgrid(grid, grid, indexing="ij")
    sol = merton.AnalyticalSolution(market)
    analytic_surface = sol.values(tg.ravel(), xg.ravel())
    _write_surface(out / "surface_analytical.csv", tg, xg, analytic_surface)
    slice_x = grid
    slice_cols = {"analytical": sol.values(np.full_like(slice_x, 0.5), slice_x)}

    summary = {"models": {}, "config": cfg,
               "metadata": {"timestamp": datetime.datetime.now().isoformat(),
                            "geo_std_convention": "population"}}
    for kind in cfg["models"]:
        logs = [log for k, _, log in results if k == kind]
        seeds = [s for k, s, _ in results if k == kind]
        spec_for_kind = models.ModelSpec(kind, output_scale=cfg["output_scale"])
        for s, log in zip(seeds, logs):
            training.write_run_csv(out / "runs" / f"{kind}_seed{s}.csv", log)
            for epoch, params in log.checkpoints:
                doc = models.params_to_json_dict(spec_for_kind, params)
                doc["epoch"] = epoch
                (out / "runs" / f"{kind}_seed{s}_ckpt{epoch}.json").write_text(
                    json.dumps(doc))
        complete = [log for log in logs if log.aborted is None]
        entry = {"seeds": seeds,
                 "aborted": {s: log.aborted for s, log in zip(seeds, logs) if log.aborted}}
        if complete:
            agg = training.aggregate(complete)
            training.write_aggregate_csv(out / f"{kind}_aggregate.csv", agg)
            finals = [log.losses[-1].total for log in complete]
            best = complete[int(np.argmin(finals))]
            spec = models.ModelSpec(kind, output_scale=cfg["output_scale"])
            fn = models.ModelFunction(spec, best.final_params)
            surf = fn.values(tg.ravel(), xg.ravel())
            _write_surface(out / f"surface_{kind}.csv", tg, xg, surf)
            slice_cols[kind] = fn.values(np.full_like(slice_x, 0.5), slice_x)
            rel_err = float(np.mean(np.abs(surf - analytic_surface)
                                    / np.abs(analytic_surface)))
            entry.update({
                "final_losses": finals,
                "final_geo_mean": float(agg.geo_mean[-1]),
                "final_geo_std": float(agg.geo_std[-1]),
                "best_seed": best.seed,
                "best_mean_rel_error": rel_err,
                "alpha_hat": _recover_controls(fn, market),
                "final_params": models.params_to_json_dict(spec, best.final_params),
            })
        summary["models"][kind] = entry

    _write_slice(out / "slice_t05.csv", slice_x, slice_cols)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"artifacts written to {out}/")
    for kind, entry in summary["models"].items():
        if "final_geo_mean" in entry:
            print(f"  {kind}: final geometric-mean loss {entry['final_geo_mean']:.6g}")
    return 0


def _recover_controls(fn: models.ModelFunction, market: merton.MarketParams) -> list:
    controls = []
    for t, x in _probe_points():
        _, _, v_x, v_xx = (a[0] for a in fn.derivatives(np.array([t]), np.array([x])))
        try:
            controls.append({"t": t, "x": x,
                             "alpha": merton.optimal_control(v_x, v_xx, x, market)})
        except DegenerateControlError:
            controls.append({"t": t, "x": x, "alpha": None})
    return controls


def _write_surface(path, tg, xg, values):
    with open(path, "w") as f:
        f.write("t,x,value\n")
        for t, x, v in zip(tg.ravel(), xg.ravel(), np.asarray(values).ravel()):
            f.write(f"{t:.17g},{x:.17g},{v:.17g}\n")


def _write_slice(path, xs, cols: dict):
    names = list(cols)
    with open(path, "w") as f:
        f.write("x," + ",".join(names) + "\n")
        for i, x in enumerate(xs):
            f.write(f"{x:.17g}," + ",".join(f"{cols[n][i]:.17g}" for n in names) + "\n")


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qpinn")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", required=True, choices=sorted(verify.SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write a JSON report here")

    p = sub.add_parser("resources", help="audit circuit resources against the bounds")
    p.add_argument("--construction", required=True,
                   choices=["prop1", "thm1", "thm2", "cor1"])
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--native", default="double-controlled",
                   choices=["double-controlled", "cnot-single-qubit"])
    p.add_argument("--out", default=None)

    p = sub.add_parser("train", help="train the four models and export artifacts")
    p.add_argument("--config", default=None)
    p.add_argument("--models", default=None, help="comma-separated model kinds")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.out)
    if args.command == "resources":
        return cmd_resources(args.construction, args.L, args.D, args.R,
                             args.native, args.out)
    overrides = {
        "models": args.models.split(",") if args.models else None,
        "n_runs": args.runs,
        "epochs": args.epochs,
        "base_seed": args.seed,
        "out_dir": args.out,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return cmd_train(cfg)


if __name__ == "__main__":
    sys.exit(main())
