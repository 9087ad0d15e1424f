"""Command-line scenario runner.

    hypstab run CONFIG.json [--out DIR] [--seed N] [--jobs K]
    hypstab calibrate CONFIG.json [--out DIR] [--seed N]

Exit codes: 0 success, 1 an acceptance criterion failed, 2 bad config,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import platform
import sys
from dataclasses import asdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .acceptance import CRITERIA, DEFAULT_SEED, fitted_constants
from .calibration import calibrate
from .config import ScenarioConfig, load
from .errors import BadParameter, ConfigError, CriterionFailure, NumericalFailure
from .front_tracking import ft_solve, phi_eps_compare
from .functionals_pcw import JumpTable, PiecewiseConstantFn, jump_strengths, stability_phi, table_Q, table_V
from .io import write_csv, write_json
from .wave_measures import (BVFunction, approx_sequence, measures_Q_hat, measures_upsilon_hat, wave_measures,
                            xi_hat)

DEFAULT_OUT = "hypstab_out"


# ---------------------------------------------------------------------------
# tasks: each returns (header, rows, extra) where extra is merged into the manifest


def _functional_row(model, label, u, consts):
    if isinstance(u, BVFunction) and not u.is_piecewise_constant():
        wm = wave_measures(model, u)
        v = sum(m.total_variation() for m in wm.mu)
        q = measures_Q_hat(wm)
        return [label, "bv", v, q, measures_upsilon_hat(wm, consts)]
    if isinstance(u, BVFunction):
        u = _as_pcf(model, u)
    tab = u if isinstance(u, JumpTable) else jump_strengths(model, u)
    v, q = table_V(tab), table_Q(tab)
    return [label, "jumps" if isinstance(u, JumpTable) else "pcf", v, q, v + consts.C0 * q]


def _as_pcf(model, u: BVFunction) -> PiecewiseConstantFn:
    """Exact conversion of a BV function without sloped pieces."""
    bp = u.breakpoints()
    if bp.size == 0:
        return PiecewiseConstantFn.constant(model)
    return PiecewiseConstantFn(bp, u(bp[:-1]), u.background)


def task_functionals(cfg, model, consts):
    rows = [_functional_row(model, "u", cfg.build_data(model), consts)]
    if cfg.initial_tilde is not None:
        rows.append(_functional_row(model, "u_tilde", cfg.build_data(model, "initial_tilde"), consts))
    return ["label", "kind", "V", "Q", "Upsilon"], rows, {}


def task_phi_pair(cfg, model, consts):
    u = cfg.build_data(model)
    ut = cfg.build_data(model, "initial_tilde")
    if isinstance(u, JumpTable) or isinstance(ut, JumpTable):
        raise ConfigError("phi-pair needs step functions or BV data, not jump tables")
    if isinstance(u, PiecewiseConstantFn) and isinstance(ut, PiecewiseConstantFn):
        phi = stability_phi(model, u, ut, consts)
        l1 = u.l1_distance(ut)
        xi = xi_hat(model, BVFunction.from_pcf(u), BVFunction.from_pcf(ut), consts)
    else:
        u = BVFunction.from_pcf(u) if isinstance(u, PiecewiseConstantFn) else u
        ut = BVFunction.from_pcf(ut) if isinstance(ut, PiecewiseConstantFn) else ut
        phi = l1 = float("nan")
        xi = xi_hat(model, u, ut, consts)
    return ["Phi", "L1", "Xi_hat"], [[phi, l1, xi]], {}


def _threshold(cfg, eps):
    th = cfg.threshold
    if th == "eps":
        return eps
    if th == "eps^2":
        return eps * eps
    return float(th)


def task_evolve(cfg, model, consts, out_dir):
    u = cfg.build_data(model)
    ut = cfg.build_data(model, "initial_tilde") if cfg.initial_tilde is not None else None
    for w in (u, ut):
        if w is not None and not isinstance(w, PiecewiseConstantFn):
            raise ConfigError("evolve needs piecewise constant initial data")
    times = cfg.sample_times if cfg.sample_times is not None else np.linspace(0.0, cfg.T, 11).tolist()
    if any(t > cfg.T for t in times):
        raise ConfigError("sample times must lie in [0, T]")
    header = ["eps", "t", "V", "Q", "Upsilon_eps", "nonphysical"]
    if ut is not None:
        header += ["Upsilon_eps_tilde", "Phi", "Phi_eps", "L1"]
    rows, logs, files = [], [], []
    for eps in cfg.eps:
        a = ft_solve(model, u, eps, cfg.T, consts, threshold=_threshold(cfg, eps))
        b = ft_solve(model, ut, eps, cfg.T, consts, threshold=_threshold(cfg, eps)) if ut is not None else None
        for t in times:
            tab = a.front_table(t)
            row = [eps, t, table_V(tab), table_Q(tab), a.upsilon_eps(t), float(np.sum(tab.strengths[:, model.n]))]
            if b is not None:
                cmp = phi_eps_compare(model, a, b, consts, t)
                row += [b.upsilon_eps(t), cmp["phi"], cmp["phi_eps"], cmp["l1"]]
            rows.append(row)
        logs.append({"eps": eps, "u": a.to_json(), "u_tilde": b.to_json() if b is not None else None})
        snap = a.snapshot(cfg.T)
        path = out_dir / f"{cfg.name}.snapshot_eps{eps:g}.csv"
        write_csv(path, ["x"] + [f"u{i}" for i in range(model.n)],
                  [[x] + list(v) for x, v in zip(snap.breakpoints, np.vstack([snap.values, snap.background]))]
                  if snap.breakpoints.size else [])
        files.append(str(path))
    ev = out_dir / cfg.outputs.get("events", f"{cfg.name}.events.json")
    write_json(ev, logs)
    return header, rows, {"events": str(ev), "snapshots": files}


def task_approx_study(cfg, model, consts):
    u = cfg.build_data(model)
    if isinstance(u, JumpTable):
        raise ConfigError("approx-study needs a BV or step function")
    u = BVFunction.from_pcf(u) if isinstance(u, PiecewiseConstantFn) else u
    wm = wave_measures(model, u)
    q = measures_Q_hat(wm)
    rows = []
    for nu in cfg.nu:
        wn = wave_measures(model, BVFunction.from_pcf(approx_sequence(u, nu)))
        qn = measures_Q_hat(wn)
        rows.append([nu, qn, q, abs(qn - q), measures_upsilon_hat(wn, consts)])
    return ["nu", "Qhat_nu", "Qhat", "abs_diff", "Upsilon_hat_nu"], rows, {}


def task_calibrate(cfg, model, consts, out_dir):
    seed = 0 if cfg.seed is None else cfg.seed
    delta = cfg.constants.get("delta", 0.1) if cfg.constants else 0.1
    res = calibrate(model, delta=delta, samples=cfg.samples or 2000, seed=seed)
    path = out_dir / cfg.outputs.get("constants", f"{cfg.name}.constants.json")
    write_json(path, res.to_json())
    header = ["C0", "kappa1", "kappa2", "delta", "samples", "max_dv_ratio", "max_strength_ratio", "seed"]
    return header, [[getattr(res, h) for h in header]], {"constants_file": str(path), "calibration": res.to_json()}


def _criterion_group(args):
    ids, seed = args
    return [CRITERIA[i](seed=seed).to_json() for i in ids]


def task_acceptance(cfg, out_dir, jobs=1, echo=print):
    seed = DEFAULT_SEED if cfg.seed is None else cfg.seed
    ids = sorted(cfg.criteria or CRITERIA)
    # 5, 6 and 7 share trajectory runs; keep them in one worker
    groups = [[i] for i in ids if i not in (5, 6, 7)] + ([[i for i in ids if i in (5, 6, 7)]]
                                                         if any(i in (5, 6, 7) for i in ids) else [])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_criterion_group, [(g, seed) for g in groups]))
    else:
        parts = [_criterion_group((g, seed)) for g in groups]
    results = sorted((r for p in parts for r in p), key=lambda r: r["criterion"])
    for r in results:
        echo(f"[{'PASS' if r['pass'] else 'FAIL'}] criterion {r['criterion']}: {r['title']}")
    report = out_dir / cfg.outputs.get("report", f"{cfg.name}.report.json")
    write_json(report, {"seed": seed, "criteria": results, "all_pass": all(r["pass"] for r in results)})
    rows = [[r["criterion"], r["title"], r["pass"]] for r in results]
    return ["criterion", "title", "pass"], rows, {"report": str(report), "failed": [r["criterion"] for r in results
                                                                                      if not r["pass"]]}


# ---------------------------------------------------------------------------


def versions():
    return {"hypstab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run_scenario(cfg: ScenarioConfig, out_dir: Path, jobs=1, echo=print) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.task == "acceptance":
        header, rows, extra = task_acceptance(cfg, out_dir, jobs, echo)
        consts_used = None
    else:
        model = cfg.build_model()
        consts = cfg.build_constants()
        consts_used = asdict(consts)
        if cfg.task == "functionals":
            header, rows, extra = task_functionals(cfg, model, consts)
        elif cfg.task == "phi-pair":
            header, rows, extra = task_phi_pair(cfg, model, consts)
        elif cfg.task == "evolve":
            header, rows, extra = task_evolve(cfg, model, consts, out_dir)
        elif cfg.task == "approx-study":
            header, rows, extra = task_approx_study(cfg, model, consts)
        else:
            header, rows, extra = task_calibrate(cfg, model, consts, out_dir)
    csv_path = write_csv(out_dir / cfg.outputs.get("csv", f"{cfg.name}.csv"), header, rows)
    manifest = {"config": cfg.to_dict(), "constants": consts_used, "fitted_constants": fitted_constants(),
                "versions": versions(), "csv": str(csv_path), "columns": header, **extra}
    write_json(out_dir / cfg.outputs.get("manifest", f"{cfg.name}.manifest.json"), manifest)
    return manifest


def _run_one(args):
    cfg, out_dir = args
    return run_scenario(cfg, out_dir, jobs=1, echo=lambda *_: None)


def build_parser():
    ap = argparse.ArgumentParser(prog="hypstab", description="Run stability-functional scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run the scenario(s) in a config file"),
                            ("calibrate", "calibrate C0 and kappa2 for the config's model")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (default $HYPSTAB_OUT or ./hypstab_out)")
        p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out or os.environ.get("HYPSTAB_OUT") or DEFAULT_OUT)
    try:
        configs = load(args.config)
        if args.seed is not None:
            configs = [c.with_seed(args.seed) for c in configs]
        if args.command == "calibrate":
            configs = [ScenarioConfig.from_dict({**c.to_dict(), "task": "calibrate"}) for c in configs]
        names = [c.name for c in configs]
        if len(set(names)) != len(names):
            configs = [ScenarioConfig.from_dict({**c.to_dict(), "name": f"{c.name}_{k}"})
                       for k, c in enumerate(configs)]
        if len(configs) > 1 and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                manifests = list(pool.map(_run_one, [(c, out_dir) for c in configs]))
        else:
            manifests = [run_scenario(c, out_dir, jobs=args.jobs) for c in configs]
        failed = [f for m in manifests for f in m.get("failed", [])]
        if failed:
            raise CriterionFailure(f"criteria failed: {failed}")
    except (ConfigError, BadParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CriterionFailure as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(f"wrote {len(manifests)} scenario(s) to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
