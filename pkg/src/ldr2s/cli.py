"""Experiment runner: builds an instance, runs the requested bound
pipelines on a training sample, evaluates them on an independent
sample, and emits normalized result tables (csv / json / text)."""

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidConfig, Ldr2sError
from .dual import build_dual_saa, level_solve
from .instances import capexp_model, inventory_model
from .policies import (evaluate_dual_bound, gap_estimate, simulate_ldr_policy,
                       simulate_stt_policy, tune_rho)
from .primal import benders_solve, build_primal_saa
from .static_rules import build_static, evaluate_static, solve_static_sampled
from .stochastic import SampleConfig, sample_paths
from .lp import solve_lp

METHOD_ORDER = ("static-exact", "static-sampled", "ldr2s-primal",
                "ldr2s-dual", "stt", "gap")
_DEPS = {"stt": ("ldr2s-primal",),
         "gap": ("ldr2s-primal", "ldr2s-dual")}


@dataclass
class ExperimentConfig:
    model: str
    T: int
    C: float | None = None
    methods: tuple = METHOD_ORDER
    N: int | None = None
    N_eval: int | None = None
    seed: int = 0
    ci_level: float = 0.95
    tol_benders: float = 1e-7
    tol_level: float = 1e-5
    projection: str = "fw"
    expectation: str = "analytic"
    rho_sample: int = 100

    def __post_init__(self):
        if self.model not in ("inventory", "capexp"):
            raise InvalidConfig(f"unknown model {self.model!r}")
        if self.model == "capexp" and self.C is None:
            raise InvalidConfig("capexp needs --C")
        bad = [m for m in self.methods if m not in METHOD_ORDER]
        if bad:
            raise InvalidConfig(f"unknown methods {bad}")
        if "static-exact" in self.methods and self.model != "inventory":
            raise InvalidConfig("static-exact requires the inventory model")
        if self.N is None:
            self.N = 250 if self.model == "inventory" else 150 * self.T
        if self.N_eval is None:
            self.N_eval = 100_000 if self.model == "inventory" else 5000 * self.T
        if self.projection not in ("fw", "linf"):
            raise InvalidConfig("projection must be fw or linf")
        if self.expectation not in ("analytic", "empirical"):
            raise InvalidConfig("expectation must be analytic or empirical")
        self.methods = tuple(m for m in METHOD_ORDER if m in set(self.methods))

    def with_dependencies(self):
        wanted = set(self.methods)
        for m in self.methods:
            wanted.update(_DEPS.get(m, ()))
        return tuple(m for m in METHOD_ORDER if m in wanted)


@dataclass
class MethodRow:
    method: str
    bound_kind: str            # upper | lower | gap
    mean: float | None = None
    halfwidth: float | None = None
    infeas_fraction: float | None = None
    normalized_mean: float | None = None
    gap_pct: float | None = None
    seconds: float = 0.0
    error: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class BoundReport:
    config: ExperimentConfig
    rows: list
    u_delta_pct: float | None = None
    l_delta_pct: float | None = None

    def row(self, method, kind):
        for r in self.rows:
            if r.method == method and r.bound_kind == kind:
                return r
        return None

    @property
    def failed(self):
        return [r for r in self.rows if r.error is not None]


def _log_dicts(entries):
    return [asdict(e) for e in entries]


def run_experiment(config: ExperimentConfig) -> BoundReport:
    """Execute the configured methods; failures are captured per method
    (partial reports are permitted)."""
    if config.model == "inventory":
        model = inventory_model(config.T)
    else:
        model = capexp_model(config.T, config.C)
    sc = SampleConfig(N=config.N, N_eval=config.N_eval, seed=config.seed)
    train = sc.train_paths(model.proc)
    evalp = sc.eval_paths(model.proc)
    methods = config.with_dependencies()
    rows: list[MethodRow] = []
    state = {}

    def guard(method, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
            for r in out:
                r.seconds = round(time.perf_counter() - t0, 6)
            rows.extend(out)
        except Ldr2sError as exc:
            rows.append(MethodRow(method=method, bound_kind="error",
                                  seconds=round(time.perf_counter() - t0, 6),
                                  error=f"{type(exc).__name__}: {exc}"))

    if "static-exact" in methods:
        def _static_exact():
            bp = build_static(model, "primal", "exact")
            vp, cp = bp.extract(solve_lp(bp.lp))
            bd = build_static(model, "dual", "exact")
            vd, cd = bd.extract(solve_lp(bd.lp))
            state["static-exact"] = (vp, vd)
            gap = 100.0 * (vp - vd) / vp
            return [
                MethodRow("static-exact", "upper", mean=vp, halfwidth=0.0,
                          infeas_fraction=0.0, gap_pct=gap),
                MethodRow("static-exact", "lower", mean=vd, halfwidth=0.0,
                          infeas_fraction=0.0, gap_pct=gap),
            ]
        guard("static-exact", _static_exact)

    if "static-sampled" in methods:
        def _static_sampled():
            out = []
            for side, kind in (("primal", "upper"), ("dual", "lower")):
                val, coeffs, info = solve_static_sampled(
                    model, side, train, mode=config.expectation)
                if coeffs is None:
                    out.append(MethodRow("static-sampled", kind,
                                         error="sampled problem infeasible"))
                    continue
                rep = evaluate_static(model, coeffs, evalp,
                                      level=config.ci_level)
                ci = rep.ci
                out.append(MethodRow(
                    "static-sampled", kind,
                    mean=None if ci is None else ci.mean,
                    halfwidth=None if ci is None else ci.halfwidth,
                    infeas_fraction=rep.infeas_fraction,
                    extra={"sampled_objective": val,
                           "rows": info.rows, "rounds": info.rounds}))
                state[("static-sampled", side)] = (val, coeffs, rep)
            return out
        guard("static-sampled", _static_sampled)

    if "ldr2s-primal" in methods:
        def _primal():
            saa = build_primal_saa(model, train, mode=config.expectation)
            res = benders_solve(saa, tol_violation=config.tol_benders)
            state["primal"] = res
            run = simulate_ldr_policy(model, res.x1, res.beta, evalp,
                                      level=config.ci_level)
            state["primal-eval"] = run
            ci = run.ci
            return [MethodRow(
                "ldr2s-primal", "upper",
                mean=None if ci is None else ci.mean,
                halfwidth=None if ci is None else ci.halfwidth,
                infeas_fraction=run.infeas_fraction,
                extra={"saa_objective": res.objective,
                       "iterations": len(res.log),
                       "log": _log_dicts(res.log)})]
        guard("ldr2s-primal", _primal)

    if "ldr2s-dual" in methods:
        def _dual():
            saa = build_dual_saa(model, train, mode=config.expectation)
            res = level_solve(saa, tol=config.tol_level,
                              projection=config.projection)
            state["dual"] = res
            run = evaluate_dual_bound(model, res.gamma1, res.lam, evalp,
                                      level=config.ci_level)
            state["dual-eval"] = run
            ci = run.ci
            return [MethodRow(
                "ldr2s-dual", "lower", mean=ci.mean, halfwidth=ci.halfwidth,
                infeas_fraction=0.0,
                extra={"LB": res.LB, "UB": res.UB,
                       "iterations": len(res.log),
                       "log": _log_dicts(res.log)})]
        guard("ldr2s-dual", _dual)

    if "stt" in methods and "primal" in state:
        def _stt():
            res = state["primal"]
            tune = sc.tune_paths(model.proc, config.rho_sample)
            rho, evals = tune_rho(model, res.x1, res.beta, tune)
            run = simulate_stt_policy(model, res.x1, res.beta, rho, evalp,
                                      level=config.ci_level)
            state["stt-eval"] = run
            ci = run.ci
            return [MethodRow(
                "stt", "upper", mean=ci.mean, halfwidth=ci.halfwidth,
                infeas_fraction=0.0,
                extra={"rho": rho, "rho_evaluations": len(evals)})]
        guard("stt", _stt)
    elif "stt" in methods:
        rows.append(MethodRow("stt", "error",
                              error="requires ldr2s-primal (failed)"))

    if "gap" in methods and "primal" in state and "dual" in state:
        def _gap():
            pres, dres = state["primal"], state["dual"]
            gap = gap_estimate(model, (pres.x1, pres.beta),
                               (dres.gamma1, dres.lam), evalp,
                               level=config.ci_level)
            ci = gap.ci
            return [MethodRow(
                "gap", "gap",
                mean=None if ci is None else ci.mean,
                halfwidth=None if ci is None else ci.halfwidth,
                infeas_fraction=gap.dropped_fraction)]
        guard("gap", _gap)
    elif "gap" in methods:
        rows.append(MethodRow("gap", "error",
                              error="requires ldr2s-primal and ldr2s-dual"))

    report = BoundReport(config=config, rows=rows)
    _postprocess(report)
    return report


def _postprocess(report: BoundReport):
    dual_row = report.row("ldr2s-dual", "lower")
    divisor = dual_row.mean if dual_row and dual_row.mean else None
    for r in report.rows:
        if divisor and r.mean is not None and r.bound_kind in ("upper", "lower"):
            r.normalized_mean = 100.0 * r.mean / divisor
    ub_row = report.row("stt", "upper") or report.row("ldr2s-primal", "upper")
    if ub_row and dual_row and ub_row.mean is not None and dual_row.mean:
        ub_hi = ub_row.mean + (ub_row.halfwidth or 0.0)
        lb_lo = dual_row.mean - (dual_row.halfwidth or 0.0)
        gp = 100.0 * (ub_hi - lb_lo) / ub_hi
        ub_row.gap_pct = gp
        dual_row.gap_pct = gp
    s_up = report.row("static-sampled", "upper") or report.row("static-exact", "upper")
    s_lo = report.row("static-sampled", "lower") or report.row("static-exact", "lower")
    if (s_up and s_up.mean is not None and s_up.halfwidth is not None
            and s_lo and s_lo.mean is not None):
        s_hi = s_up.mean + (s_up.halfwidth or 0.0)
        s_llo = s_lo.mean - (s_lo.halfwidth or 0.0)
        sgp = 100.0 * (s_hi - s_llo) / s_hi
        if s_up.gap_pct is None:
            s_up.gap_pct = sgp
        if s_lo.gap_pct is None:
            s_lo.gap_pct = sgp
    if s_up and ub_row and s_up.mean is not None and ub_row.mean:
        report.u_delta_pct = 100.0 * (s_up.mean - ub_row.mean) / ub_row.mean
    if s_lo and dual_row and s_lo.mean is not None and dual_row.mean:
        s_llo = s_lo.mean - (s_lo.halfwidth or 0.0)
        lb_lo = dual_row.mean - (dual_row.halfwidth or 0.0)
        report.l_delta_pct = 100.0 * (s_llo - lb_lo) / lb_lo


CSV_COLUMNS = ("model", "T", "C", "method", "bound_kind", "mean", "halfwidth",
               "infeas_pct", "normalized_mean", "gap_pct", "seconds")


def _fmt(x, sig=6):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{sig}g}"
    return str(x)


def emit(report: BoundReport, fmt: str, destination) -> None:
    """Write the report; destination is a path or '-' for stdout."""
    cfg = report.config
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in report.rows:
            if r.error is not None:
                continue
            lines.append(",".join([
                cfg.model, str(cfg.T), _fmt(cfg.C), r.method, r.bound_kind,
                _fmt(r.mean), _fmt(r.halfwidth),
                _fmt(None if r.infeas_fraction is None
                     else 100.0 * r.infeas_fraction),
                _fmt(r.normalized_mean), _fmt(r.gap_pct), _fmt(r.seconds),
            ]))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = {
            "config": asdict(cfg),
            "u_delta_pct": report.u_delta_pct,
            "l_delta_pct": report.l_delta_pct,
            "rows": [asdict(r) for r in report.rows],
        }
        text = json.dumps(payload, indent=2, default=float) + "\n"
    elif fmt == "text-table":
        hdr = (f"{cfg.model} T={cfg.T}"
               + (f" C={cfg.C:g}" if cfg.C is not None else "")
               + f" N={cfg.N} N'={cfg.N_eval} seed={cfg.seed}")
        lines = [hdr, "-" * len(hdr)]
        lines.append(f"{'method':<16}{'bound':<8}{'value':>18}"
                     f"{'norm.':>8}{'Inf.(%)':>9}{'Gap(%)':>8}")
        for r in report.rows:
            if r.error is not None:
                lines.append(f"{r.method:<16}{'!':<8}{r.error}")
                continue
            if r.mean is None:
                continue
            val = (f"{r.mean:.1f}" if not r.halfwidth
                   else f"{r.mean:.1f} ± {r.halfwidth:.1f}")
            nm = "" if r.normalized_mean is None else f"{r.normalized_mean:.1f}"
            inf = ("" if r.infeas_fraction is None
                   else f"{100 * r.infeas_fraction:.1f}")
            gp = "" if r.gap_pct is None else f"{r.gap_pct:.2f}"
            lines.append(f"{r.method:<16}{r.bound_kind:<8}{val:>18}"
                         f"{nm:>8}{inf:>9}{gp:>8}")
        if report.u_delta_pct is not None:
            lines.append(f"%UD (static over two-stage): {report.u_delta_pct:.1f}")
        if report.l_delta_pct is not None:
            lines.append(f"%LD (static over two-stage): {report.l_delta_pct:.1f}")
        text = "\n".join(lines) + "\n"
    else:
        raise InvalidConfig(f"unknown format {fmt!r}")
    if destination in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(destination, "w") as fh:
            fh.write(text)


def _parse_config_file(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfig(f"bad config line: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_parser():
    p = argparse.ArgumentParser(
        prog="ldr2s",
        description="Two-stage linear decision rule bounds for multistage "
                    "stochastic linear programs")
    p.add_argument("--config", help="key=value config file (flags override)")
    p.add_argument("--model", choices=("inventory", "capexp"))
    p.add_argument("--T", type=int)
    p.add_argument("--C", type=float)
    p.add_argument("--methods", help="comma list: " + ",".join(METHOD_ORDER))
    p.add_argument("--N", type=int)
    p.add_argument("--N-eval", type=int, dest="N_eval")
    p.add_argument("--seed", type=int)
    p.add_argument("--ci-level", type=float, dest="ci_level")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json", "text-table"),
                   default="text-table")
    p.add_argument("--tol-benders", type=float, dest="tol_benders")
    p.add_argument("--tol-level", type=float, dest="tol_level")
    p.add_argument("--projection", choices=("fw", "linf"))
    p.add_argument("--expectation", choices=("analytic", "empirical"))
    return p


_CONFIG_KEYS = ("model", "T", "C", "methods", "N", "N_eval", "seed",
                "ci_level", "tol_benders", "tol_level", "projection",
                "expectation")
_CASTS = {"T": int, "N": int, "N_eval": int, "seed": int, "C": float,
          "ci_level": float, "tol_benders": float, "tol_level": float}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            raw.update(_parse_config_file(args.config))
        for k in _CONFIG_KEYS:
            v = getattr(args, k, None)
            if v is not None:
                raw[k] = v
        if "model" not in raw or "T" not in raw:
            raise InvalidConfig("--model and --T are required")
        for k, cast in _CASTS.items():
            if k in raw and raw[k] is not None:
                raw[k] = cast(raw[k])
        if "methods" in raw and isinstance(raw["methods"], str):
            raw["methods"] = tuple(
                m.strip() for m in raw["methods"].split(",") if m.strip())
        config = ExperimentConfig(**{k: v for k, v in raw.items()
                                     if k in _CONFIG_KEYS})
    except (InvalidConfig, TypeError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    if not config.methods:
        emit(BoundReport(config=config, rows=[]), args.format, args.out)
        return 0
    report = run_experiment(config)
    emit(report, args.format, args.out)
    return 2 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
