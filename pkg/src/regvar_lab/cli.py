"""regvar-lab command line workbench.

Exit statuses:
    0  success
    1  unexpected internal error
    2  configuration or usage error
    3  non-convergence (sequential limits, essential limit, phi diagnostics)
    4  trivial kernel rejected
    5  empty anchor set for a requested s
    6  malformed input data or argument outside a domain
    7  verification failure (functional-equation residual above threshold)
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfg
from . import esslim, kendall, kernels, popa
from .equivarying import REJECTED, estimate_rho
from .errors import (
    ConfigError,
    DataFormatError,
    DomainError,
    EmptyAnchorError,
    NoBracketError,
    NonConvergenceError,
    RegVarError,
    TrivialKernelError,
)
from .functions import FunctionSpec, slowly_varying, write_csv
from .report import REPORT_VERSION, dumps, render_text
from .sequences import (
    PeriodicOpenSet,
    admissibility_report,
    croft_hit_checkpoints,
    croft_hit_search,
    parse_sequence,
    phi_dilation_solve,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENT = 3
EXIT_TRIVIAL = 4
EXIT_EMPTY_ANCHOR = 5
EXIT_DATA = 6
EXIT_VERIFY = 7

STATUS_NAMES = {
    EXIT_OK: "ok",
    EXIT_INTERNAL: "internal-error",
    EXIT_CONFIG: "config-error",
    EXIT_NONCONVERGENT: "non-convergent",
    EXIT_TRIVIAL: "trivial-kernel",
    EXIT_EMPTY_ANCHOR: "empty-anchor",
    EXIT_DATA: "data-error",
    EXIT_VERIFY: "verification-failed",
}


class _Result:
    def __init__(self, results, code=EXIT_OK, accounting=None, text=None):
        self.results = results
        self.code = code
        self.accounting = accounting or {}
        self.text = text


def _load_function(settings, key="function"):
    csv_path = settings.get(f"{key}_csv")
    if csv_path:
        return FunctionSpec.from_csv(csv_path)
    return FunctionSpec.parse(settings[key], seed=settings["seed"])


def cmd_analyze(s) -> _Result:
    f = _load_function(s)
    seq = parse_sequence(s["sequence"], s["sequence_kind"])
    B = kendall.KendallSet(s["b_lo"], s["b_hi"], s["holes"])
    if s["a_policy"] == "given":
        if not s["a_expr"]:
            raise ConfigError("a_policy = given needs a_expr")
        a_policy = FunctionSpec.parse(s["a_expr"], seed=s["seed"])
    else:
        a_policy = s["a_policy"]
    phi = FunctionSpec.parse(s["phi"]) if s["phi"] else None
    h = FunctionSpec.parse(s["h"]) if s["h"] else None
    inp = kendall.KendallInput(f, seq, B, a_policy, s["mode"], phi, h)
    N = s["n"]
    ladder = s["n_ladder"] or tuple(sorted({max(20, N // 100), max(20, N // 10), N}))
    accounting = {"sequence_terms": N, "lattice_points": s["lattice_points"]}
    if inp.mode == kendall.GENERAL:
        t = np.linspace(s["b_lo"], s["b_hi"], s["t_points"])
        rep = kendall.general_rv_estimate(inp, t, N, s["tol"], s["limit_rule"], N_ladder=ladder)
        return _Result({"general": rep.to_dict()}, accounting=accounting)
    rep = kendall.run_kendall(inp, N, s["lattice_points"], s["tol"], s["budget"],
                              s["limit_rule"], N_ladder=ladder, s_values=s["s_values"] or None)
    ell = slowly_varying(s["ell"]) if s["ell"] else None
    cor = kendall.verify_corollary(inp, rep.kappa_hat, ell, N, s["corollary_tol"])
    out = rep.to_dict()
    out["corollary"] = cor.to_dict()
    return _Result(out, accounting=accounting)


def _fe_sweep(s):
    rng = np.random.default_rng(s["seed"])
    cells = []
    worst = 0.0
    for r_txt in s["r_values"]:
        for s_txt in s["s_values"]:
            for kappa in s["kappas"]:
                spec = kernels.KernelSpec(r_txt, s_txt, kappa)
                u = popa.sample_group(spec.r, s["trials"], rng, s["spread"])
                v = popa.sample_group(spec.r, s["trials"], rng, s["spread"])
                res = np.asarray(kernels.bg_residual(spec, u, v))
                scale = 1.0 + np.abs(np.asarray(spec(popa.circle(spec.r, u, v))))
                bg = float(np.max(res / scale))
                a = np.asarray(kernels.kernel_eval(spec, u))
                b = np.asarray(kernels.kernel_eval_isomorphic(spec, u))
                cross = float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))
                worst = max(worst, bg)
                cells.append({"r": str(spec.r), "s": str(spec.s), "kappa": kappa,
                              "equation": spec.equation.value, "bg_residual": bg,
                              "isomorphism_gap": cross})
    return cells, worst


def cmd_verify_fe(s) -> _Result:
    cells, worst = _fe_sweep(s)
    max_cross = max(c["isomorphism_gap"] for c in cells)
    results = {"cells": cells, "max_bg_residual": worst, "max_isomorphism_gap": max_cross,
               "threshold": s["threshold"]}
    if s["cell"]:
        parts = [p.strip() for p in s["cell"].split(",")]
        if len(parts) != 3:
            raise ConfigError("cell must be 'r, s, kappa'")
        spec = kernels.KernelSpec(parts[0], parts[1], float(parts[2]))
        results["cell_value"] = {"r": str(spec.r), "s": str(spec.s), "kappa": spec.kappa,
                                 "t": s["t"], "value": float(spec(s["t"]))}
    text = kernels.format_table(s["table_kappa"], s["table_t"])
    if s["broken_kernel"]:
        rng = np.random.default_rng(s["seed"] + 1)
        u, v = rng.normal(size=s["trials"]), rng.normal(size=s["trials"])
        broken = lambda t: np.asarray(t, dtype=float)
        res = kernels.bg_residual_fn(broken, 0.0, popa.INF, u, v)
        demo = float(kernels.bg_residual_fn(broken, 0.0, popa.INF, 1.0, 1.0))
        results["broken_kernel"] = {"kernel": "K(t)=t", "r": "0", "s": "inf",
                                    "residual_at_1_1": demo, "max_residual": float(np.max(res))}
        text += f"\nbroken kernel K(t)=t on (r=0, s=inf): residual at u=v=1 is {demo:.12g}"
    if "cell_value" in results:
        text += f"\ncell value: {results['cell_value']['value']:.12g}"
    code = EXIT_OK if (worst <= s["threshold"] and max_cross <= 1e-12) else EXIT_VERIFY
    accounting = {"cells": len(cells), "trials_per_cell": s["trials"]}
    return _Result(results, code, accounting, text)


def _esslim_samples(s, key="function"):
    if s.get(f"{key}_csv"):
        spec = FunctionSpec.from_csv(s[f"{key}_csv"])
        return esslim.SampledFunction(spec.xs, spec.values, {"source": spec.name})
    if s["spacing"] == "linear":
        x = np.linspace(s["x_min"], s["x_max"], s["samples"])
    elif s["spacing"] == "geometric":
        x = np.geomspace(s["x_min"], s["x_max"], s["samples"])
    else:
        raise ConfigError("spacing must be linear or geometric")
    spec = FunctionSpec.parse(s[key], seed=s["seed"])
    return esslim.SampledFunction(x, spec(x), spec.describe())


def cmd_esslim(s) -> _Result:
    samples = _esslim_samples(s)
    if s["export_csv"]:
        write_csv(s["export_csv"], samples.x, samples.values)
    res = esslim.ess_lim(samples, s["epsilons"], s["delta"])
    results = {"source": samples.metadata, "ess_lim": res.to_dict(),
               "plain_limit": esslim.ess_lim(samples, s["epsilons"], 0.0).to_dict()}
    if s["combine_with"]:
        g_spec = FunctionSpec.parse(s["combine_with"], seed=s["seed"] + 1)
        g = esslim.SampledFunction(samples.x, g_spec(samples.x), g_spec.describe())
        results["combine"] = esslim.ess_lim_combine_check(
            samples, g, s["delta"], s["combine_delta"], s["epsilons"]).to_dict()
    code = EXIT_OK if res.verdict == esslim.CONVERGES else EXIT_NONCONVERGENT
    return _Result(results, code, {"samples": len(samples)})


def cmd_sequences(s) -> _Result:
    seq = parse_sequence(s["sequence"], s["sequence_kind"])
    adm = admissibility_report(seq.generate(s["prefix_length"]), seq.kind, s["n0"], s["tol"])
    results = {"sequence": seq.describe(), "admissibility": adm.__dict__}
    accounting = {"prefix_length": s["prefix_length"]}
    if s["croft"]:
        G = PeriodicOpenSet(pattern=s["pattern"], period=s["period"])
        checks = croft_hit_checkpoints(seq, s["probe_interval"], G, s["checkpoints"], s["probe_grid"])
        counts = [checks[k]["hits"] for k in sorted(checks)]
        best = croft_hit_search(seq, s["probe_interval"], G, max(s["checkpoints"]),
                                s["probe_grid"], s["checkpoints"])
        results["croft"] = {
            "checkpoints": {str(k): v for k, v in checks.items()},
            "strictly_increasing": all(b > a for a, b in zip(counts, counts[1:])),
            "best": best.to_dict(),
        }
        accounting["croft_terms"] = max(s["checkpoints"])
        accounting["probes"] = s["probe_grid"]
    if s["dilation_phi"]:
        phi = FunctionSpec.parse(s["dilation_phi"])
        sol = phi_dilation_solve(phi, s["dilation_lambda"], s["dilation_a"], s["dilation_b"],
                                 s["dilation_q_tol"])
        results["dilation"] = {"q": sol.q, "q_float": float(sol.q), "root": sol.x,
                               "residual": sol.residual, "q_tol": sol.q_tol,
                               "minimal_feasible_b": sol.minimal_feasible_b}
    return _Result(results, EXIT_OK, accounting)


def cmd_phi(s) -> _Result:
    phi = FunctionSpec.parse(s["phi"], seed=s["seed"])
    t = np.linspace(0.0, s["t_max"], s["t_points"])
    an = estimate_rho(phi, s["x_grid"], t, s["tol"])
    results = {"phi": phi.describe(), "analysis": an.to_dict()}
    if an.classification != REJECTED:
        rng = np.random.default_rng(s["seed"])
        p = popa.PopaParam(max(an.rho_hat, 0.0))
        a = popa.sample_group(p, 1000, rng)
        b = popa.sample_group(p, 1000, rng)
        results["gs_residual_of_fit"] = float(np.max(popa.gs_residual(p, a, b)))
    code = EXIT_NONCONVERGENT if an.classification == REJECTED else EXIT_OK
    return _Result(results, code, {"x_points": len(s["x_grid"]), "t_points": s["t_points"]})


def cmd_table(s) -> _Result:
    rows = kernels.table_rows(s["kappa"], s["t"], s["r"], s["s"])
    text = kernels.format_table(s["kappa"], s["t"], s["r"], s["s"])
    return _Result({"rows": rows}, EXIT_OK, {}, text)


COMMANDS = {
    "analyze": cmd_analyze,
    "verify-fe": cmd_verify_fe,
    "esslim": cmd_esslim,
    "sequences": cmd_sequences,
    "phi": cmd_phi,
    "table": cmd_table,
}


def _exit_code_for(exc) -> int:
    if isinstance(exc, NonConvergenceError):
        return EXIT_NONCONVERGENT
    if isinstance(exc, TrivialKernelError):
        return EXIT_TRIVIAL
    if isinstance(exc, EmptyAnchorError):
        return EXIT_EMPTY_ANCHOR
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataFormatError, DomainError, NoBracketError)):
        return EXIT_DATA
    return EXIT_INTERNAL


def run(command: str, settings: dict, timing: bool = False) -> tuple[dict, int]:
    """Execute one command and build its report envelope."""
    started = time.perf_counter()
    envelope = {"version": REPORT_VERSION, "command": command, "seed": settings["seed"],
                "config": {k: v for k, v in settings.items()}}
    try:
        res = COMMANDS[command](settings)
        code = res.code
        envelope["status"] = STATUS_NAMES[code]
        envelope["results"] = res.results
        envelope["accounting"] = res.accounting
        if res.text:
            envelope["text"] = res.text
    except (RegVarError, ValueError) as exc:
        code = _exit_code_for(exc)
        envelope["status"] = STATUS_NAMES[code]
        envelope["error"] = f"{type(exc).__name__}: {exc}"
        diag = getattr(exc, "diagnostics", None)
        if diag:
            envelope["diagnostics"] = diag
        window = getattr(exc, "feasible_window", None)
        if window is not None:
            envelope["diagnostics"] = {"feasible_window": window}
        if code == EXIT_INTERNAL and not isinstance(exc, RegVarError):
            code = EXIT_DATA
            envelope["status"] = STATUS_NAMES[code]
    envelope["exit_code"] = code
    if timing:
        envelope["timing"] = {"wall_clock_seconds": time.perf_counter() - started}
    return envelope, code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regvar-lab", description="Sequential regular variation workbench")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI file with a section per command")
    ap.add_argument("--seed", type=int, help="overrides [run] seed")
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--format", choices=["json", "text"], default="json")
    ap.add_argument("--timing", action="store_true",
                    help="add wall-clock timing (makes reports non-reproducible)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = cfg.load(args.command, args.config)
    except ConfigError as exc:
        print(f"regvar-lab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            print("regvar-lab: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        settings["seed"] = args.seed
    envelope, code = run(args.command, settings, args.timing)
    payload = dumps(envelope) if args.format == "json" else render_text(envelope)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if code != EXIT_OK and "error" in envelope:
        print(f"regvar-lab: {envelope['status']}: {envelope['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
