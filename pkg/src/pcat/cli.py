"""Command line front end.

Exit codes: 0 success, 2 usage or malformed input, 3 domain error.  Every
report echoes the run configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import hamfile
from .errors import DimensionMismatch, DomainError, InputError, PcatError, TimeOutOfRange
from .evolution import (default_dt, dominant_subset, effective_b_max, heisenberg_residual, maximize_states,
                        transition_amplitude, weak_value)
from .linalg import COND_CEILING, TOL_EIG, eig
from .periodic import KAPPA, im_ratio, reality_report
from .periodsolver import (MAX_CANDIDATES, MAX_DENOMINATOR, MAX_M1, MAX_SCALE, RATIO_TOL, scan_oracle, solve_period, verify_alignment)
from .qgeometry import (biorthonormality_error, build_q_metric, hermiticity_error, is_q_normal,
                        min_eigenvalue, q_commutator_norm, q_hermitize, q_split, random_q_hermitian)


@dataclass
class RunConfig:
    hbar: float = 1.0
    tol_deg: float = 1e-9
    tol_eig: float = TOL_EIG
    tol_align: float = 1e-9
    kappa_theorem3: float = KAPPA
    max_denominator: int = MAX_DENOMINATOR
    ratio_tol: float = RATIO_TOL
    grid_points: int = 1000
    max_scale: int = MAX_SCALE
    max_m1: int = MAX_M1
    max_candidates: int = MAX_CANDIDATES
    t_max: float = 10.0
    seed: int = 0
    output_format: str = "json"

    def validate(self) -> None:
        for name in ("hbar", "tol_deg", "tol_eig", "tol_align", "kappa_theorem3", "ratio_tol", "t_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive, got {v}")
        for name in ("max_denominator", "max_scale", "max_m1", "max_candidates"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be at least 1")
        if self.grid_points < 2:
            raise InputError("grid must have at least 2 points")


def _jsonable(x):
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return {"re": x.real.tolist(), "im": x.imag.tolist()}
        return x.tolist()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _flatten(prefix: str, x, rows: list) -> None:
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(x, list):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, _fmt(x)))


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _emit(report: dict, cfg: RunConfig, out) -> None:
    doc = _jsonable(report)
    if cfg.output_format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
        return
    rows: list = []
    _flatten("", doc, rows)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)


def _envelope(command: str, cfg: RunConfig, hf, result: dict) -> dict:
    return {
        "command": command,
        "config": asdict(cfg),
        "input": {"n": hf.n, "label": hf.label},
        "result": result,
    }


def _load_pair(args, cfg):
    hf = hamfile.load(args.hamiltonian)
    S = eig(hf.matrix, cfg.tol_eig, COND_CEILING)
    Q = build_q_metric(S)
    O = None
    if getattr(args, "operator", None):
        of = hamfile.load(args.operator)
        if of.n != hf.n:
            raise DimensionMismatch(f"operator is {of.n}x{of.n}, Hamiltonian is {hf.n}x{hf.n}")
        O = of.matrix
        if args.q_hermitize:
            O = q_hermitize(O, Q)
    return hf, S, Q, O


def cmd_spectrum(args, cfg):
    hf, S, _, _ = _load_pair(args, cfg)
    sub = dominant_subset(S, cfg.tol_deg)
    return _envelope("spectrum", cfg, hf, {
        "eigenvalues": [complex(x) for x in S.eigenvalues],
        "cond_P": S.cond_P,
        "residual": S.residual(hf.matrix),
        "gauge": S.gauge,
        "subset": list(sub.indices),
        "subset_size": len(sub),
        "B_max": sub.B_max,
        "gap": sub.gap,
    })


def cmd_qmetric(args, cfg):
    hf, S, Q, _ = _load_pair(args, cfg)
    H = hf.matrix
    Hqh, Hqa = q_split(H, Q)
    return _envelope("qmetric", cfg, hf, {
        "Q": Q.Q,
        "hermiticity_error": hermiticity_error(Q),
        "min_eigenvalue": min_eigenvalue(Q),
        "biorthonormality_error": biorthonormality_error(S, Q),
        "q_commutator": q_commutator_norm(H, Q),
        "q_normal": is_q_normal(H, Q, 1e-9),
        "H_Qh": Hqh,
        "H_Qa": Hqa,
    })


def _theorem1(S, Q, O, T, cfg):
    sub = dominant_subset(S, cfg.tol_deg)
    pair = maximize_states(S, T, cfg.hbar, subset=sub)
    amp = transition_amplitude(S, Q, pair, cfg.hbar)
    expected = math.exp(sub.B_max * T / cfg.hbar)
    wv = weak_value(O, S, Q, pair, hbar=cfg.hbar)
    H = (S.P * S.eigenvalues[None, :]) @ S.Pinv
    dt = default_dt(H, cfg.hbar)
    t_mid = pair.T_A + 0.5 * T
    res = heisenberg_residual(O, S, Q, pair, t_mid, dt, cfg.hbar) if T > 2 * dt else None
    return {
        "T": T,
        "subset": list(sub.indices),
        "a": pair.a,
        "b": pair.b,
        "amplitude": amp,
        "amplitude_modulus": abs(amp),
        "expected_modulus": expected,
        "relative_deviation": abs(abs(amp) - expected) / expected,
        "weak_value": wv,
        "im_ratio": im_ratio(wv),
        "heisenberg_residual": res,
        "heisenberg_dt": dt,
        "dominance": T * sub.gap / cfg.hbar,
    }


def cmd_weak_value(args, cfg):
    if args.T is None or not args.T > 0:
        raise TimeOutOfRange("--T must be given and positive")
    hf, S, Q, O = _load_pair(args, cfg)
    return _envelope("weak-value", cfg, hf, _theorem1(S, Q, O, args.T, cfg))


def cmd_periodic(args, cfg):
    if args.tp is None or args.tp < 0:
        raise InputError("--tp must be given and non-negative")
    hf, S, Q, O = _load_pair(args, cfg)
    rep = reality_report(S, Q, O, args.tp, cfg.hbar, cfg.tol_deg, cfg.kappa_theorem3)
    return _envelope("periodic", cfg, hf, rep.as_dict())


def _solve(S, cfg):
    return solve_period(S, cfg.hbar, cfg.tol_deg, cfg.max_denominator, cfg.ratio_tol, cfg.max_scale,
                        cfg.max_m1, cfg.max_candidates)


def _candidate(c):
    return {"t_p": c.t_p, "m": list(c.m), "C": c.C, "f_value": c.f_value, "damped_f": c.damped_f,
            "scale": c.scale, "residual": c.residual}


def cmd_solve_period(args, cfg):
    hf, S, _, _ = _load_pair(args, cfg)
    sol = _solve(S, cfg)
    sel = sol.selection.candidate
    ok, C = verify_alignment(sol.spacing.alphas, sel.t_p, sol.h, cfg.tol_align)
    return _envelope("solve-period", cfg, hf, {
        "subset": list(sol.subset.indices),
        "B_max": sol.subset.B_max,
        "alphas": list(sol.spacing.levels),
        "ratios": [list(r) for r in sol.spacing.ratios],
        "diffs": list(sol.spacing.diffs),
        "approx_error": sol.spacing.approx_error,
        "candidates": [_candidate(c) for c in sol.candidates],
        "selected": _candidate(sel),
        "degenerate": sol.selection.degenerate,
        "verified": ok,
        "verified_C": C,
    })


def cmd_scan(args, cfg, out):
    hf, S, _, _ = _load_pair(args, cfg)
    rep = scan_oracle(S, cfg.hbar, cfg.t_max, cfg.grid_points, subset=dominant_subset(S, cfg.tol_deg))
    summary = {
        "argmax_t": rep.argmax_t,
        "argmax_value": rep.argmax_value,
        "flat": rep.flat,
        "resolution": rep.resolution,
        "B_max": rep.B_max,
        "local_maxima": [list(p) for p in rep.local_maxima],
        "rows": len(rep.t),
    }
    if cfg.output_format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t_p", "f", "damped_f"])
        for t, f, d in zip(rep.t, rep.f, rep.damped_f):
            w.writerow([f"{t:.17g}", f"{f:.17g}", f"{d:.17g}"])
        sys.stderr.write(json.dumps(_jsonable(_envelope("scan", cfg, hf, summary))) + "\n")
        return None
    summary["rows"] = [{"t_p": t, "f": f, "damped_f": d} for t, f, d in zip(rep.t, rep.f, rep.damped_f)]
    return _envelope("scan", cfg, hf, summary)


def _theorem3(S, Q, O, t_sel, cfg):
    rep = reality_report(S, Q, O, t_sel, cfg.hbar, cfg.tol_deg, cfg.kappa_theorem3)
    rng = np.random.default_rng(cfg.seed)
    mis = []
    for t in rng.uniform(0.05 * t_sel, 3.0 * t_sel, 10):
        try:
            mis.append(reality_report(S, Q, O, float(t), cfg.hbar, cfg.tol_deg).exact_im_ratio)
        except PcatError:
            continue
    d = rep.as_dict()
    d["selected_t_p"] = t_sel
    d["misaligned_median_im_ratio"] = float(np.median(mis)) if mis else None
    d["pass"] = bool(rep.exact_im_ratio <= 1e-9)
    return d


def cmd_verify(args, cfg):
    hf, S, Q, O = _load_pair(args, cfg)
    H = hf.matrix
    if O is None:
        O = random_q_hermitian(Q, cfg.seed)
    sub = dominant_subset(S, cfg.tol_deg)
    checks: dict = {
        "q_metric": {
            "hermiticity_error": hermiticity_error(Q),
            "min_eigenvalue": min_eigenvalue(Q),
            "biorthonormality_error": biorthonormality_error(S, Q),
            "q_commutator": q_commutator_norm(H, Q),
        },
    }
    checks["q_metric"]["pass"] = bool(checks["q_metric"]["biorthonormality_error"] <= 1e-10
                                      and checks["q_metric"]["q_commutator"] <= 1e-9
                                      and checks["q_metric"]["min_eigenvalue"] > 0)

    T = 30.0 * cfg.hbar / sub.gap if math.isfinite(sub.gap) else 1.0
    t1 = _theorem1(S, Q, O, T, cfg)
    t1["pass"] = bool(t1["relative_deviation"] <= 1e-9 and t1["im_ratio"] <= 1e-9)
    checks["theorem1"] = t1

    if len(sub) == 1 and math.isfinite(sub.gap):
        rep = reality_report(S, Q, O, 30.0 * cfg.hbar / sub.gap, cfg.hbar, cfg.tol_deg, cfg.kappa_theorem3)
        d = rep.as_dict()
        d["pass"] = bool(rep.exact_im_ratio <= 1e-8)
        checks["theorem2"] = d

    distinct = set(np.round(S.eigenvalues[list(sub.indices)].real, 12))
    if effective_b_max(S, sub, cfg.tol_deg) <= 0 and len(distinct) > 1:
        try:
            sol = _solve(S, cfg)
        except DomainError as exc:
            checks["theorem3"] = {"skipped": f"{type(exc).__name__}: {exc}"}
        else:
            checks["theorem3"] = _theorem3(S, Q, O, sol.selection.candidate.t_p, cfg)

    return _envelope("verify", cfg, hf, {
        "checks": checks,
        "all_pass": all(c.get("pass", True) for c in checks.values()),
    })


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--hbar", type=float, default=1.0)
    common.add_argument("--tol-deg", type=float, default=1e-9)
    common.add_argument("--tol-eig", type=float, default=TOL_EIG)
    common.add_argument("--tol-align", type=float, default=1e-9)
    common.add_argument("--kappa", type=float, default=KAPPA)
    common.add_argument("--max-denominator", type=int, default=MAX_DENOMINATOR)
    common.add_argument("--ratio-tol", type=float, default=RATIO_TOL)
    common.add_argument("--max-scale", type=int, default=MAX_SCALE)
    common.add_argument("--max-m1", type=int, default=MAX_M1)
    common.add_argument("--max-candidates", type=int, default=MAX_CANDIDATES)
    common.add_argument("--t-max", type=float, default=10.0)
    common.add_argument("--grid", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", choices=("json", "csv"), default="json")
    common.add_argument("--q-hermitize", action="store_true",
                        help="replace O by (O + O^{dagger Q}) / 2 before evaluating")
    common.add_argument("--tp", type=float, default=None, help="period t_p")
    common.add_argument("--T", dest="T", type=float, default=None, help="elapsed time T_B - T_A")

    p = argparse.ArgumentParser(prog="pcat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, needs_op in (("spectrum", False), ("qmetric", False), ("weak-value", True), ("periodic", True),
                           ("solve-period", False), ("scan", False), ("verify", None)):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("hamiltonian")
        if needs_op:
            sp.add_argument("operator")
        elif needs_op is None:
            sp.add_argument("operator", nargs="?")
    return p


COMMANDS = {
    "spectrum": cmd_spectrum,
    "qmetric": cmd_qmetric,
    "weak-value": cmd_weak_value,
    "periodic": cmd_periodic,
    "solve-period": cmd_solve_period,
    "verify": cmd_verify,
}


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.hbar, args.tol_deg, args.tol_eig, args.tol_align, args.kappa, args.max_denominator,
                    args.ratio_tol, args.grid, args.max_scale, args.max_m1, args.max_candidates, args.t_max,
                    args.seed, args.output)
    try:
        cfg.validate()
        if args.command == "scan":
            report = cmd_scan(args, cfg, out)
        else:
            report = COMMANDS[args.command](args, cfg)
        if report is not None:
            _emit(report, cfg, out)
        return 0
    except (InputError, DomainError) as exc:
        err = {"command": args.command, "config": asdict(cfg),
               "error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        _emit(err, cfg, out)
        sys.stderr.write(f"pcat {args.command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
