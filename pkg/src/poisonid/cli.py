"""Command-line frontend.

Every analysis and simulation capability is reachable as a subcommand with
file-based configs and plot-ready tabular output.  Pmf arguments accept the
``bern(p)`` shorthand, a comma-separated probability list, or a path to a
JSON/text file.  ``bern(p)`` expands to the pmf (1-p, p): symbol 1 carries
probability p, matching the convention that binary examples quote the
probability of the "1" outcome.

Exit codes: 0 on success, 2 on input validation failure (the diagnostic
names the offending field).  All numeric output is printed at 9 significant
digits.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Sequence

from .analysis import (blinding_level, error_exponent, gamma0_membership,
                       gamma_membership, region_radius, security_margin)
from .attacker import (_attack_nontargeted, attack_targeted_addition,
                       attack_targeted_replacement)
from .config import GameConfig, Variant
from .defender import decide
from .pmf import EmpiricalType, Pmf
from .simulate import (CSV_HEADER, exponent_sweep, run_game_trials,
                       sanov_probe)
from .transport import CostMatrix, map_distortion, _largest_remainder

__all__ = ["main"]


class CliError(ValueError):
    """Validation failure; the message names the offending field."""


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.9g}"
    return str(x)


def _round9(obj):
    """Clamp every float in a JSON-ready structure to 9 significant digits.

    Infinities become None so the result stays valid JSON; integers and
    strings pass through.
    """
    if isinstance(obj, float):
        return None if math.isinf(obj) else float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def _parse_pmf(text: str, field: str) -> Pmf:
    text = text.strip()
    try:
        if text.startswith("bern(") and text.endswith(")"):
            return Pmf.bernoulli(float(text[5:-1]))
        if "," in text:
            return Pmf([float(tok) for tok in text.split(",")])
        if os.path.exists(text):
            raw = open(text).read().strip()
            if raw.startswith("{"):
                return Pmf.from_json(raw)
            return Pmf([float(tok) for tok in raw.replace("\n", ",").split(",")
                        if tok.strip()])
        raise ValueError(f"not bern(p), a comma list, or an existing file: "
                         f"{text!r}")
    except CliError:
        raise
    except (ValueError, OSError) as exc:
        raise CliError(f"{field}: {exc}") from exc


def _parse_counts(text: str, field: str) -> EmpiricalType:
    """Integer counts 'c0,c1,...' or a JSON file/literal with counts and n."""
    text = text.strip()
    try:
        if os.path.exists(text):
            text = open(text).read().strip()
        if text.startswith("{"):
            return EmpiricalType.from_json(text)
        counts = [int(tok) for tok in text.split(",")]
        return EmpiricalType(counts, sum(counts))
    except (ValueError, OSError) as exc:
        raise CliError(f"{field}: {exc}") from exc


def _parse_cost(text: str | None, k: int) -> CostMatrix:
    if text is None or text.strip() == "absolute":
        return CostMatrix.absolute(k)
    try:
        if os.path.exists(text):
            text = open(text).read()
        cost = CostMatrix.from_csv(text)
    except (ValueError, OSError) as exc:
        raise CliError(f"--cost: {exc}") from exc
    if cost.k != k:
        raise CliError(f"--cost: alphabet size {cost.k} does not match the "
                       f"pmf inputs ({k})")
    return cost


def _build_config(args, k: int, need_lambda: bool = True) -> GameConfig:
    """GameConfig from --config JSON overridden by explicit flags."""
    base: dict = {}
    if getattr(args, "config", None):
        try:
            raw = args.config
            if os.path.exists(raw):
                raw = open(raw).read()
            base = json.loads(raw)
            if not isinstance(base, dict):
                raise ValueError("config JSON must be an object")
        except (ValueError, OSError) as exc:
            raise CliError(f"--config: {exc}") from exc
    flag_map = {"alpha": "alpha", "lam": "lambda", "c": "c", "L": "L",
                "variant": "variant", "mode": "mode", "attack": "attack"}
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            base[key] = val
    base.setdefault("alpha", 0.0)
    base.setdefault("c", 1.0)
    base.setdefault("L", 0.0)
    base.setdefault("variant", "addition")
    base["alphabet_size"] = k
    if need_lambda and "lambda" not in base:
        raise CliError("--lambda: required for this command (or supply it "
                       "via --config)")
    base.setdefault("lambda", 1.0)
    try:
        return GameConfig.from_dict(base)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc


def _emit(payload, fmt: str, out: str | None, csv_lines=None) -> None:
    """Write the artifact as JSON (default) or CSV when available."""
    if fmt == "csv":
        if csv_lines is None:
            raise CliError("--format: csv is not available for this command")
        text = "\n".join(csv_lines) + "\n"
    else:
        if isinstance(payload, list):
            text = "\n".join(json.dumps(_round9(p)) for p in payload) + "\n"
        else:
            text = json.dumps(_round9(payload)) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pmf_list(p: Pmf) -> list:
    return [float(x) for x in p.probs]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_decide(args) -> int:
    v = _parse_counts(args.test, "--test")
    cfg = _build_config(args, v.k)
    if args.training is not None:
        t = _parse_counts(args.training, "--training")
    elif args.px is not None:
        n = args.n if args.n is not None else v.n
        m = cfg.m(n)
        px = _parse_pmf(args.px, "--px")
        t = EmpiricalType(_largest_remainder(px.probs * m, m), m)
    else:
        raise CliError("--training: required (or give --px to quantize a "
                       "training pmf at m = round(c*n))")
    if t.k != v.k:
        raise CliError(f"--training: alphabet size {t.k} does not match "
                       f"--test ({v.k})")
    try:
        outcome = decide(v, t, cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    payload = {
        "statistic": outcome.statistic,
        "threshold": outcome.threshold,
        "accept_h0": outcome.accept_h0,
        "degenerate": outcome.degenerate,
        "minimizer": [_pmf_list(q) for q in outcome.minimizer],
    }
    _emit(payload, args.format, args.out,
          csv_lines=["statistic,threshold,accept_h0,degenerate",
                     ",".join([_fmt(outcome.statistic), _fmt(outcome.threshold),
                               str(int(outcome.accept_h0)),
                               str(int(outcome.degenerate))])])
    return 0


def _cmd_attack(args) -> int:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    cfg = _build_config(args, px.k)
    cost = _parse_cost(args.cost, px.k)
    if cfg.attack == "targeted":
        if cfg.variant is Variant.ADDITION:
            res = attack_targeted_addition(px, py, cfg, cost)
        else:
            res = attack_targeted_replacement(px, py, cfg, cost)
    else:
        observed = (_parse_pmf(args.observed, "--observed")
                    if args.observed else py)
        if observed.k != px.k:
            raise CliError(f"--observed: alphabet size {observed.k} does not "
                           f"match --px ({px.k})")
        res = _attack_nontargeted(px, py, observed, cfg, cost)
    payload = {
        "fake_training": (_pmf_list(res.fake_training)
                          if res.fake_training is not None else None),
        "attacked_pmf": _pmf_list(res.attacked_pmf),
        "achieved_statistic": res.achieved_statistic,
        "distortion": map_distortion(res.transport, cost),
        "transport": [[float(x) for x in row] for row in res.transport.s],
    }
    _emit(payload, args.format, args.out)
    return 0


def _cmd_margin(args) -> int:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    if args.alpha is None:
        raise CliError("--alpha: required for margin")
    variant = args.variant or "addition"
    cost = _parse_cost(args.cost, px.k)
    try:
        res = security_margin(px, py, args.alpha, cost, variant)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    payload = {
        "margin": res.margin,
        "alpha_blinding": res.alpha_blinding,
        "at_blinding": res.at_blinding,
        "witness": _pmf_list(res.witness_V),
    }
    _emit(payload, args.format, args.out,
          csv_lines=["margin,alpha_blinding,at_blinding",
                     ",".join([_fmt(res.margin), _fmt(res.alpha_blinding),
                               str(int(res.at_blinding))])])
    return 0


def _cmd_blinding(args) -> int:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    variant = args.variant or "addition"
    try:
        level = blinding_level(px, py, variant)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _emit({"alpha_blinding": level}, args.format, args.out,
          csv_lines=["alpha_blinding", _fmt(level)])
    return 0


def _cmd_region(args) -> int:
    px = _parse_pmf(args.px, "--px")
    if args.alpha is None:
        raise CliError("--alpha: required for region")
    variant = args.variant or "addition"
    try:
        radius = region_radius(args.alpha, variant)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    payload = {"radius": radius, "center": _pmf_list(px)}
    if args.probe is not None:
        probe = _parse_pmf(args.probe, "--probe")
        if probe.k != px.k:
            raise CliError(f"--probe: alphabet size {probe.k} does not match "
                           f"--px ({px.k})")
        lam = args.lam if args.lam is not None else 0.0
        c = args.c if args.c is not None else 1.0
        L = args.L if args.L is not None else 0.0
        try:
            if L > 0.0:
                cost = _parse_cost(args.cost, px.k)
                member = gamma_membership(probe, px, lam, args.alpha, c, L,
                                          cost, variant)
            else:
                member = gamma0_membership(probe, px, lam, args.alpha, c,
                                           variant)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        payload["probe"] = _pmf_list(probe)
        payload["member"] = member
    _emit(payload, args.format, args.out)
    return 0


def _cmd_exponent(args) -> int:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    cfg = _build_config(args, px.k)
    cost = _parse_cost(args.cost, px.k)
    try:
        res = error_exponent(px, py, cfg, cost)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    payload = {
        "exponent": res.exponent,
        "label": res.label,
        "minimizer_R": _pmf_list(res.minimizer_R),
        "minimizer_P": _pmf_list(res.minimizer_P),
    }
    _emit(payload, args.format, args.out,
          csv_lines=["exponent,label", f"{_fmt(res.exponent)},{res.label}"])
    return 0


def _sim_args(args) -> tuple:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    cfg = _build_config(args, px.k)
    cost = _parse_cost(args.cost, px.k)
    if args.trials is None or args.trials < 1:
        raise CliError("--trials: required, must be >= 1")
    return px, py, cfg, cost


def _report_json_obj(report) -> dict:
    return json.loads(report.to_json())


def _cmd_simulate(args) -> int:
    px, py, cfg, cost = _sim_args(args)
    if args.n is None or args.n < 1:
        raise CliError("--n: required, must be >= 1")
    try:
        report = run_game_trials(px, py, cfg, cost, args.n, args.trials,
                                 args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    row = ",".join([str(report.n), str(report.trials),
                    _fmt(report.p_fp_hat), _fmt(report.p_fn_hat),
                    _fmt(report.fp_exponent_hat),
                    _fmt(report.fn_exponent_hat), str(report.seed)])
    _emit(_report_json_obj(report), args.format, args.out,
          csv_lines=[CSV_HEADER, row])
    return 0


def _parse_ns(text: str) -> list[int]:
    try:
        ns = [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise CliError(f"--ns: {exc}") from exc
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise CliError("--ns: needs a strictly ascending comma list, e.g. "
                       "100,200,400")
    return ns


def _cmd_sweep(args) -> int:
    px, py, cfg, cost = _sim_args(args)
    if args.ns is None:
        raise CliError("--ns: required for sweep")
    ns = _parse_ns(args.ns)
    try:
        asym = error_exponent(px, py, cfg, cost)
        reports = exponent_sweep(px, py, cfg, cost, ns, args.trials, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rows = ["n,trials,p_fp,p_fn,fp_exp,fn_exp,fn_exp_asymptotic,seed"]
    payload = []
    for rep in reports:
        obj = _report_json_obj(rep)
        obj["fn_exp_asymptotic"] = asym.exponent
        obj["label"] = asym.label
        payload.append(obj)
        emp = "inf" if math.isinf(rep.fn_exponent_hat) \
            else _fmt(rep.fn_exponent_hat)
        fpe = "inf" if math.isinf(rep.fp_exponent_hat) \
            else _fmt(rep.fp_exponent_hat)
        rows.append(",".join([
            str(rep.n), str(rep.trials), _fmt(rep.p_fp_hat),
            _fmt(rep.p_fn_hat), fpe, emp, _fmt(asym.exponent),
            str(rep.seed)]))
    fmt = args.format or "csv"
    _emit(payload, fmt, args.out, csv_lines=rows)
    return 0


def _cmd_sanov(args) -> int:
    px = _parse_pmf(args.px, "--px")
    if args.threshold is None:
        raise CliError("--threshold: required for sanov")
    if not 0.0 <= args.threshold <= 1.0:
        raise CliError(f"--threshold: must be in [0, 1], got {args.threshold}")
    coord = args.coord
    if not 0 <= coord < px.k:
        raise CliError(f"--coord: must be in [0, {px.k - 1}], got {coord}")
    if args.direction not in ("ge", "le"):
        raise CliError(f"--direction: must be 'ge' or 'le', got "
                       f"{args.direction!r}")
    if args.ns is None:
        raise CliError("--ns: required for sanov")
    ns = _parse_ns(args.ns)
    if args.trials is None or args.trials < 1:
        raise CliError("--trials: required, must be >= 1")
    t = args.threshold
    if args.direction == "ge":
        pred = lambda q: q[coord] >= t
    else:
        pred = lambda q: q[coord] <= t
    try:
        rows = sanov_probe(px, pred, ns, args.trials, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    csv_rows = ["n,empirical_exp,bound"]
    payload = []
    for n, emp, bound in rows:
        payload.append({"n": n, "empirical_exp": emp if not math.isinf(emp)
                        else None, "bound": bound})
        csv_rows.append(",".join([str(n),
                                  "inf" if math.isinf(emp) else _fmt(emp),
                                  _fmt(bound)]))
    fmt = args.format or "csv"
    _emit(payload, fmt, args.out, csv_lines=csv_rows)
    return 0


def _parse_alphas(text: str) -> list[float]:
    try:
        start, stop, step = (float(tok) for tok in text.split(":"))
    except ValueError as exc:
        raise CliError(f"--alphas: expected start:stop:step, got {text!r}"
                       ) from exc
    if step <= 0 or stop < start:
        raise CliError("--alphas: needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _cmd_margin_curve(args) -> int:
    px = _parse_pmf(args.px, "--px")
    py = _parse_pmf(args.py, "--py")
    if px.k != py.k:
        raise CliError(f"--py: alphabet size {py.k} does not match --px "
                       f"({px.k})")
    if args.alphas is None:
        raise CliError("--alphas: required for margin-curve")
    alphas = _parse_alphas(args.alphas)
    variant = args.variant or "addition"
    cost = _parse_cost(args.cost, px.k)
    rows = ["alpha,margin"]
    payload = []
    for a in alphas:
        try:
            res = security_margin(px, py, a, cost, variant)
        except ValueError as exc:
            raise CliError(f"--alphas: alpha={a:g}: {exc}") from exc
        payload.append({"alpha": a, "margin": res.margin})
        rows.append(f"{_fmt(a)},{_fmt(res.margin)}")
    fmt = args.format or "csv"
    _emit(payload, fmt, args.out, csv_lines=rows)
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "px": dict(type=str, help="pmf: bern(p), comma probs, or file"),
        "py": dict(type=str, help="pmf: bern(p), comma probs, or file"),
        "cost": dict(type=str, default=None,
                     help="cost matrix CSV file or 'absolute' (default)"),
        "alpha": dict(type=float, default=None,
                      help="corrupted fraction of training samples"),
        "lambda": dict(type=float, default=None, dest="lam",
                       help="false-positive exponent threshold (bits)"),
        "c": dict(type=float, default=None, help="training/test ratio m/n"),
        "L": dict(type=float, default=None, help="distortion budget"),
        "variant": dict(type=str, default=None,
                        choices=["addition", "replacement"]),
        "n": dict(type=int, default=None, help="test sequence length"),
        "trials": dict(type=int, default=None, help="Monte Carlo trials"),
        "seed": dict(type=int, default=0, help="master RNG seed"),
        "format": dict(type=str, default=None, choices=["json", "csv"]),
        "out": dict(type=str, default=None, help="output path (default stdout)"),
        "config": dict(type=str, default=None,
                       help="GameConfig JSON (file or literal); flags override"),
        "mode": dict(type=str, default=None,
                     choices=["asymptotic", "finite_n"]),
        "attack": dict(type=str, default=None,
                       choices=["nontargeted", "targeted"]),
        "observed": dict(type=str, default=None,
                         help="observed test pmf for the non-targeted attack"),
        "ns": dict(type=str, default=None,
                   help="ascending comma list of test lengths"),
        "probe": dict(type=str, default=None, help="pmf to test membership"),
        "threshold": dict(type=float, default=None,
                          help="half-space boundary value"),
        "coord": dict(type=int, default=1, help="half-space coordinate"),
        "direction": dict(type=str, default="ge", choices=["ge", "le"]),
        "alphas": dict(type=str, default=None, help="start:stop:step"),
        "test": dict(type=str, default=None,
                     help="test counts 'c0,c1,...' or JSON"),
        "training": dict(type=str, default=None,
                         help="training counts 'c0,c1,...' or JSON"),
    }
    for name in names:
        p.add_argument(f"--{name}", **spec[name])


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poisonid",
        description="source identification under training-set poisoning")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decide", help="accept/reject for observed types")
    _add_common(p, "test", "training", "px", "n", "alpha", "lambda", "c", "L",
                "variant", "mode", "format", "out", "config")
    p.set_defaults(func=_cmd_decide)

    p = sub.add_parser("attack", help="optimal attack for given sources")
    _add_common(p, "px", "py", "observed", "cost", "alpha", "lambda", "c",
                "L", "variant", "attack", "format", "out", "config")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("margin", help="security margin at a corruption level")
    _add_common(p, "px", "py", "cost", "alpha", "variant", "format", "out")
    p.set_defaults(func=_cmd_margin)

    p = sub.add_parser("blinding", help="blinding corruption level")
    _add_common(p, "px", "py", "variant", "format", "out")
    p.set_defaults(func=_cmd_blinding)

    p = sub.add_parser("region", help="acceptance-region radius/membership")
    _add_common(p, "px", "probe", "cost", "alpha", "lambda", "c", "L",
                "variant", "format", "out")
    p.set_defaults(func=_cmd_region)

    p = sub.add_parser("exponent", help="asymptotic false-negative exponent")
    _add_common(p, "px", "py", "cost", "alpha", "lambda", "c", "L", "variant",
                "format", "out", "config")
    p.set_defaults(func=_cmd_exponent)

    p = sub.add_parser("simulate", help="finite-n Monte Carlo error rates")
    _add_common(p, "px", "py", "cost", "alpha", "lambda", "c", "L", "variant",
                "mode", "attack", "n", "trials", "seed", "format", "out",
                "config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="empirical vs asymptotic exponent by n")
    _add_common(p, "px", "py", "cost", "alpha", "lambda", "c", "L", "variant",
                "mode", "attack", "ns", "trials", "seed", "format", "out",
                "config")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("sanov", help="large-deviation rate of a half-space")
    _add_common(p, "px", "threshold", "coord", "direction", "ns", "trials",
                "seed", "format", "out")
    p.set_defaults(func=_cmd_sanov)

    p = sub.add_parser("margin-curve", help="margin as a function of alpha")
    _add_common(p, "px", "py", "cost", "alphas", "variant", "format", "out")
    p.set_defaults(func=_cmd_margin_curve)

    return ap


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point: exit 0 on success, 2 on validation failure.

    Commands whose natural artifact is a table (sweep, sanov, margin-curve)
    default to CSV; everything else defaults to JSON.  argparse itself exits
    2 on unknown commands or flags, with usage text.
    """
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"poisonid {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
