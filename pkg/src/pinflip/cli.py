"""Command-line entry point: every experiment as a reproducible command.

Commands: phase, exact, gap, sample, simulate, metastable.  Identical
configuration produces byte-identical data files; seeds are mandatory for
stochastic commands (flag --seed or env PINFLIP_SEED).  Exit codes: 0 ok,
2 validation, 3 capacity, 4 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dynamics, exact, metastability, spectral
from .errors import CapacityError, ConvergenceError, PinflipError, ValidationError
from .model import ModelParams, PathConfig
from .phase import activation_energy, phase_grid, write_grid_csv
from .dynamics import replica_rng

SCHEMA = "pinflip/1"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, float):
        if not math.isfinite(v):
            return "null"
        return format(v, ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    raise TypeError(f"unsupported scalar {type(v)}")


def _json_dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats at 17 significant digits and
    non-finite values mapped to null."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{k}": {_json_dumps(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return _fmt(obj)


def _write_json(obj: dict, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(_json_dumps(obj) + "\n")


def _parse_range(spec: str) -> list[float]:
    """lo:hi:step inclusive, or a single value."""
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValidationError(f"range must be lo:hi:step, got {spec!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0 or hi < lo:
        raise ValidationError(f"bad range {spec!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _load_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"config line is not key=value: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _seed_of(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PINFLIP_SEED")
    if env is not None:
        return int(env)
    raise ValidationError("stochastic command needs --seed or PINFLIP_SEED")


def _params_of(args) -> ModelParams:
    return ModelParams(args.N, getattr(args, "lam"), args.sigma)


def _figure_path(out: str) -> str:
    stem, _ = os.path.splitext(out)
    return stem + ".png"


def _cmd_phase(args) -> None:
    lams = _parse_range(args.lam)
    sigs = _parse_range(args.sigma)
    points = phase_grid(lams, sigs)
    write_grid_csv(points, args.out)
    if args.figures:
        from . import report

        report.phase_figure(points, _figure_path(args.out))


def _cmd_exact(args) -> None:
    params = _params_of(args)
    e, beta = activation_energy(params.lam, params.sigma)
    doc = {
        "schema": SCHEMA,
        "command": "exact",
        "N": params.N,
        "lambda": params.lam,
        "sigma": params.sigma,
        "logZ": exact.partition_function(params),
        "beta_star": beta,
    }
    if beta is not None:
        w = exact.bottleneck_weights(params, beta)
        doc["logZ_E1"] = w.log_Z_E1
        doc["logZ_E2"] = w.log_Z_E2
        doc["logZ_boundary"] = w.log_Z_boundary
    else:
        doc["logZ_E1"] = None
        doc["logZ_E2"] = None
        doc["logZ_boundary"] = None
    if args.renewal_check:
        doc["renewal_defect"] = exact.renewal_identity_check(params)
    if args.tilted_check:
        tw = exact.tilted_walk_positivity(params.N, params.sigma)
        doc["tilted_defect"] = abs(
            tw.log_excursion_Z - exact.excursion_Z(params.N, params.sigma)
        )
    law = None
    if args.lmax_law:
        law = exact.lmax_distribution(params)
        with open(args.lmax_law, "w") as fh:
            fh.write("l_max,probability\n")
            for m in range(1, params.N + 1):
                fh.write(f"{m},{format(law[m], '.17g')}\n")
    profile = None
    if args.profile or args.site is not None:
        table = exact.ForwardTable(params, retain=True)
        if args.profile:
            profile = np.empty(2 * params.N + 1)
            with open(args.profile, "w") as fh:
                fh.write("site,mean_height\n")
                for x in range(2 * params.N + 1):
                    marg = table.site_marginal(x)
                    profile[x] = float(np.arange(len(marg)) @ marg)
                    fh.write(f"{x},{format(profile[x], '.17g')}\n")
        if args.site is not None:
            if args.site_out is None:
                raise ValidationError("--site needs --site-out FILE")
            marg = table.site_marginal(args.site)
            with open(args.site_out, "w") as fh:
                fh.write("height,probability\n")
                for h, p in enumerate(marg):
                    fh.write(f"{h},{format(p, '.17g')}\n")
    _write_json(doc, args.out)
    if args.figures:
        from . import report

        if law is not None:
            report.lmax_law_figure(law, params, _figure_path(args.lmax_law))
        if profile is not None:
            report.marginal_figure(profile, params, _figure_path(args.profile))


def _cmd_gap(args) -> None:
    if isinstance(args.N, str) and ":" in args.N:
        ns = [int(v) for v in _parse_range(args.N)]
        rows = []
        with open(args.out, "w") as fh:
            fh.write("N,lambda,sigma,gap,t_rel\n")
            for n in ns:
                pr = ModelParams(n, args.lam, args.sigma)
                gap = spectral.spectral_gap(spectral.build_generator(pr))
                rows.append((n, gap))
                fh.write(
                    f"{n},{format(args.lam, '.17g')},{format(args.sigma, '.17g')},"
                    f"{format(gap, '.17g')},{format(1.0 / gap, '.17g')}\n"
                )
        if args.figures:
            from . import report

            report.gap_sweep_figure(rows, args.lam, args.sigma, _figure_path(args.out))
        return
    args.N = int(args.N)
    params = _params_of(args)
    gen = spectral.build_generator(params)
    gap = spectral.spectral_gap(gen)
    e, beta = activation_energy(params.lam, params.sigma)
    bounds = {
        "bottleneck": None,
        "cheeger": None,
        "wilson": spectral.wilson_bound(params.N),
        "fa": spectral.fa_bound(params, gen),
    }
    checks: dict = {"jerrum": None, "sandwich": None, "star_leq": None}
    if beta is not None and exact._part_cap(beta * params.N, params.N) >= 1:
        bounds["bottleneck"] = spectral.bottleneck_bound(params, beta)
        red = spectral.reduced_chain(params, "two_set", beta_star=beta, method="dp")
        bounds["cheeger"] = spectral.cheeger_bound(red)
    if params.N <= 8:
        checks["jerrum"] = spectral.jerrum_check(params, "lr").holds
    if params.N <= spectral.TV_CAP:
        t_rel = 1.0 / gap
        tmix = spectral.tv_mixing_exact(params, args.epsilon)
        mu_min = float(np.min(gen.pi))
        lo = t_rel * math.log(1.0 / (2.0 * args.epsilon))
        hi = t_rel * math.log(1.0 / (args.epsilon * mu_min))
        checks["sandwich"] = bool(lo * (1 - 1e-3) <= tmix <= hi * (1 + 1e-3))
        checks["t_mix"] = tmix
    if params.N <= args.star_cap:
        star = spectral.star_chain_gap(params)
        checks["star_leq"] = bool(star <= gap + 1e-9)
        checks["star_gap"] = star
    doc = {
        "schema": SCHEMA,
        "command": "gap",
        "N": params.N,
        "lambda": params.lam,
        "sigma": params.sigma,
        "gap": gap,
        "t_rel": 1.0 / gap,
        "activation_energy": e,
        "beta_star": beta,
        "bounds": bounds,
        "checks": checks,
    }
    _write_json(doc, args.out)
    if args.figures:
        from . import report

        report.gap_figure(doc, _figure_path(args.out))


def _cmd_sample(args) -> None:
    params = _params_of(args)
    seed = _seed_of(args)
    table = exact.ForwardTable(params, retain=True)
    rng = replica_rng(seed, 0)
    paths = [table.sample(rng) for _ in range(args.replicas)]
    with open(args.out, "w") as fh:
        for p in paths:
            fh.write(p.to_text() + "\n")
    if args.figures:
        from . import report

        report.samples_figure(params, paths, _figure_path(args.out))


def _cmd_simulate(args) -> None:
    params = _params_of(args)
    seed = _seed_of(args)
    if args.coalescence:
        est = dynamics.coalescence_mixing_estimate(
            params, args.replicas, seed, t_cap=args.horizon
        )
        doc = {
            "schema": SCHEMA,
            "command": "simulate.coalescence",
            "N": params.N,
            "lambda": params.lam,
            "sigma": params.sigma,
            "replicas": args.replicas,
            "censored": est.censored,
            "mean": est.mean,
            "ci95": list(est.ci95),
            "quantiles": {str(q): v for q, v in est.quantiles.items()},
        }
        _write_json(doc, args.out)
        return
    rng = replica_rng(seed, 0)
    if args.initial == "zigzag":
        init = PathConfig.zigzag(params.N)
    elif args.initial == "maximal":
        init = PathConfig.maximal(params.N)
    else:
        init = exact.ForwardTable(params, retain=True).sample(rng)
    e, beta = activation_energy(params.lam, params.sigma)
    localized = None
    if beta is not None:
        from .phase import is_localized

        localized = is_localized(params.lam, params.sigma)
    traj = dynamics.simulate(
        params,
        init,
        args.horizon,
        rng,
        cadence=args.cadence,
        beta_star=beta,
        localized=localized,
        record_events=args.events is not None,
    )
    traj.write_csv(args.out)
    if args.events:
        traj.write_events(args.events)
    if args.figures:
        from . import report

        report.trajectory_figure(traj, _figure_path(args.out))


def _exit_chunk(payload):
    (n, lam, sig, seed, lo, hi, horizon) = payload
    return metastability.exit_times(ModelParams(n, lam, sig), seed, lo, hi, horizon)


def _cmd_metastable(args) -> None:
    params = _params_of(args)
    seed = _seed_of(args)
    predicted = metastability.predicted_exit_scale(params)
    if predicted * args.replicas > args.budget:
        raise ValidationError(
            f"predicted total simulation time {predicted * args.replicas:.3g} "
            f"(mean exit ~{predicted:.3g} x {args.replicas} replicas) exceeds "
            f"budget {args.budget:.3g}; raise --budget to force"
        )
    horizon = args.horizon if args.horizon is not None else math.inf
    if args.jobs > 1:
        chunk = max(1, args.replicas // (4 * args.jobs))
        payloads = [
            (params.N, params.lam, params.sigma, seed, lo, min(lo + chunk, args.replicas), horizon)
            for lo in range(0, args.replicas, chunk)
        ]
        obs: list = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for part in pool.map(_exit_chunk, payloads):
                obs.extend(part)
        obs.sort(key=lambda t: t[0])
    else:
        obs = metastability.exit_times(params, seed, 0, args.replicas, horizon)
    reference = None
    if params.N <= 12:
        reference = 1.0 / spectral.spectral_gap(spectral.build_generator(params))
    ex = metastability.exit_time_experiment(
        params, args.replicas, seed, horizon, reference_scale=reference,
        observations=obs,
    )
    with open(args.out, "w") as fh:
        fh.write("replica,exit_time,censored\n")
        for r, t, cens in obs:
            fh.write(f"{r},{format(t, '.17g')},{int(cens)}\n")
    summary = {
        "schema": SCHEMA,
        "command": "metastable",
        "N": params.N,
        "lambda": params.lam,
        "sigma": params.sigma,
        "well": ex.well,
        "regime": ex.regime,
        "beta_star": ex.beta_star,
        "rate": ex.fit.rate,
        "mean": ex.fit.mean,
        "KS": ex.fit.ks,
        "n": ex.fit.n,
        "censored_n": ex.fit.censored_n,
        "predicted_scale": predicted,
        "reference_scale": reference,
    }
    if args.summary:
        _write_json(summary, args.summary)
    if args.figures:
        from . import report

        report.exit_times_figure(ex.exit_times, ex.fit.rate, _figure_path(args.out))


def _add_common(p: argparse.ArgumentParser) -> None:
    # N stays a string until dispatch: the gap command accepts lo:hi:step
    # sweeps, everything else coerces to a single integer
    p.add_argument("--N", type=str, required=False)
    p.add_argument("--lambda", dest="lam", type=str, required=False)
    p.add_argument("--sigma", type=str, required=False)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, required=False)
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format where a command supports both")
    p.add_argument("--figures", action="store_true",
                   help="render a matplotlib figure next to the data output")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config", type=str, default=None,
                   help="flat key=value file supplying defaults for flags")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pinflip",
        description="area-tilted pinning interface: exact computations, "
        "spectral bounds, and heat-bath dynamics",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="phase-diagram grid with regime labels")
    _add_common(p)

    p = sub.add_parser("exact", help="partition functions, event weights, laws")
    _add_common(p)
    p.add_argument("--renewal-check", action="store_true")
    p.add_argument("--tilted-check", action="store_true")
    p.add_argument("--lmax-law", type=str, default=None)
    p.add_argument("--profile", type=str, default=None)
    p.add_argument("--site", type=int, default=None)
    p.add_argument("--site-out", type=str, default=None)

    p = sub.add_parser("gap", help="exact spectral gap and every bound")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--star-cap", type=int, default=10,
                   help="compute the star-chain check up to this N")

    p = sub.add_parser("sample", help="exact equilibrium draws")
    _add_common(p)
    p.add_argument("--replicas", type=int, default=100)

    p = sub.add_parser("simulate", help="heat-bath trajectories and coupling")
    _add_common(p)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--cadence", type=float, default=1.0)
    p.add_argument("--initial", choices=("zigzag", "maximal", "equilibrium"),
                   default="zigzag")
    p.add_argument("--events", type=str, default=None,
                   help="binary event log (16-byte records: f64 time, u32 site, u32 height)")
    p.add_argument("--coalescence", action="store_true",
                   help="measure extremal-pair coalescence instead of one trajectory")
    p.add_argument("--replicas", type=int, default=100)

    p = sub.add_parser("metastable", help="exit-time experiment from the well")
    _add_common(p)
    p.add_argument("--replicas", type=int, default=500)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--budget", type=float, default=5e6,
                   help="refuse runs whose forecast total time exceeds this")
    p.add_argument("--summary", type=str, default=None)
    return ap


def _apply_config(args) -> None:
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        for key, raw in cfg.items():
            attr = {"lambda": "lam"}.get(key, key.replace("-", "_"))
            if not hasattr(args, attr):
                raise ValidationError(f"unknown config key {key!r}")
            cur = getattr(args, attr)
            if cur is None or cur is False:
                if isinstance(cur, bool):
                    setattr(args, attr, raw.lower() in ("1", "true", "yes"))
                else:
                    setattr(args, attr, raw)


def _coerce(args) -> None:
    for attr, conv in (("seed", int), ("replicas", int),
                       ("horizon", float), ("cadence", float),
                       ("budget", float), ("epsilon", float),
                       ("site", int), ("jobs", int)):
        if hasattr(args, attr) and isinstance(getattr(args, attr), str):
            setattr(args, attr, conv(getattr(args, attr)))
    if isinstance(args.N, str) and not (args.command == "gap" and ":" in args.N):
        args.N = int(args.N)
    if args.command != "phase":
        if hasattr(args, "lam") and isinstance(args.lam, str):
            args.lam = float(args.lam)
        if hasattr(args, "sigma") and isinstance(args.sigma, str):
            args.sigma = float(args.sigma)


_DISPATCH = {
    "phase": _cmd_phase,
    "exact": _cmd_exact,
    "gap": _cmd_gap,
    "sample": _cmd_sample,
    "simulate": _cmd_simulate,
    "metastable": _cmd_metastable,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _apply_config(args)
        _coerce(args)
        if args.out is None:
            raise ValidationError("--out is required")
        needed = {
            "phase": ("lam", "sigma"),
            "exact": ("N", "lam", "sigma"),
            "gap": ("N", "lam", "sigma"),
            "sample": ("N", "lam", "sigma"),
            "simulate": ("N", "lam", "sigma"),
            "metastable": ("N", "lam", "sigma"),
        }[args.command]
        for attr in needed:
            if getattr(args, attr) is None:
                flag = "--lambda" if attr == "lam" else f"--{attr}"
                raise ValidationError(f"{flag} is required for {args.command}")
        _DISPATCH[args.command](args)
        return 0
    except ValidationError as err:
        print(f"error[validation]: {err}", file=sys.stderr)
        return 2
    except CapacityError as err:
        print(f"error[capacity]: {err}", file=sys.stderr)
        return 3
    except ConvergenceError as err:
        print(f"error[convergence]: {err}", file=sys.stderr)
        return 4
    except PinflipError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
