"""Command line entry point.

    evcc run --experiment sweep-density --seed 7 --iterations 1000 --out curve.csv
    evcc schema sweep-deadline
    evcc bound --alpha 12 --mu 0.0015873 --rsus 10 --deadline 80
    evcc densities --speed-model m27

Failures exit non-zero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bounds
from .experiments import EXPERIMENT_IDS, ExperimentSpec, emit_schema, run_experiment
from .traffic import CustomSpeed, LinearSpeed, PolynomialSpeed, compare_densities, m27_model


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("none", "null"):
        return None
    return text


def _parse_sets(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        value = _parse_value(value.strip())
        key = key.strip()
        if key in ("density", "road_length", "deadline", "mu", "delta", "task_interval", "vmax", "lmax", "mu_delta") and isinstance(value, int):
            value = float(value)
        out[key] = value
    return out


def _parse_terms(text: str) -> tuple:
    # "c1:a1,c2:a2"
    terms = []
    for chunk in text.split(","):
        c, a = chunk.split(":")
        terms.append((float(c), float(a)))
    return tuple(terms)


def build_speed_model(args):
    kind = args.speed_model
    if kind is None:
        return None
    if kind == "linear":
        return LinearSpeed(args.vmax, args.lmax)
    if kind == "m27":
        return m27_model()
    if kind == "poly":
        if args.poly_g is None or args.poly_terms is None:
            raise ValueError("--speed-model poly needs --poly-g and --poly-terms c:a[,c:a...]")
        return PolynomialSpeed(args.poly_g, _parse_terms(args.poly_terms), args.poly_lmax)
    if kind == "custom-csv":
        if not args.speed_csv:
            raise ValueError("--speed-model custom-csv needs --speed-csv PATH")
        return CustomSpeed.from_csv(args.speed_csv)
    raise ValueError(f"unknown speed model {kind!r}")


def _add_speed_args(p, default=None):
    p.add_argument("--speed-model", choices=("linear", "m27", "poly", "custom-csv"), default=default)
    p.add_argument("--vmax", type=float, default=100.0, help="speed limit, km/h")
    p.add_argument("--lmax", type=float, default=140.0, help="jam density, veh/km")
    p.add_argument("--poly-g", type=float)
    p.add_argument("--poly-terms", help="c:alpha pairs, comma separated")
    p.add_argument("--poly-lmax", type=float)
    p.add_argument("--speed-csv", help="two-column CSV of density,speed")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evcc", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", required=True, choices=EXPERIMENT_IDS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--iterations", type=int, default=1000)
    run.add_argument("--out")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", dest="sets")
    run.add_argument("--policy", choices=("beta", "round-robin", "mdp"), default="beta")
    _add_speed_args(run)

    schema = sub.add_parser("schema", help="print the JSON schema of an experiment's rows")
    schema.add_argument("experiment")

    bound = sub.add_parser("bound", help="closed-form violation bounds for one configuration")
    bound.add_argument("--alpha", type=float, required=True, help="mean vehicles per task")
    bound.add_argument("--mu", type=float, required=True, help="meeting rate, 1/s")
    bound.add_argument("--rsus", type=int, required=True)
    bound.add_argument("--deadline", type=float, required=True, help="seconds")
    bound.add_argument("--threshold", type=float, default=bounds.SHORT_DEADLINE_THRESHOLD)

    cdf = sub.add_parser("service-cdf", help="hypoexponential service-time CDF")
    cdf.add_argument("--x", type=float, required=True)
    cdf.add_argument("--lambda1", type=float, required=True)
    cdf.add_argument("--lambda2", type=float, required=True)

    asym = sub.add_parser("asymptotic", help="large-city and high-RSU-density limits")
    asym.add_argument("regime", choices=("large-city", "high-rsu", "high-rsu-short"))
    asym.add_argument("--density", type=float, required=True)
    asym.add_argument("--tasks", type=int, required=True)
    asym.add_argument("--deadline", type=float, required=True)
    asym.add_argument("--vmax", type=float, default=100.0)
    asym.add_argument("--lmax", type=float, default=140.0)
    asym.add_argument("--rsu-density", type=float, help="B/S, 1/km (large-city)")
    asym.add_argument("--road-length", type=float, help="km (high-rsu)")
    asym.add_argument("--mu", type=float, help="1/s (high-rsu)")

    dens = sub.add_parser("densities", help="flow-optimal and eVCC-optimal densities")
    _add_speed_args(dens, default="linear")
    return parser


def _run(args) -> str:
    spec = ExperimentSpec(args.experiment, _parse_sets(args.sets), args.iterations, args.out, args.seed,
                          args.policy, build_speed_model(args))
    result = run_experiment(spec)
    if not args.out:
        sys.stdout.write(result.render())
        return ""
    return result.summary


def _dispatch(args) -> str:
    if args.command == "run":
        return _run(args)
    if args.command == "schema":
        return json.dumps(emit_schema(args.experiment), indent=1)
    if args.command == "bound":
        inputs = bounds.BoundInputs(args.alpha, bounds.HypoexpParams.from_rates(args.mu, args.rsus), args.deadline)
        return bounds.bound_report(inputs, args.threshold).to_json()
    if args.command == "service-cdf":
        return repr(bounds.service_cdf(args.x, bounds.HypoexpParams(args.lambda1, args.lambda2)))
    if args.command == "asymptotic":
        if args.regime == "large-city":
            if args.rsu_density is None:
                raise ValueError("large-city needs --rsu-density")
            value = bounds.asymptotic_large_city(args.density, args.vmax, args.lmax, args.rsu_density, args.tasks, args.deadline)
        elif args.regime == "high-rsu":
            if args.road_length is None or args.mu is None:
                raise ValueError("high-rsu needs --road-length and --mu")
            value = bounds.asymptotic_high_rsu(args.density, args.road_length, args.tasks, args.mu, args.deadline)
        else:
            value = bounds.asymptotic_high_rsu_short_deadline(args.density, args.vmax, args.lmax, args.tasks, args.deadline)
        return repr(value)
    if args.command == "densities":
        cmp = compare_densities(build_speed_model(args))
        return json.dumps({"l_star": cmp.l_star, "l_dagger": cmp.l_dagger, "ordering_holds": cmp.ordering_holds,
                           "conditions_satisfied": cmp.conditions.satisfied})
    raise ValueError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        text = _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    if text:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
