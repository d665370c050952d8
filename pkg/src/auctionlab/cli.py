"""Command-line entry point: toy worked examples, the exact oracle,
the simulation study, and a text report over study CSVs."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from fractions import Fraction

from .errors import EnumerationBudgetError, InvalidConfigError, InvalidInputError
from .estimation import WeightingConvention
from .experiment import (
    ExperimentInstance,
    RandomizationScheme,
    SchemeKind,
    dominating_treatment_instance,
    identical_bidders_instance,
)
from .oracle import (
    check_split_proportionality,
    closed_form_bias_identical,
    exact_expected_estimate,
    verify_joint_quota_unbiasedness,
    verify_split_quota_unbiasedness,
)
from .study import StudyConfig, run_study, rows_to_csv
from .throttling import QuotaConfig, QuotaTreatmentConfig
from .auction import Mechanism

DOMINATING_CONTROL = (4.0, 4.25, 4.50, 4.75)
DOMINATING_TREATMENT = (6.0, 5.50, 5.25, 5.0)


def _fmt(value: Fraction) -> str:
    text = f"{float(value):.12g}"
    if value.denominator != 1:
        return f"{text} (= {value})"
    return text


def _print_toy(instance: ExperimentInstance, closed_form: Fraction | None) -> None:
    scheme = RandomizationScheme(SchemeKind.PAIR_BERNOULLI, p=0.5)
    for convention in (WeightingConvention.UNWEIGHTED, WeightingConvention.HORVITZ_THOMPSON):
        result = exact_expected_estimate(instance, scheme, convention=convention)
        if convention is WeightingConvention.UNWEIGHTED:
            print(f"tau = {_fmt(result.tau)}")
        print(f"E[estimate] ({convention.value}) = {_fmt(result.e_tau_hat)}")
        print(f"bias ({convention.value}, enumerated) = {_fmt(result.bias)}")
    if closed_form is not None:
        print(f"bias (unweighted, closed form) = {_fmt(closed_form)}")


def cmd_toy(args: argparse.Namespace) -> int:
    if args.which == "identical":
        instance = identical_bidders_instance(args.k, args.r0, args.r1)
        print(
            f"identical bidders: k={args.k}, control bid {args.r0:g}, "
            f"treatment bid {args.r1:g}"
        )
        _print_toy(instance, closed_form_bias_identical(args.k, args.r0, args.r1))
    else:
        b0 = args.b0 if args.b0 else list(DOMINATING_CONTROL)
        b1 = args.b1 if args.b1 else list(DOMINATING_TREATMENT)
        instance = dominating_treatment_instance(b0, b1)
        print(f"dominating treatment: control bids {b0}, treatment bids {b1}")
        _print_toy(instance, None)
    return 0


def _scheme_from_args(args) -> RandomizationScheme:
    return RandomizationScheme(SchemeKind(args.scheme), p=args.p)


def _quota_from_args(args, instance: ExperimentInstance) -> QuotaConfig:
    if args.quota_mode == "none":
        return QuotaConfig()
    advertisers = instance.advertisers
    if args.quota_mode == "joint":
        if args.quota is None:
            raise InvalidConfigError("--quota is required for joint mode")
        return QuotaConfig.joint({adv: args.quota for adv in advertisers})
    if args.q1 is None or args.q0 is None:
        raise InvalidConfigError("--q1 and --q0 are required for split mode")
    return QuotaConfig.split(
        {adv: args.q1 for adv in advertisers}, {adv: args.q0 for adv in advertisers}
    )


def cmd_oracle(args: argparse.Namespace) -> int:
    with open(args.instance) as fh:
        instance = ExperimentInstance.from_json(fh.read())
    quota = _quota_from_args(args, instance)
    scheme = _scheme_from_args(args)
    mechanism = Mechanism(args.mechanism)
    if args.verify == "joint_saturated":
        check = verify_joint_quota_unbiasedness(instance, quota, mechanism, scheme)
        print(f"E[estimate] = {_fmt(check.e_tau_hat)}")
        print(f"true effect under throttling = {_fmt(check.tau_star)}")
        print(f"gap = {_fmt(check.gap)}")
        print(f"states enumerated = {check.n_states}")
    elif args.verify == "split_proportional":
        report = check_split_proportionality(instance, quota, scheme)
        print(f"conditions: {report.interpretation}")
        for rec in report.advertisers:
            print(
                f"advertiser {rec.advertiser}: bid_zero_when_x0={rec.bid_zero_when_x0} "
                f"control_proportional={rec.control_proportional} "
                f"treated_proportional={rec.treated_proportional}"
            )
        print(f"all conditions hold = {report.all_hold}")
        check = verify_split_quota_unbiasedness(instance, quota, mechanism, scheme)
        print(f"E[estimate] = {_fmt(check.e_tau_hat)}")
        print(f"true effect under throttling = {_fmt(check.tau_star)}")
        print(f"gap = {_fmt(check.gap)}")
    else:
        treatment = QuotaTreatmentConfig() if args.covariate_filter else None
        result = exact_expected_estimate(
            instance,
            scheme,
            quota,
            mechanism,
            WeightingConvention(args.convention),
            treatment=treatment,
        )
        print(f"E[estimate] = {_fmt(result.e_tau_hat)}")
        print(f"tau = {_fmt(result.tau)}")
        print(f"tau_star = {_fmt(result.tau_star)}")
        print(f"bias vs tau = {_fmt(result.bias)}")
        print(f"bias vs tau_star = {_fmt(result.bias_vs_tau_star)}")
        print(f"states enumerated = {result.n_states}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        config = StudyConfig.from_json(fh.read())
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    rows = run_study(config)
    if args.format == "json":
        payload = json.dumps(
            [
                {col: getattr(row, col) for col in row.__dataclass_fields__}
                for row in rows
            ],
            indent=2,
            default=str,
        )
    else:
        payload = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(payload)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def _report_table(rows: list[dict], value_key: str, column_key: str) -> list[str]:
    columns = sorted({r[column_key] for r in rows}, key=float)
    series = sorted({(r["scheme"], r["throttle_mode"]) for r in rows})
    lines = []
    header = f"{'quota':>8} {'series':>28} " + " ".join(f"{c:>22}" for c in columns)
    lines.append(header)
    for nq in sorted({int(r["n_queries"]) for r in rows}):
        lines.append(f"n_queries = {nq}")
        for frac in sorted({r["quota_frac"] for r in rows}, key=Fraction):
            for scheme, mode in series:
                cells = []
                for col in columns:
                    match = [
                        r
                        for r in rows
                        if int(r["n_queries"]) == nq
                        and r["quota_frac"] == frac
                        and r[column_key] == col
                        and (r["scheme"], r["throttle_mode"]) == (scheme, mode)
                    ]
                    if not match:
                        cells.append(f"{'-':>22}")
                        continue
                    row = match[0]
                    value = row[value_key]
                    se = row.get("rel_bias_se", "")
                    if value == "":
                        cells.append(f"{'undef':>22}")
                    elif value_key == "rel_bias" and se:
                        cells.append(f"{float(value):>12.4f} ±{2 * float(se):<8.4f}")
                    else:
                        cells.append(f"{float(value):>22.4f}")
                lines.append(
                    f"{frac:>8} {scheme + '/' + mode:>28} " + " ".join(cells)
                )
    return lines


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidInputError("empty CSV: nothing to report")
    bid_rows = [r for r in rows if r["treatment_type"] == "bid"]
    quota_rows = [r for r in rows if r["treatment_type"] == "quota"]
    if bid_rows:
        print("bid treatment: relative bias by treatment mean log bid")
        print("\n".join(_report_table(bid_rows, "rel_bias", "mu1")))
        ratio_rows = [r for r in bid_rows if r["var_ratio"] != ""]
        if ratio_rows:
            print("\nbid treatment: pair/query variance ratio")
            print("\n".join(_report_table(ratio_rows, "var_ratio", "mu1")))
    if quota_rows:
        if bid_rows:
            print()
        print("throttling treatment: relative bias by covariate rate")
        print("\n".join(_report_table(quota_rows, "rel_bias", "p_x")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auctionlab",
        description="Auction A/B experiment simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    toy = sub.add_parser("toy", help="worked single-auction bias examples")
    toy.add_argument("which", choices=["identical", "dominating"])
    toy.add_argument("--k", type=int, default=4)
    toy.add_argument("--r0", type=float, default=5.0)
    toy.add_argument("--r1", type=float, default=6.0)
    toy.add_argument("--b0", type=float, nargs="+")
    toy.add_argument("--b1", type=float, nargs="+")
    toy.set_defaults(func=cmd_toy)

    oracle = sub.add_parser("oracle", help="exact enumeration on an instance file")
    oracle.add_argument("--instance", required=True)
    oracle.add_argument(
        "--scheme",
        default="query_balanced",
        choices=[k.value for k in SchemeKind],
    )
    oracle.add_argument("--p", type=float, default=0.5)
    oracle.add_argument("--quota-mode", default="none", choices=["none", "joint", "split"])
    oracle.add_argument("--quota", type=int)
    oracle.add_argument("--q1", type=int)
    oracle.add_argument("--q0", type=int)
    oracle.add_argument(
        "--mechanism",
        default="first_price",
        choices=[m.value for m in Mechanism],
    )
    oracle.add_argument(
        "--convention",
        default="horvitz_thompson",
        choices=[c.value for c in WeightingConvention],
    )
    oracle.add_argument("--covariate-filter", action="store_true")
    oracle.add_argument(
        "--verify",
        default="none",
        choices=["none", "joint_saturated", "split_proportional"],
    )
    oracle.set_defaults(func=cmd_oracle)

    simulate = sub.add_parser("simulate", help="run the Monte Carlo study grid")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out")
    simulate.add_argument("--format", default="csv", choices=["csv", "json"])
    simulate.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="summarize a study CSV as a text table")
    report.add_argument("csv")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidConfigError, InvalidInputError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
