"""Command-line front door: certificates, section comparisons, fits,
convexity thresholds, and transform utilities over JSON body descriptors.

Exit codes: 0 success/certified/consistent, 1 usage or validation error,
2 inconclusive certificate, 3 failed certificate, 4 sampled section
hypothesis violated, 5 volume conclusion violated (would falsify the
underlying theorem for certified bodies).

Every output embeds the config, seed, and package version; wall-clock data
lives only under the "run_info" key so reports are otherwise byte-stable
for a fixed seed. Reports are machine-readable (JSON, CSV for section
scans); plotting is left to external tools.
"""

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import __version__
from .bodies import body_from_descriptor, power_transform, radial_sum_k, validate_body
from .certify import CertifyConfig, certify_low_codim, section_dominance_check
from .convexity import convexity_threshold
from .ellipsoid_fit import FitConfig, fit_ellipsoid_sum
from .errors import InvalidArgumentError, InvalidBodyError
from .harmonics import DEFAULT_BANDLIMIT
from .radon import funk_inverse_body, funk_transform_body

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONCLUSIVE = 2
EXIT_FAILED = 3
EXIT_HYPOTHESIS_VIOLATED = 4
EXIT_CONCLUSION_VIOLATED = 5


def _load_body(path, label="body"):
    try:
        with open(path) as fh:
            desc = json.load(fh)
    except OSError as err:
        raise InvalidArgumentError(f"cannot read {label} file {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise InvalidArgumentError(f"{label} file {path} is not valid JSON: {err}") from None
    body = body_from_descriptor(desc)
    validate_body(body, grid_size=4000)
    return body


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report(command, args, result, started):
    return {
        "command": command,
        "version": __version__,
        "seed": args.seed,
        "result": result,
        "run_info": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "wall_time_s": time.perf_counter() - started,
        },
    }


def cmd_certify(args):
    body = _load_body(args.body)
    config = CertifyConfig(
        bandlimit=args.bandlimit,
        n_g=args.n_g,
        n_rec=args.n_rec,
        pos_tol=args.pos_tol,
        rec_tol_rel=args.rec_tol,
        seed=args.seed,
        check_convexity=args.check_convexity,
    )
    started = time.perf_counter()
    cert = certify_low_codim(body, args.a, config)
    payload = _report("certify", args, cert.to_dict(), started)
    payload["run_info"]["wall_time_s"] = cert.wall_time_s
    _write_json(args.out, payload)
    print(
        f"certify: verdict={cert.verdict} a={cert.a} n={cert.dim} L={cert.bandlimit} "
        f"residual={cert.residual:.3e} -> {args.out}"
    )
    if cert.verdict == "certified":
        return EXIT_OK
    if cert.verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_FAILED


def cmd_sections(args):
    body_k = _load_body(args.body)
    if not args.body2:
        raise InvalidArgumentError("sections needs --body2")
    body_l = _load_body(args.body2, label="body2")
    if body_k.dim != body_l.dim:
        raise InvalidArgumentError(
            f"dimension mismatch: body has n={body_k.dim}, body2 has n={body_l.dim}"
        )
    started = time.perf_counter()
    report = section_dominance_check(
        body_k,
        body_l,
        args.m,
        n_sections=args.n_sections,
        rule_size=args.rule_size,
        seed=args.seed,
    )
    if args.format == "csv":
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "vol_k_section", "vol_l_section", "margin"])
            for row in report.samples:
                writer.writerow(
                    [row["index"], repr(row["vol_k_section"]), repr(row["vol_l_section"]), repr(row["margin"])]
                )
    else:
        _write_json(args.out, _report("sections", args, report.to_dict(), started))
    print(
        f"sections: verdict={report.implication_verdict} m={report.section_dim} "
        f"worst_margin={report.worst_margin:.3e} -> {args.out}"
    )
    if report.implication_verdict == "consistent":
        return EXIT_OK
    if report.implication_verdict == "hypothesis_violated":
        return EXIT_HYPOTHESIS_VIOLATED
    return EXIT_CONCLUSION_VIOLATED


def cmd_fit(args):
    body = _load_body(args.body)
    config = FitConfig(seed=args.seed, restarts=args.restarts, max_iters=args.max_iters)
    started = time.perf_counter()
    fit, rep = fit_ellipsoid_sum(body, args.a, args.num_terms, config=config)
    result = {"fit": fit.to_payload(), "report": rep}
    _write_json(args.out, _report("fit", args, result, started))
    print(
        f"fit: terms={args.num_terms} d_r={rep['d_r']:.3e} objective={rep['objective']:.3e} "
        f"converged={rep['converged']} -> {args.out}"
    )
    return EXIT_OK if rep["converged"] else EXIT_INCONCLUSIVE


def cmd_threshold(args):
    body = _load_body(args.body)
    from .bodies import PerturbedBall

    if not isinstance(body, PerturbedBall):
        raise InvalidArgumentError("threshold expects a perturbed_ball body descriptor")
    started = time.perf_counter()
    report = convexity_threshold(
        body.phi,
        args.a,
        body.dim,
        bisection_tol=args.bisection_tol,
        seed=args.seed,
    )
    _write_json(args.out, _report("threshold", args, report.to_dict(), started))
    print(
        f"threshold: epsilon_star={report.epsilon_star:.6f} a={args.a} n={body.dim} -> {args.out}"
    )
    return EXIT_OK


def cmd_transform(args):
    body = _load_body(args.body)
    started = time.perf_counter()
    if args.op == "power":
        if args.alpha is None:
            raise InvalidArgumentError("transform power needs --alpha")
        result = {"body": power_transform(body, args.alpha).descriptor()}
    elif args.op == "radial_sum":
        if not args.body2:
            raise InvalidArgumentError("transform radial_sum needs --body2")
        other = _load_body(args.body2, label="body2")
        result = {"body": radial_sum_k([body, other], args.k).descriptor()}
    elif args.op in ("funk", "funk_inverse"):
        bandlimit = args.bandlimit or DEFAULT_BANDLIMIT[body.dim]
        fn = funk_transform_body if args.op == "funk" else funk_inverse_body
        expansion = fn(body, bandlimit)
        result = {"expansion": expansion.to_payload()}
    else:
        raise InvalidArgumentError(f"unknown transform op {args.op!r}")
    _write_json(args.out, _report("transform", args, result, started))
    print(f"transform: op={args.op} -> {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geotomo",
        description="Geometric-tomography toolkit: Busemann-Petty certificates, "
        "section comparisons, convexity thresholds, and ellipsoid fits.",
    )
    parser.add_argument("--version", action="version", version=f"geotomo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, body2=False):
        p.add_argument("--body", required=True, help="path to a JSON body descriptor")
        if body2:
            p.add_argument("--body2", help="path to the second body descriptor")
        p.add_argument("--seed", type=int, required=True, help="RNG seed (no wall-clock seeding)")
        p.add_argument("--out", required=True, help="output report path")
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("certify", help="run the (n-a)-Busemann-Petty certificate")
    common(p)
    p.add_argument("--a", type=int, choices=[2, 3], required=True)
    p.add_argument("--bandlimit", type=int, default=None)
    p.add_argument("--n-g", type=int, default=2000, dest="n_g")
    p.add_argument("--n-rec", type=int, default=200, dest="n_rec")
    p.add_argument("--rule-size", type=int, default=None, dest="rule_size")
    p.add_argument("--pos-tol", type=float, default=1e-3, dest="pos_tol")
    p.add_argument("--rec-tol", type=float, default=1e-2, dest="rec_tol")
    p.add_argument("--check-convexity", action="store_true", dest="check_convexity")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sections", help="sampled section-volume dominance check")
    common(p, body2=True)
    p.add_argument("--m", type=int, required=True, help="section dimension")
    p.add_argument("--n-sections", type=int, default=64, dest="n_sections")
    p.add_argument("--rule-size", type=int, default=256, dest="rule_size")
    p.set_defaults(func=cmd_sections)

    p = sub.add_parser("fit", help="fit an ellipsoid radial-power sum to a body")
    common(p)
    p.add_argument("--a", type=int, choices=[2, 3], required=True)
    p.add_argument("--num-terms", type=int, required=True, dest="num_terms")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=150, dest="max_iters")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("threshold", help="empirical perturbed-ball convexity threshold")
    common(p)
    p.add_argument("--a", type=int, choices=[2, 3], required=True)
    p.add_argument("--bisection-tol", type=float, default=1e-3, dest="bisection_tol")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("transform", help="funk / funk_inverse / power / radial_sum")
    common(p, body2=True)
    p.add_argument("--op", choices=["funk", "funk_inverse", "power", "radial_sum"], required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--bandlimit", type=int, default=None)
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format == "csv" and args.command != "sections":
        print("error: CSV output is only available for section scans", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (InvalidArgumentError, InvalidBodyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
