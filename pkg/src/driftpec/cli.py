"""Command-line interface.

Subcommands: ``run`` (full multi-period experiment), ``twirl`` (closed-form
twirled damping coefficients), ``decompose`` (quasi-probability expansion of
a gate over a noisy basis), ``infer`` (MAP channel estimate from a counts
file), ``metrics`` (Hellinger distance between histograms or Dirichlet
parameter files).

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure in
every period (or an unrecoverable runtime error).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiment
from .errors import ConfigError, DriftPecError
from .inference import CalibrationModel, MapOptions, map_estimate, predicted_probs, roll_prior
from .noise import schedule_channel, twirled_apd_coeffs
from .pec import quasiprob_decompose
from .quantum import PauliChannel, pauli_labels
from .stats import DirichletParams, hellinger_dirichlet, bhattacharyya_dirichlet, hellinger_discrete
from .inference import ShotRecord

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (required for run)")
    parser.add_argument("--config", default=None, help="YAML config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", default=None, help="output format")
    parser.add_argument("--allow-unphysical", action="store_true",
                        help="accept schedules with T2 > 2*T1")
    parser.add_argument("--workers", type=int, default=None, help="worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftpec",
                                     description="Adaptive cancellation of drifting Pauli noise")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the multi-period experiment")
    _common_flags(p_run)
    p_run.add_argument("--periods", type=int, default=None, help="periods to run")

    p_twirl = sub.add_parser("twirl", help="print twirled damping coefficients")
    _common_flags(p_twirl)
    p_twirl.add_argument("--t", type=float, required=True, help="gate time, microseconds")
    p_twirl.add_argument("--t1", type=float, required=True, help="T1, microseconds")
    p_twirl.add_argument("--t2", type=float, required=True, help="T2, microseconds")

    p_dec = sub.add_parser("decompose", help="print the quasi-probability expansion")
    _common_flags(p_dec)
    p_dec.add_argument("--period", type=int, default=0,
                       help="schedule period supplying the channel (default 0)")
    p_dec.add_argument("--coeffs", default=None,
                       help="JSON file with explicit channel coefficients instead")
    p_dec.add_argument("--gate", default="HH", choices=sorted(experiment.GATES))

    p_inf = sub.add_parser("infer", help="MAP channel estimate from a counts file")
    _common_flags(p_inf)
    p_inf.add_argument("--counts", required=True, help="file of outcome,count lines")
    p_inf.add_argument("--gate", default="HH", choices=sorted(experiment.GATES))
    p_inf.add_argument("--model", default="plain-noisy",
                       choices=["plain-noisy", "old-pec-mixture"])
    p_inf.add_argument("--hyp-period", type=int, default=0,
                       help="schedule period whose channel built the deployed circuit "
                            "(mixture model only)")
    p_inf.add_argument("--prior-coeffs", default=None,
                       help="JSON channel coefficients to anchor the prior at")
    p_inf.add_argument("--kappa", type=float, default=50.0, help="prior concentration")

    p_met = sub.add_parser("metrics", help="Hellinger distance between two files")
    _common_flags(p_met)
    p_met.add_argument("file_a")
    p_met.add_argument("file_b")
    p_met.add_argument("--kind", default="hist", choices=["hist", "dirichlet"])
    return parser


def _load_vector(path: str) -> np.ndarray:
    with open(path) as fh:
        return np.asarray(json.load(fh), dtype=float)


def _emit(payload: dict, fmt: str | None) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    for key, value in payload.items():
        if isinstance(value, list):
            value = " ".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = f"{value:.6f}"
        print(f"{key}: {value}")


def _cmd_run(args) -> int:
    if args.config is not None:
        config = experiment.config_from_yaml(args.config)
    else:
        if args.seed is None:
            raise ConfigError("run needs --seed or a config file that sets one")
        config = experiment.config_from_mapping({"seed": args.seed})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.periods is not None:
        overrides["periods"] = args.periods
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.allow_unphysical:
        overrides["allow_unphysical"] = True
        overrides["schedule"] = (config.schedule
                                 if config.schedule is not None else None)
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    fmt = args.format or "both"
    if fmt not in ("json", "csv", "both"):
        raise ConfigError(f"run format must be json, csv or both, got {fmt!r}")
    formats = ("json", "csv") if fmt == "both" else (fmt,)

    reports = experiment.run_experiment(config)
    paths = experiment.emit_reports(reports, config.out_dir, formats=formats)
    failures = 0
    for r in reports:
        if r.error is not None:
            failures += 1
            print(f"period {r.period}: FAILED ({r.error})  [{r.wall_clock_s:.2f}s]")
        else:
            print(f"period {r.period}: hd_nonadaptive={r.hd_nonadaptive:.4f} "
                  f"hd_adaptive={r.hd_adaptive:.4f} "
                  f"hd_nonstationarity={r.hd_nonstationarity:.4f}  "
                  f"[{r.wall_clock_s:.2f}s]")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_RUNTIME if failures == len(reports) else EXIT_OK


def _cmd_twirl(args) -> int:
    coeffs = twirled_apd_coeffs(args.t, args.t1, args.t2)
    _emit({"c0": coeffs.c0, "c1": coeffs.c1, "c2": coeffs.c2, "c3": coeffs.c3},
          args.format)
    return EXIT_OK


def _active_schedule(args):
    if args.config is not None:
        return experiment.config_from_yaml(args.config).resolved_schedule()
    return experiment.default_schedule(args.allow_unphysical)


def _cmd_decompose(args) -> int:
    if args.coeffs is not None:
        channel = PauliChannel.from_vector(_load_vector(args.coeffs))
    else:
        channel, _ = schedule_channel(_active_schedule(args), args.period)
    quasi = quasiprob_decompose(channel, experiment.GATES[args.gate])
    labels = pauli_labels(channel.n)
    _emit({"gate": args.gate,
           "theta_norm": quasi.theta_norm,
           "labels": labels,
           "theta": [float(t) for t in quasi.theta]},
          args.format)
    return EXIT_OK


def _cmd_infer(args) -> int:
    counts = experiment.read_counts_file(args.counts)
    record = ShotRecord(counts=counts)
    gate = experiment.GATES[args.gate]
    rho = experiment.default_test_state()
    theta_old = None
    if args.model == "old-pec-mixture":
        hyp, _ = schedule_channel(_active_schedule(args), args.hyp_period)
        theta_old = quasiprob_decompose(hyp, gate).theta
    model = CalibrationModel(gate=gate, rho_test=rho, kind=args.model,
                             theta_old=theta_old)
    if args.prior_coeffs is not None:
        prior = roll_prior(_load_vector(args.prior_coeffs), args.kappa)
    else:
        prior = DirichletParams(eta=np.full(4**rho.n_qubits, 2.0))
    options = MapOptions(seed=args.seed if args.seed is not None else 0)
    estimate = map_estimate(record, model, prior, options)
    _emit({"labels": pauli_labels(rho.n_qubits),
           "x_hat": [float(v) for v in estimate.x_hat.x],
           "predicted_hist": [float(v) for v in predicted_probs(estimate.x_hat, model)],
           "log_posterior": estimate.log_posterior_value,
           "iterations": estimate.iterations,
           "converged": estimate.converged},
          args.format)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    a = _load_vector(args.file_a)
    b = _load_vector(args.file_b)
    if args.kind == "hist":
        _emit({"hellinger": hellinger_discrete(a, b)}, args.format)
    else:
        _emit({"hellinger": hellinger_dirichlet(a, b),
               "bhattacharyya": bhattacharyya_dirichlet(a, b)}, args.format)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "twirl": _cmd_twirl,
    "decompose": _cmd_decompose,
    "infer": _cmd_infer,
    "metrics": _cmd_metrics,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DriftPecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
