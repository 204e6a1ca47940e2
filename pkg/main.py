"""Command-line front end.

Exit codes: 0 when the command completed (and, where it applies, randomness
was certified), 2 for a structured domain failure such as a failed
certification, 1 for usage, input or IO errors.
"""

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

from src.analysis.certifier import (
    BellModel,
    certificate_from_json,
    certificate_to_json,
    certify,
    local_pvalue,
)
from src.analysis.estimator import chsh_from_correlators, chsh_from_counts
from src.analysis.nosignalling import check_no_signalling
from src.analysis.stat_tests import battery_table, battery_to_json, run_battery
from src.config import settings
from src.data.reference_data import reference_counts, reported_values
from src.data.schemas import (
    CountsTable,
    DeviceKind,
    DeviceModel,
    RunConfig,
    SettingsDistribution,
)
from src.data.trial_log import (
    OUTPUT_STREAMS,
    aggregate,
    output_bits,
    read_counts_json,
    read_trial_csv,
    write_trial_csv,
)
from src.devices.device_factory import DeviceFactory
from src.devices.simulator import (
    INPUT_DISTRIBUTIONS,
    distribution_from_name,
    load_run_config,
    run,
)
from src.expansion.protocol import report_to_json, run_expansion
from src.expansion.sampler import SeedStream
from src.extraction.toeplitz import (
    ExtractorParams,
    output_length,
    raw_bits_from_log,
    read_bits,
    seed_length,
    toeplitz_extract,
    write_bits,
)
from src.utils.errors import BellRandError, CertificationFailedError, MissingInputError
from src.utils.logger import logger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DOMAIN_FAILURE = 2

# Acceptance thresholds checked by reproduce-paper.
REPRODUCTION_I_HAT = (2.414, 0.001)
REPRODUCTION_EPSILON = (0.3774, 0.0005)
REPRODUCTION_BITS = (40.0, 42.0)
REPRODUCTION_LOCAL_PVALUE = 0.00077
REPRODUCTION_NS_PVALUE = 0.05


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


def _load_counts(path: str) -> CountsTable:
    if Path(path).suffix.lower() == ".json":
        return read_counts_json(path)
    return aggregate(read_trial_csv(path))


def _distribution(args, n: int):
    return distribution_from_name(args.inputs, n, args.q, args.alpha)


def _audit_session(args):
    if not (getattr(args, "audit", False) or settings.audit_enabled):
        return None
    from src.data.models import create_tables, get_db_session

    create_tables()
    return get_db_session()


def _device_model(args) -> DeviceModel:
    defaults = DeviceModel()
    return DeviceModel(
        kind=DeviceKind(args.device),
        visibility=args.visibility,
        chi_deg=args.chi_deg,
        phi_a_deg=tuple(args.phi_a) if args.phi_a else defaults.phi_a_deg,
        phi_b_deg=tuple(args.phi_b) if args.phi_b else defaults.phi_b_deg,
        a_table=tuple(args.a_table) if args.a_table else defaults.a_table,
        b_table=tuple(args.b_table) if args.b_table else defaults.b_table,
        strategy=args.strategy,
    )


# --- Commands --- #


def cmd_simulate(args) -> int:
    if args.config:
        config = load_run_config(args.config, n=args.n)
    else:
        if args.n is None:
            args.parser.error("the following arguments are required: --n (or --config)")
        config = RunConfig(
            n=args.n,
            dist=_distribution(args, args.n),
            rng_seed=args.seed,
            device=_device_model(args),
        )
    log = run(config)
    write_trial_csv(log, args.output)
    counts = aggregate(log)
    estimate = chsh_from_counts(counts, config.dist)
    try:
        from_correlators = chsh_from_correlators(counts)
    except MissingInputError as e:
        logger.warning(f"Correlator form of CHSH unavailable: {e}")
        from_correlators = None
    correlator_text = "n/a" if from_correlators is None else f"{from_correlators:.4f}"
    _emit(
        args,
        {
            "n": log.n,
            "i_hat": estimate.i_hat,
            "std_error": estimate.std_error,
            "chsh_correlators": from_correlators,
            "q": config.dist.q,
            "output": args.output,
        },
        f"Wrote {log.n} trials to {args.output}\n"
        f"I_hat = {estimate.i_hat:.4f} +- {estimate.std_error:.4f}\n"
        f"CHSH from correlators = {correlator_text}",
    )
    return EXIT_OK


def cmd_certify(args) -> int:
    counts = _load_counts(args.input)
    certificate = certify(
        counts, _distribution(args, counts.n), args.delta, BellModel(args.model), args.ns_checks
    )
    if args.output:
        Path(args.output).write_text(certificate_to_json(certificate), encoding="utf-8")

    session = _audit_session(args)
    if session is not None:
        from src.data.crud import record_certificate

        try:
            record_certificate(session, certificate, source=args.input)
        finally:
            session.close()

    _emit(
        args,
        certificate.model_dump(mode="json"),
        f"I_hat = {certificate.i_hat:.4f}, epsilon = {certificate.epsilon:.4f} ({certificate.model.value})\n"
        f"Certified min-entropy: {certificate.min_entropy_bits:.2f} bits "
        f"at confidence {1 - certificate.delta:.4f}",
    )
    return EXIT_OK if certificate.certified else EXIT_DOMAIN_FAILURE


def cmd_localtest(args) -> int:
    counts = _load_counts(args.input)
    dist = _distribution(args, counts.n)
    estimate = chsh_from_counts(counts, dist)
    p_value = local_pvalue(estimate.i_hat, estimate.n, dist)
    _emit(
        args,
        {"i_hat": estimate.i_hat, "n": estimate.n, "local_pvalue": p_value},
        f"I_hat = {estimate.i_hat:.4f} over n = {estimate.n}\n"
        f"P(I_hat >= {estimate.i_hat:.4f} | local model) <= {p_value:.3g}",
    )
    return EXIT_OK


def cmd_nstest(args) -> int:
    checks = check_no_signalling(_load_counts(args.input))
    _emit(
        args,
        {label: p for label, p in checks},
        "\n".join(f"{label:<16} p = {p:.4f}" for label, p in checks),
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.bits:
        bits = read_bits(args.input)
    else:
        bits = output_bits(read_trial_csv(args.input), args.stream)
    results = run_battery(bits, args.alpha)
    print(battery_to_json(results) if args.json else battery_table(results))
    return EXIT_OK


def cmd_extract(args) -> int:
    if args.raw_bits:
        raw = read_bits(args.raw)
    else:
        raw = raw_bits_from_log(read_trial_csv(args.raw))

    if args.certificate:
        min_entropy = certificate_from_json(
            Path(args.certificate).read_text(encoding="utf-8")
        ).min_entropy_bits
    else:
        min_entropy = args.min_entropy
    m_out = output_length(min_entropy, args.eps_ext)
    if m_out == 0:
        logger.warning(f"{min_entropy:.2f} bits do not cover the extractor margin; nothing extracted")
        _emit(args, {"output_bits": 0}, "Certified min-entropy does not cover the extractor margin")
        return EXIT_DOMAIN_FAILURE

    stream = SeedStream.from_file(args.seed_file)
    params = ExtractorParams(
        n_in=raw.size,
        m_out=m_out,
        eps_ext=args.eps_ext,
        seed=stream.read_bits(seed_length(raw.size, m_out)),
    )
    write_bits(toeplitz_extract(raw, params), args.output)
    _emit(
        args,
        {"input_bits": int(raw.size), "output_bits": m_out, "output": args.output},
        f"Extracted {m_out} bits from {raw.size} raw bits into {args.output}",
    )
    return EXIT_OK


def cmd_expand(args) -> int:
    dist = _distribution(args, args.n)
    if args.seed_file:
        seed = SeedStream.from_file(args.seed_file)
    elif args.seed_rng is not None:
        # Enough for the worst-case sampler cost plus a Toeplitz seed of at most 3n bits.
        n_bits = math.ceil(args.n * (dist.entropy_bits + 3)) + 3 * args.n + 64
        seed = SeedStream.from_rng(args.seed_rng, n_bits)
    else:
        args.parser.error("expand needs --seed-file or --seed-rng")

    session = _audit_session(args)
    try:
        report = run_expansion(
            DeviceFactory.get_device(_device_model(args)),
            args.n,
            dist,
            args.delta,
            args.eps_ext,
            seed,
            device_seed=args.device_seed,
            model=BellModel(args.model),
            audit_session=session,
        )
    finally:
        if session is not None:
            session.close()

    if args.output and report.succeeded:
        write_bits(report.extracted, args.output)
    if args.report:
        Path(args.report).write_text(report_to_json(report), encoding="utf-8")

    budget = report.budget
    _emit(
        args,
        json.loads(report_to_json(report)),
        f"Status: {report.status.value}\n"
        f"Certified min-entropy: {report.certificate.min_entropy_bits:.2f} bits\n"
        f"Seed: t1 = {budget.t1_bits} bits, t2 = {budget.t2_bits} bits; "
        f"output = {budget.output_bits} bits, net = {budget.net_bits} bits",
    )
    report.raise_for_status()
    return EXIT_OK


def cmd_reproduce_paper(args) -> int:
    counts = reference_counts()
    reported = reported_values()
    estimate = chsh_from_counts(counts, SettingsDistribution.uniform())
    quantum = certify(counts, SettingsDistribution.uniform(), args.delta, BellModel.QUANTUM)
    nosignalling = certify(counts, SettingsDistribution.uniform(), args.delta, BellModel.NO_SIGNALLING)
    p_local = local_pvalue(estimate.i_hat, estimate.n, SettingsDistribution.uniform())
    checks = check_no_signalling(counts)

    verdicts = {
        "i_hat": abs(estimate.i_hat - REPRODUCTION_I_HAT[0]) <= REPRODUCTION_I_HAT[1],
        "epsilon": abs(quantum.epsilon - REPRODUCTION_EPSILON[0]) <= REPRODUCTION_EPSILON[1],
        "certified_bits": REPRODUCTION_BITS[0] <= quantum.min_entropy_bits <= REPRODUCTION_BITS[1],
        "local_pvalue": p_local <= REPRODUCTION_LOCAL_PVALUE,
        "no_signalling": all(p > REPRODUCTION_NS_PVALUE for _, p in checks),
    }
    payload = {
        "i_hat": estimate.i_hat,
        "std_error": estimate.std_error,
        "epsilon": quantum.epsilon,
        "certified_bits_quantum": quantum.min_entropy_bits,
        "certified_bits_nosignalling": nosignalling.min_entropy_bits,
        "local_pvalue": p_local,
        "ns_checks": {label: p for label, p in checks},
        "reported": reported,
        "checks": verdicts,
    }
    lines = [
        f"I_hat = {estimate.i_hat:.4f} +- {estimate.std_error:.4f} (reported {reported['i_hat']} +- {reported['i_hat_std_error']})",
        f"epsilon = {quantum.epsilon:.4f} at delta = {args.delta}",
        f"Certified bits (quantum, analytic) = {quantum.min_entropy_bits:.2f} (reported {reported['min_entropy_bits']})",
        f"Certified bits (no-signalling) = {nosignalling.min_entropy_bits:.2f}",
        f"Local-model p-value <= {p_local:.3g} (reported {reported['local_pvalue']})",
    ]
    lines += [f"No-signalling {label}: p = {p:.4f}" for label, p in checks]
    lines += [f"[{'ok' if ok else 'FAILED'}] {name}" for name, ok in verdicts.items()]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if all(verdicts.values()) else EXIT_DOMAIN_FAILURE


# --- Parser --- #


def _add_input_dist_args(parser) -> None:
    parser.add_argument("--inputs", choices=INPUT_DISTRIBUTIONS, default="uniform")
    parser.add_argument("--q", type=float, default=None, help="bias for biased/product_biased inputs")
    parser.add_argument("--alpha", type=float, default=None, help="catalysis constant (default 11)")


def _add_device_args(parser) -> None:
    parser.add_argument("--device", choices=[k.value for k in DeviceKind], default="honest")
    parser.add_argument("--visibility", type=float, default=1.0)
    parser.add_argument("--chi-deg", type=float, default=90.0)
    parser.add_argument("--phi-a", type=float, nargs=2, metavar=("X0", "X1"))
    parser.add_argument("--phi-b", type=float, nargs=2, metavar=("Y0", "Y1"))
    parser.add_argument("--a-table", type=int, nargs=2, metavar=("A0", "A1"))
    parser.add_argument("--b-table", type=int, nargs=2, metavar=("B0", "B1"))
    parser.add_argument("--strategy", default="transcript_switching", help="memory_lhv strategy")


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    parser = CliParser(prog="bellrand", description="Device-independent randomness certification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a trial log")
    _add_device_args(p)
    _add_input_dist_args(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_simulate, parser=p)

    p = sub.add_parser("certify", parents=[common], help="certify min-entropy of a log or counts file")
    p.add_argument("input", help="trial CSV or counts JSON")
    p.add_argument("--delta", type=float, default=settings.delta)
    p.add_argument("--model", choices=[m.value for m in BellModel], default="quantum")
    p.add_argument("--ns-checks", action="store_true")
    p.add_argument("--audit", action="store_true", help="record the certificate in the audit database")
    p.add_argument("-o", "--output", help="certificate JSON path")
    _add_input_dist_args(p)
    p.set_defaults(handler=cmd_certify, parser=p)

    p = sub.add_parser("localtest", parents=[common], help="local-model p-value")
    p.add_argument("input")
    _add_input_dist_args(p)
    p.set_defaults(handler=cmd_localtest, parser=p)

    p = sub.add_parser("nstest", parents=[common], help="Fisher tests of the no-signalling conditions")
    p.add_argument("input")
    p.set_defaults(handler=cmd_nstest, parser=p)

    p = sub.add_parser("stats", parents=[common], help="statistical test battery")
    p.add_argument("input", help="trial CSV, or a bit file with --bits")
    p.add_argument("--stream", choices=OUTPUT_STREAMS, default="a")
    p.add_argument("--bits", action="store_true", help="input is a binary bit file")
    p.add_argument("--alpha", type=float, default=settings.stat_alpha)
    p.set_defaults(handler=cmd_stats, parser=p)

    p = sub.add_parser("extract", parents=[common], help="Toeplitz extraction")
    p.add_argument("--raw", required=True, help="trial CSV, or a bit file with --raw-bits")
    p.add_argument("--raw-bits", action="store_true")
    p.add_argument("--seed-file", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--certificate", help="certificate JSON")
    group.add_argument("--min-entropy", type=float)
    p.add_argument("--eps-ext", type=float, default=settings.eps_ext)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_extract, parser=p)

    p = sub.add_parser("expand", parents=[common], help="run the randomness expansion protocol")
    _add_device_args(p)
    _add_input_dist_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=settings.delta)
    p.add_argument("--eps-ext", type=float, default=settings.eps_ext)
    p.add_argument("--model", choices=[m.value for m in BellModel], default="quantum")
    p.add_argument("--seed-file", help="private seed t = (t1, t2) as a bit file")
    p.add_argument("--seed-rng", type=int, default=None, help="derive a demonstration seed")
    p.add_argument("--device-seed", type=int, default=0)
    p.add_argument("--audit", action="store_true")
    p.add_argument("-o", "--output", help="extracted bits path")
    p.add_argument("--report", help="expansion report JSON path")
    p.set_defaults(handler=cmd_expand, parser=p)

    p = sub.add_parser("reproduce-paper", parents=[common], help="reproduce the published analysis")
    p.add_argument("--delta", type=float, default=0.01)
    p.set_defaults(handler=cmd_reproduce_paper, parser=p)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CertificationFailedError as e:
        logger.warning(f"{args.command}: {e}")
        return EXIT_DOMAIN_FAILURE
    except (BellRandError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
