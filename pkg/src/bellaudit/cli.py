"""Command-line entry point.

Exit codes:
    0   success (analyze: consistent with local realism; hp-audit: local)
    1   oracle self-check failed, or an unexpected internal error
    10  analyze: Bell statistic exceeds the concentration bound
    20  hp-audit: slab variable depends on the remote setting
    64  usage or parse error
    65  contract violation
"""

from __future__ import annotations

import argparse
import collections
import json
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path

from bellaudit import __version__, outcomes
from bellaudit.errors import ConfigError, ContractError, DegenerateTableError

WORKERS_ENV = "BELLAUDIT_WORKERS"

EXIT_OK = 0
EXIT_ORACLE = 1
EXIT_VIOLATION = 10
EXIT_NONLOCAL = 20
EXIT_USAGE = 64
EXIT_CONTRACT = 65

LOG_NAME = "trials.jsonl"
MANIFEST_NAME = "manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def cmd_simulate(config_path, out_dir, workers: int | None = None) -> int:
    from bellaudit import config, engine, logio

    doc = config.load_document(config_path)
    cfg = config.parse_experiment(doc)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from exc
    log = engine.run_experiment(cfg, workers=workers)
    log_path = out / LOG_NAME
    logio.write_log(log, log_path)
    manifest = {
        "config": cfg.to_dict(),
        "artifact_version": __version__,
        "timestamp": _now(),
        "output_paths": [str(log_path)],
    }
    _write_json(out / MANIFEST_NAME, manifest)
    print(f"wrote {len(log)} trials to {log_path}")
    return EXIT_OK


def _format_estimate(est, prediction: float) -> str:
    lines = ["pair  trials      P(X=Y|AB)"]
    for pair in outcomes.SETTING_PAIRS:
        lines.append(f"{pair[0]}{pair[1]}    {est.counts[pair]:<10d}  {est.p_hat[pair]:.6f}")
    lines += [
        f"S_hat       = {est.s_hat:+.6f}",
        f"score mean  = {est.score_mean:+.6f}",
        f"epsilon     = {est.epsilon:.6f}  (confidence {est.confidence})",
        f"singlet prediction for this table = {prediction:+.6f}",
        "verdict: " + ("VIOLATES the local-realist bound" if est.violates_bound else "consistent with local realism"),
    ]
    return "\n".join(lines)


def cmd_analyze(log_path, table_path=None, confidence: float = 0.99, out_path=None, alpha: float = 0.001) -> int:
    from bellaudit import analysis, config, logio

    if not 0 < confidence < 1:
        raise ConfigError("confidence must lie in (0, 1)")
    table = config.table_from_document(config.load_document(table_path) if table_path else {})
    log = logio.read_log(log_path)
    est = analysis.estimate(log, confidence)
    prediction = analysis.chsh_quantum_prediction(table)
    summary = {
        "log": str(log_path),
        "estimate": est.to_dict(),
        "quantum_prediction": prediction,
        "no_signaling": analysis.no_signaling_test(log, alpha).to_dict(),
    }
    if log.revealed is not None:
        try:
            summary["freedom"] = analysis.freedom_test(log).to_dict()
        except DegenerateTableError as exc:
            summary["freedom"] = {"error": str(exc)}
    manifest = Path(log_path).with_name(MANIFEST_NAME)
    if manifest.exists():
        try:
            summary["provenance"] = json.loads(manifest.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            summary["provenance"] = None
    out = Path(out_path) if out_path else Path(log_path).with_name("summary.json")
    _write_json(out, summary)
    print(_format_estimate(est, prediction))
    return EXIT_VIOLATION if est.violates_bound else EXIT_OK


def cmd_hp_audit(config_path, out_path=None) -> int:
    from bellaudit import config, hpdensity

    doc = config.load_document(config_path)
    hp = config.parse_hp(doc)
    builder = hpdensity.FAMILIES[hp.family](hp.n)
    report = hpdensity.locality_audit(
        builder, hpdensity.reference_outcomes(), hp.a_grid, hp.b_grid, hp.quadrature, hp.verdict_tolerance
    )
    payload = {"config": hp.to_dict(), "artifact_version": __version__, "timestamp": _now(), **report.to_dict()}
    out = Path(out_path) if out_path else Path("hp_audit_report.json")
    _write_json(out, payload)
    print(f"family={hp.family} n={hp.n} verdict={report.verdict} max deviation={report.max_deviation:.6g}")
    for slab in sorted(report.per_slab_b_dependence):
        print(f"  slab {slab:+d}: b-dependence {report.per_slab_b_dependence[slab]:.6g}"
              f"  a-dependence {report.per_slab_a_dependence[slab]:.6g}")
    if report.quadrature_warning:
        print(f"  warning: quadrature step change {report.max_quadrature_change:.3g} exceeds tolerance")
    return EXIT_NONLOCAL if report.verdict == "non_local" else EXIT_OK


def cmd_oracle() -> int:
    quads = outcomes.enumerate_quadruples()
    counts = [outcomes.equality_count(q) for q in quads]
    deltas = [outcomes.delta(q) for q in quads]
    identity = [outcomes.product_identity_holds(q) for q in quads]
    dist = dict(sorted(collections.Counter(counts).items()))
    checks = {
        "16 distinct quadruples": len(set(quads)) == 16,
        "equality count in {0,2,4}": set(counts) <= {0, 2, 4},
        "distribution {0:2, 2:12, 4:2}": dist == {0: 2, 2: 12, 4: 2},
        "delta in {0,-2}": set(deltas) <= {0, -2},
        "product identity": all(identity),
    }
    print(f"equality-count distribution: {dist}")
    print(f"max delta = {max(deltas)}, min delta = {min(deltas)}")
    for name, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return EXIT_OK if all(checks.values()) else EXIT_ORACLE


# subcommand modules are imported on demand so that `oracle` starts fast


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bellaudit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run trials and write a JSONL log")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default ${WORKERS_ENV} or CPU count); never changes output")

    a = sub.add_parser("analyze", help="estimate the Bell statistic from a log")
    a.add_argument("log")
    a.add_argument("--table", default=None, help="config file whose table section was used")
    a.add_argument("--confidence", type=float, default=0.99)
    a.add_argument("--alpha", type=float, default=0.001, help="no-signaling test level")
    a.add_argument("-o", "--out", default=None, help="summary path (default: summary.json next to the log)")

    h = sub.add_parser("hp-audit", help="audit the slab-variable marginal for setting dependence")
    h.add_argument("config")
    h.add_argument("-o", "--out", default=None, help="report path (default: ./hp_audit_report.json)")

    sub.add_parser("oracle", help="exhaustive check of the parity lemma")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.workers is not None and args.workers < 1:
                raise ConfigError("--workers must be positive")
            return cmd_simulate(args.config, args.out, args.workers)
        if args.command == "analyze":
            return cmd_analyze(args.log, args.table, args.confidence, args.out, args.alpha)
        if args.command == "hp-audit":
            return cmd_hp_audit(args.config, args.out)
        return cmd_oracle()
    except ConfigError as exc:
        print(f"bellaudit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"bellaudit: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except Exception:
        traceback.print_exc()
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
