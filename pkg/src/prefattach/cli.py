"""Command-line front end: ``prefattach <command> [options]``.

Exit codes: 0 success, 1 a check failed, 2 a resource budget was hit,
3 bad usage, 4 file I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import dag, degrees, entropy, symmetry
from .errors import ResourceBudgetError
from .model import PagFormatError, WeightMode, decode_graph, derive_seed, encode_graph, generate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BUDGET = 2
EXIT_USAGE = 3
EXIT_IO = 4

ENV_OUTPUT_DIR = "PREFATTACH_OUTPUT_DIR"
ENV_JOBS = "PREFATTACH_JOBS"

FORMATS = {
    "generate": ("pag", "json"),
    "degrees": ("csv", "json"),
    "symmetry": ("json",),
    "entropy": ("json",),
    "dag": ("csv", "json"),
    "verify": ("json",),
    "report": ("json",),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    command: str
    m: int | None = None
    n: int | None = None
    trials: int | None = None
    samples: int | None = None
    seed: int = 0
    eps: float | None = None
    k: int | None = None
    weight_mode: WeightMode = WeightMode.SELF_LOOP_DOUBLED
    output: Path | None = None
    format: str = "json"
    jobs: int = 1
    timing: bool = False
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _unit(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="64-bit seed (decimal or 0x hex)")
    common.add_argument("--weight-mode", choices=("d", "r"), default="d", help="d: loops doubled, r: renormalised")
    common.add_argument("-o", "--output", type=Path, help="output file (relative paths honour $%s)" % ENV_OUTPUT_DIR)
    common.add_argument("--format", help="output format")
    common.add_argument("--json", action="store_true", help="shorthand for --format json")
    common.add_argument("--jobs", type=_positive, default=None, help="worker processes (default $%s or 1)" % ENV_JOBS)
    common.add_argument("--timing", action="store_true", help="include elapsed_ms (breaks byte reproducibility)")

    size = argparse.ArgumentParser(add_help=False)
    size.add_argument("-m", type=_positive, required=True)
    size.add_argument("-n", type=_positive, required=True)

    p = _Parser(prog="prefattach", description="Preferential attachment graph experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("generate", parents=[common, size], help="sample one graph")

    d = sub.add_parser("degrees", parents=[common, size], help="degree counts against the closed form")
    d.add_argument("--trials", type=_positive, default=100)
    d.add_argument("--d-max", type=_positive, default=20)
    d.add_argument("--slack", type=float, default=2.0)
    d.add_argument("--check", action="store_true", help="exit 1 if the degree law check fails")

    s = sub.add_parser("symmetry", parents=[common, size], help="automorphism orders and certificates")
    s.add_argument("--trials", type=_positive, default=1)
    s.add_argument("--method", choices=("exact", "certificate"), default="exact")
    s.add_argument("--k", type=_nonneg, action="append", help="certificate threshold (repeatable)")
    s.add_argument("--degree-filter", action="store_true", help="certificate ignores same-choice pairs of unequal degree")
    s.add_argument("--checkpoint", type=Path, help="jsonl file of per-trial records; resumes if present")
    s.add_argument("--input", type=Path, help="analyse a pag v1 file instead of sampling; -m and -n must match it")

    e = sub.add_parser("entropy", parents=[common, size], help="labelled-graph entropy")
    mode = e.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="full enumeration")
    mode.add_argument("--asymptotic", action="store_true", help="closed form without the o(n) term")
    mode.add_argument("--structural", action="store_true", help="bracket for the unlabelled entropy")
    e.add_argument("--samples", type=_positive, default=200)
    e.add_argument("--form", choices=("stated", "rederived"), default="stated")
    e.add_argument("--tol", type=float, default=1e-6, help="enclosure width for the constant A")
    e.add_argument("--budget", type=_positive, default=entropy.DEFAULT_ENUM_BUDGET)
    e.add_argument("--bits", action="store_true", help="report values in bits")

    a = sub.add_parser("dag", parents=[common, size], help="level decomposition statistics")
    a.add_argument("--trials", type=_positive, default=10)
    a.add_argument("--eps", type=_unit, default=0.5)
    a.add_argument("--k", type=_positive, default=None, help="chain length (default: smallest admissible for eps)")
    a.add_argument("--brute-force", action="store_true", help="Gamma/Adm/Aut identity per trial (n <= 7)")
    a.add_argument("--checkpoint", type=Path)

    v = sub.add_parser("verify", parents=[common], help="run the brute-force oracle suites")
    v.add_argument("--max-n", type=_positive, default=6)

    r = sub.add_parser("report", parents=[common], help="desk-scale summary of all experiments")
    r.add_argument("--trials", type=_positive, default=20)
    return p


def _config(args: argparse.Namespace) -> ExperimentConfig:
    allowed = FORMATS[args.command]
    fmt = args.format or ("json" if args.json else allowed[0])
    if args.json and args.format and args.format != "json":
        raise UsageError("--json conflicts with --format " + args.format)
    if fmt not in allowed:
        raise UsageError(f"format {fmt!r} not available for {args.command}; choose from {', '.join(allowed)}")
    jobs = args.jobs
    if jobs is None:
        env = os.environ.get(ENV_JOBS)
        try:
            jobs = int(env) if env else 1
        except ValueError:
            raise UsageError(f"${ENV_JOBS} must be an integer") from None
        if jobs < 1:
            raise UsageError(f"${ENV_JOBS} must be positive")
    output = args.output
    if output is not None and not output.is_absolute() and os.environ.get(ENV_OUTPUT_DIR):
        output = Path(os.environ[ENV_OUTPUT_DIR]) / output
    skip = {"command", "m", "n", "trials", "samples", "seed", "eps", "k", "weight_mode", "output", "format", "json", "jobs", "timing"}
    return ExperimentConfig(
        command=args.command,
        m=getattr(args, "m", None),
        n=getattr(args, "n", None),
        trials=getattr(args, "trials", None),
        samples=getattr(args, "samples", None),
        seed=args.seed,
        eps=getattr(args, "eps", None),
        k=getattr(args, "k", None),
        weight_mode=WeightMode.coerce(args.weight_mode),
        output=output,
        format=fmt,
        jobs=jobs,
        timing=args.timing,
        extra={k: v for k, v in vars(args).items() if k not in skip},
    )


# ---------------------------------------------------------------------------
# output


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, data: str | bytes) -> None:
    raw = data.encode("utf-8") if isinstance(data, str) else data
    path = Path(path)
    if path.parent and not path.parent.exists():
        raise OSError(f"directory {path.parent} does not exist")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: ExperimentConfig, payload: str | bytes, summary: str | None = None) -> None:
    if cfg.output is None:
        out = payload.decode("utf-8") if isinstance(payload, bytes) else payload
        sys.stdout.write(out)
    else:
        _write_atomic(cfg.output, payload)
        if summary:
            print(summary)


def _csv(rows: list[dict], columns: Sequence[str]) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else ("" if v is None else v)) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# trial drivers


def _trial_map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_checkpoint(path: Path | None, key: dict) -> dict[int, dict]:
    if path is None or not path.exists():
        return {}
    done = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if any(rec.get(k) != v for k, v in key.items()):
                raise UsageError(f"{path}:{lineno}: checkpoint belongs to a different configuration")
            done[rec["trial"]] = rec
    return done


def _run_trials(cfg: ExperimentConfig, fn: Callable, key: dict, checkpoint: Path | None) -> list[dict]:
    done = _load_checkpoint(checkpoint, key)
    todo = [i for i in range(cfg.trials) if i not in done]
    args = [(cfg, i) for i in todo]
    step = max(1, cfg.jobs * 4)
    for lo in range(0, len(args), step):
        batch = _trial_map(fn, args[lo : lo + step], cfg.jobs)
        for rec in batch:
            rec.update(key)
            done[rec["trial"]] = rec
            if checkpoint is not None:
                with open(checkpoint, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return [done[i] for i in range(cfg.trials)]


def _symmetry_trial(job) -> dict:
    cfg, i = job
    seed = cfg.seed if cfg.trials == 1 else derive_seed(cfg.seed, i)
    g = generate(cfg.m, cfg.n, seed, cfg.weight_mode)
    rec = symmetry.symmetry_record(g, cfg.extra["method"], cfg.k, cfg.timing, cfg.extra["degree_filter"])
    rec["trial"] = i
    return rec


def _dag_trial(job) -> dict:
    cfg, i = job
    g = generate(cfg.m, cfg.n, derive_seed(cfg.seed, i), cfg.weight_mode)
    rec = dag.dag_trial_row(g, cfg.eps, cfg.k)
    rec["trial"] = i
    if cfg.extra.get("brute_force"):
        res = dag.brute_force_gamma_adm(g, restrict_to_udag=True)
        rec.update(
            gamma_count=res.gamma_count,
            adm_count=res.adm_count,
            aut_order=res.aut_order,
            identity_holds=res.identity_holds,
        )
    return rec


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig) -> int:
    g = generate(cfg.m, cfg.n, cfg.seed, cfg.weight_mode)
    if cfg.format == "pag":
        _emit(cfg, encode_graph(g), f"wrote {cfg.output} (m={g.m}, n={g.n})")
    else:
        deg = g.degrees
        payload = {
            "m": g.m,
            "n": g.n,
            "seed": g.seed,
            "weight_mode": g.weight_mode.value,
            "degree_sum": int(deg.sum()),
            "max_degree": int(deg.max()),
            "choices": g.choices.tolist(),
        }
        _emit(cfg, _dump_json(payload), f"wrote {cfg.output}")
    return EXIT_OK


def cmd_degrees(cfg: ExperimentConfig) -> int:
    if cfg.trials < 2:
        raise UsageError("--trials must be at least 2")
    check = degrees.degree_law_check(cfg.m, cfg.n, cfg.trials, cfg.seed, cfg.extra["d_max"], cfg.extra["slack"], cfg.weight_mode)
    if cfg.format == "csv":
        _emit(cfg, _csv(list(check.rows), degrees.CSV_COLUMNS), f"wrote {cfg.output}")
    else:
        payload = {
            "m": cfg.m,
            "n": cfg.n,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "slack": cfg.extra["slack"],
            "passed": check.passed,
            "worst_margin": check.worst_margin,
            "rows": list(check.rows),
        }
        _emit(cfg, _dump_json(payload), f"wrote {cfg.output}")
    print(f"degree law: {'pass' if check.passed else 'FAIL'} (worst margin {check.worst_margin:.3f})", file=sys.stderr)
    return EXIT_VALIDATION if cfg.extra["check"] and not check.passed else EXIT_OK


def cmd_symmetry(cfg: ExperimentConfig) -> int:
    if cfg.k is not None:
        bad = [k for k in cfg.k if k >= cfg.n]
        if bad:
            raise UsageError(f"--k values must be < n; got {bad}")
    if cfg.extra.get("input") is not None:
        g = decode_graph(cfg.extra["input"].read_bytes())
        if (g.m, g.n) != (cfg.m, cfg.n):
            raise UsageError(f"-m/-n disagree with {cfg.extra['input']} (m={g.m}, n={g.n})")
        rec = symmetry.symmetry_record(g, cfg.extra["method"], cfg.k, cfg.timing, cfg.extra["degree_filter"])
        _emit(cfg, _dump_json(rec), f"wrote {cfg.output}")
        return EXIT_OK
    key = {
        "m": cfg.m,
        "n": cfg.n,
        "method": cfg.extra["method"],
        "base_seed": cfg.seed,
        "weight_mode": cfg.weight_mode.value,
        "degree_filter": cfg.extra["degree_filter"],
    }
    if cfg.trials == 1:
        rec = _symmetry_trial((cfg, 0))
        rec.pop("trial")
        _emit(cfg, _dump_json(rec), f"wrote {cfg.output}")
        return EXIT_OK
    recs = _run_trials(cfg, _symmetry_trial, key, cfg.extra.get("checkpoint"))
    if cfg.extra["method"] == "exact":
        hits = sum(r["aut_order"] > 1 for r in recs)
    else:
        hits = sum(r["verdict"] != symmetry.Verdict.CERTIFIED_ASYMMETRIC.value for r in recs)
    rate = hits / cfg.trials
    payload = {
        "m": cfg.m,
        "n": cfg.n,
        "seed": cfg.seed,
        "method": cfg.extra["method"],
        "trials": cfg.trials,
        "rate": rate,
        "stderr": math.sqrt(rate * (1 - rate) / cfg.trials),
        "records": [{k: v for k, v in r.items() if k not in key or k in ("m", "n")} for r in recs],
    }
    _emit(cfg, _dump_json(payload), f"symmetric fraction {rate:.4f} over {cfg.trials} trials")
    return EXIT_OK


def cmd_entropy(cfg: ExperimentConfig) -> int:
    ex = cfg.extra
    scale = 1 / math.log(2) if ex["bits"] else 1.0
    unit = "bits" if ex["bits"] else "nats"
    lo, hi = entropy.constant_A_enclosure(cfg.m, ex["tol"])
    base = {"m": cfg.m, "n": cfg.n, "unit": unit, "constant_A": 0.5 * (lo + hi), "enclosure_width": hi - lo}
    if ex["structural"]:
        if cfg.samples < 2:
            raise UsageError("--samples must be at least 2")
        br = entropy.structural_entropy_estimate(cfg.m, cfg.n, cfg.samples, cfg.seed, cfg.weight_mode)
        c = br.components
        payload = dict(
            base,
            method="Structural",
            seed=cfg.seed,
            samples=cfg.samples,
            lower=br.lower * scale,
            upper=br.upper * scale,
            h_g=c.h_g.value * scale,
            h_g_stderr=c.h_g.stderr * scale,
            gamma_log_lb_mean=c.gamma_log_lb_mean * scale,
            log_factorial_n=c.log_factorial_n * scale,
            aut_log_mean=c.aut_log_mean * scale,
            certified_fraction=c.certified_fraction,
        )
    else:
        if ex["exact"]:
            est = entropy.exact_entropy(cfg.m, cfg.n, cfg.weight_mode, ex["budget"])
            value, stderr, samples, method = est.value, est.stderr, est.samples, est.method.value
        elif ex["asymptotic"]:
            value = entropy.asymptotic_entropy(cfg.m, cfg.n, ex["form"])
            stderr, samples, method = 0.0, 0, entropy.EntropyMethod.ASYMPTOTIC.value
        else:
            if cfg.samples < 2:
                raise UsageError("--samples must be at least 2")
            est = entropy.mc_entropy(cfg.m, cfg.n, cfg.samples, cfg.seed, cfg.weight_mode)
            value, stderr, samples, method = est.value, est.stderr, est.samples, est.method.value
        payload = dict(base, method=method, value=value * scale, value_nats=value, stderr=stderr * scale, samples=samples)
        if method == entropy.EntropyMethod.ASYMPTOTIC.value:
            payload["form"] = ex["form"]
        if method == entropy.EntropyMethod.MONTE_CARLO.value:
            payload["seed"] = cfg.seed
    _emit(cfg, _dump_json(payload), f"{payload['method']}: see {cfg.output}")
    return EXIT_OK


def cmd_dag(cfg: ExperimentConfig) -> int:
    if cfg.k is None:
        cfg.k = dag.chain_length_threshold(cfg.m, cfg.eps) if cfg.eps > 0 else 1
    if cfg.extra["brute_force"] and cfg.n > dag.BRUTE_FORCE_MAX_N:
        raise UsageError(f"--brute-force needs n <= {dag.BRUTE_FORCE_MAX_N}")
    key = {"m": cfg.m, "n": cfg.n, "base_seed": cfg.seed, "eps": cfg.eps, "k": cfg.k, "weight_mode": cfg.weight_mode.value}
    recs = _run_trials(cfg, _dag_trial, key, cfg.extra.get("checkpoint"))
    for r in recs:
        for extra_key in ("base_seed", "eps", "k", "weight_mode"):
            r.pop(extra_key, None)
    # checkpointed records come back with sorted keys; fix one column order
    cols = ["trial", *dag.dag_trial_row(generate(1, 1, 0), 0.0, 1)]
    if cfg.extra["brute_force"]:
        cols += ["gamma_count", "adm_count", "aut_order", "identity_holds"]
    recs = [{c: r[c] for c in cols} for r in recs]
    failed = any(r.get("identity_holds") is False for r in recs)
    if cfg.format == "csv":
        _emit(cfg, _csv(recs, cols), f"wrote {cfg.output}")
    else:
        _emit(cfg, _dump_json({"m": cfg.m, "n": cfg.n, "eps": cfg.eps, "k": cfg.k, "seed": cfg.seed, "trials": recs}), f"wrote {cfg.output}")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    from .verify import run_oracles

    results = run_oracles(cfg.extra["max_n"])
    ok = all(r["passed"] for r in results)
    _emit(cfg, _dump_json({"max_n": cfg.extra["max_n"], "passed": ok, "suites": results}))
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['suite']}: {r['detail']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_report(cfg: ExperimentConfig) -> int:
    from .verify import desk_report

    rep = desk_report(cfg.seed, cfg.trials)
    _emit(cfg, _dump_json(rep), f"wrote {cfg.output}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "degrees": cmd_degrees,
    "symmetry": cmd_symmetry,
    "entropy": cmd_entropy,
    "dag": cmd_dag,
    "verify": cmd_verify,
    "report": cmd_report,
}


def run(cfg: ExperimentConfig) -> int:
    return COMMANDS[cfg.command](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        if cfg.output is not None and not cfg.output.parent.exists():
            print(f"prefattach: error: directory {cfg.output.parent} does not exist", file=sys.stderr)
            return EXIT_IO
        return run(cfg)
    except UsageError as exc:
        print(f"prefattach: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceBudgetError as exc:
        print(f"prefattach: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PagFormatError as exc:
        print(f"prefattach: bad input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"prefattach: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"prefattach: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
