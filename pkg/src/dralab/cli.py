"""Command-line front end.

Exit codes: 0 when every verdict passes (or is inconclusive), 1 when any
verdict fails, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field

from . import audit
from .commitments import commit, setup, verify
from .distributions import myerson_revenue, parse_dist
from .errors import DralabError, SchemaError, SpecError
from .protocol import parse_fine
from .strategies import parse_strategy

COLUMNS = ("claim_id", "dist", "alpha", "n", "fine_kind", "k", "strategy", "trials", "seed",
           "mean", "stderr", "bound", "slack", "verdict")
COMMANDS = ("run", "audit-theorem", "audit-lemmas", "sweep")
THEOREMS = ("mhr", "regular", "alphaneg", "malleable2", "ultra", "spc")


# ---------------------------------------------------------------------------
# reports


def report_row(rep) -> dict:
    return {
        "claim_id": rep.claim_id, "dist": rep.dist, "alpha": rep.alpha, "n": rep.n,
        "fine_kind": rep.fine_kind, "k": rep.k, "strategy": rep.strategy, "trials": rep.trials,
        "seed": rep.seed, "mean": rep.lhs, "stderr": rep.std_error, "bound": rep.rhs,
        "slack": rep.slack, "verdict": rep.verdict,
    }


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _atomic_write(path: str, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_report(rows, fmt: str = "csv") -> str:
    rows = [r if isinstance(r, dict) else report_row(r) for r in rows]
    if fmt == "json":
        return json.dumps([{c: r.get(c) for c in COLUMNS} for r in rows], indent=2) + "\n"
    if fmt != "csv":
        raise SpecError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in COLUMNS])
    return buf.getvalue()


def emit_report(reports, path: str | None, fmt: str = "csv") -> str:
    """Flatten reports (with their parts) into rows and write them atomically."""
    rows = []
    for rep in reports:
        rows.extend(rep.rows() if hasattr(rep, "rows") else [rep])
    text = render_report(rows, fmt)
    if path:
        _atomic_write(path, text)
    return text


def load_report(path: str) -> list:
    """Rows of a CSV or JSON report, as dictionaries of strings / JSON values."""
    with open(path, newline="") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------------------
# configs


@dataclass
class Job:
    command: str
    seed: int
    output: str
    dist: str = "exp:1"
    n: int = 1
    fine: str = "mhr"
    strategy: str = "honest"
    trials: object = 100_000
    theorem: str | None = None
    format: str = "csv"
    params: dict = field(default_factory=dict)

    def to_json(self):
        out = {"command": self.command, "seed": self.seed, "output": self.output,
               "dist": self.dist, "n": self.n, "fine": self.fine, "strategy": self.strategy,
               "trials": self.trials, "format": self.format}
        if self.theorem is not None:
            out["theorem"] = self.theorem
        if self.params:
            out["params"] = dict(self.params)
        return out


@dataclass
class ExperimentConfig:
    jobs: list

    def to_json(self):
        return {"jobs": [j.to_json() for j in self.jobs]}


def _parse_trials(x):
    if x == "exact":
        return x
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise SpecError(f"bad trial count {x!r}") from None
    if v != int(v) or v < 1:
        raise SpecError(f"bad trial count {x!r}")
    return int(v)


def _job(i, raw) -> Job:
    where = f"jobs[{i}]"
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: expected an object")
    known = {"command", "seed", "output", "dist", "n", "fine", "strategy", "trials", "theorem",
             "format", "params"}
    extra = set(raw) - known
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {sorted(extra)}")
    for key in ("command", "seed", "output"):
        if key not in raw:
            raise SchemaError(f"{where}.{key}: required")
    if raw["command"] not in COMMANDS:
        raise SchemaError(f"{where}.command: must be one of {COMMANDS}")
    if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
        raise SchemaError(f"{where}.seed: must be an integer")
    job = Job(raw["command"], raw["seed"], str(raw["output"]))
    for key in ("dist", "fine", "strategy", "theorem", "format"):
        if key in raw:
            setattr(job, key, raw[key])
    if "params" in raw:
        if not isinstance(raw["params"], dict):
            raise SchemaError(f"{where}.params: must be an object")
        job.params = dict(raw["params"])
    if "n" in raw:
        if not isinstance(raw["n"], int) or raw["n"] < 1:
            raise SchemaError(f"{where}.n: must be a positive integer")
        job.n = raw["n"]
    checks = [("dist", lambda: parse_dist(job.dist)), ("fine", lambda: parse_fine(job.fine)),
              ("strategy", lambda: parse_strategy(job.strategy)),
              ("trials", lambda: _parse_trials(raw.get("trials", job.trials)))]
    for key, fn in checks:
        try:
            fn()
        except DralabError as exc:
            raise SchemaError(f"{where}.{key}: {exc}") from None
    job.trials = _parse_trials(raw.get("trials", job.trials))
    if job.format not in ("csv", "json"):
        raise SchemaError(f"{where}.format: must be csv or json")
    if job.command == "audit-theorem" and job.theorem not in THEOREMS:
        raise SchemaError(f"{where}.theorem: must be one of {THEOREMS}")
    return job


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict) or not isinstance(data.get("jobs"), list):
        raise SchemaError("top level: expected an object with a 'jobs' list")
    jobs = [_job(i, raw) for i, raw in enumerate(data["jobs"])]
    seen = {}
    for i, j in enumerate(jobs):
        key = os.path.normpath(j.output)
        if key in seen:
            raise SchemaError(f"jobs[{i}].output: duplicates jobs[{seen[key]}].output")
        seen[key] = i
    return ExperimentConfig(jobs)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None
    return parse_config(data)


def dump_config(cfg: ExperimentConfig, path: str):
    _atomic_write(path, json.dumps(cfg.to_json(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# commands


def do_run(dist, n, strategy, fine, trials, seed, malleable=False, workers=1):
    d = parse_dist(dist)
    f = parse_fine(fine)
    mech = "spc" if f.kind == "spc_fee" else "dra"
    est = audit.estimate_revenue(strategy, d, n, f, trials, seed, workers=workers,
                                 mechanism=mech, malleable=malleable)
    rev = myerson_revenue(d, n).rev_n if mech == "dra" else float("nan")
    rep = audit.judge("run", est.mean, rev, "le", None if est.method == "exact" else est.std_error,
                      float("inf"), dist=d.spec, alpha=d.alpha_strong, n=n, fine_kind=f.kind,
                      k=f.k, strategy=strategy, trials=est.trials, seed=seed)
    rep.verdict = "info"
    return rep, est


def do_audit(theorem, args):
    t, seed, w = args.trials, args.seed, args.workers
    if theorem == "mhr":
        return [audit.theorem_mhr_check(args.dist, args.n, _or(t, 100_000), seed,
                                        fine=args.fine or "mhr", workers=w)]
    if theorem == "regular":
        return [audit.theorem_regular_check(args.r, args.k or 1.0, _or(t, 1_000_000), seed,
                                            workers=w)]
    if theorem == "alphaneg":
        return [audit.theorem_alphaneg_check(args.alpha, args.fine or "mhr", max(2, args.n),
                                             _or(t, 1_000_000), seed, workers=w)]
    if theorem == "malleable2":
        deltas = tuple(float(x) for x in args.delta.split(","))
        return [audit.theorem_malleable2_check(args.alpha, args.n if args.n > 1 else 32, deltas,
                                               _or(t, 100_000), seed, workers=w)]
    if theorem == "ultra":
        return [audit.prop_ultra_check(_or(t, 1_000_000), seed, workers=w)]
    if theorem == "spc":
        return [audit.spc_bound_checks(args.dist, max(2, args.n), args.k, _or(t, 100_000), seed,
                                       workers=w)]
    raise SpecError(f"unknown theorem {theorem!r}")


def _or(t, default):
    return default if t is None else t


def do_sweep(dist, ns, strategies, fine, trials, seed, workers=1):
    out = []
    d = parse_dist(dist)
    for n in ns:
        rev = myerson_revenue(d, n).rev_n
        for s in strategies:
            est = audit.estimate_revenue(s, d, n, fine, trials, seed, workers=workers)
            se = None if est.method == "exact" else est.std_error
            f = parse_fine(fine)
            out.append(audit.judge("sweep", est.mean, rev, "le", se, 0.0, dist=d.spec,
                                   alpha=d.alpha_strong, n=n, fine_kind=f.kind, k=f.k,
                                   strategy=s, trials=est.trials, seed=seed))
    return out


def _exit_code(reports) -> int:
    rows = [r for rep in reports for r in rep.rows()]
    return 1 if any(r.verdict == "fail" for r in rows) else 0


def _print_rows(reports, stream):
    for rep in reports:
        for r in rep.rows():
            print(f"{r.verdict:12s} {r.claim_id:48s} {r.lhs:.6g} vs {r.rhs:.6g} "
                  f"(slack {r.slack:.3g}, tol {r.tolerance:.3g})", file=stream)


def run_job(job: Job, workers: int = 1):
    p = job.params
    if job.command == "run":
        reports = [do_run(job.dist, job.n, job.strategy, job.fine, job.trials, job.seed,
                          bool(p.get("malleable", False)), workers)[0]]
    elif job.command == "sweep":
        ns = p.get("ns", [job.n])
        strategies = p.get("strategies", [job.strategy])
        reports = do_sweep(job.dist, ns, strategies, job.fine, job.trials, job.seed, workers)
    elif job.command == "audit-lemmas":
        reports = audit.lemma_suite(trials=job.trials, seed=job.seed, workers=workers)
    else:
        ns = argparse.Namespace(dist=job.dist, n=job.n, fine=job.fine, trials=job.trials,
                                seed=job.seed, workers=workers, r=p.get("r", 8),
                                k=p.get("k"), alpha=p.get("alpha", 0.5),
                                delta=p.get("delta", "0.5,0.25,0.125"))
        reports = do_audit(job.theorem, ns)
    emit_report(reports, job.output, job.format)
    return reports


def build_parser():
    ap = argparse.ArgumentParser(prog="dralab", description="Credible-auction laboratory.")
    ap.add_argument("--config", help="run every job of a JSON experiment config")
    ap.add_argument("--workers", type=int, default=1)
    sub = ap.add_subparsers(dest="command")

    def common(p, trials_default=None):
        p.add_argument("--dist", default="exp:1")
        p.add_argument("--n", type=int, default=1)
        p.add_argument("--fine", default=None)
        p.add_argument("--trials", default=trials_default)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("run", help="estimate one strategy's revenue")
    common(p, "100000")
    p.add_argument("--strategy", default="honest")
    p.add_argument("--malleable", choices=("on", "off"), default="off")

    p = sub.add_parser("audit", help="check one theorem")
    common(p)
    p.add_argument("--theorem", choices=THEOREMS, required=True)
    p.add_argument("--r", type=float, default=8.0)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--delta", default="0.5,0.25,0.125")
    p.add_argument("--malleable", choices=("on", "off"), default="on")

    p = sub.add_parser("sweep", help="several n and strategies against the optimal auction")
    common(p, "100000")
    p.add_argument("--ns", default=None, help="comma-separated bidder counts")
    p.add_argument("--strategy", default="honest", help="semicolon-separated strategy specs")

    p = sub.add_parser("lemmas", help="run the lemma suite")
    common(p, "100000")

    p = sub.add_parser("demo-commit", help="print toy group parameters and a round trip")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bits", type=int, default=32)
    p.add_argument("--message", type=int, default=42)
    return ap


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("DRA_LAB_SEED")
    if env is None:
        raise SpecError("no seed: pass --seed or set DRA_LAB_SEED")
    try:
        return int(env)
    except ValueError:
        raise SpecError(f"DRA_LAB_SEED is not an integer: {env!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    out, err = sys.stdout, sys.stderr
    try:
        if args.config:
            cfg = load_config(args.config)
            reports = []
            for job in cfg.jobs:
                reports.extend(run_job(job, args.workers))
            _print_rows(reports, out)
            return _exit_code(reports)
        if args.command is None:
            parser.print_usage(err)
            return 2
        seed = _seed(args)
        if args.command == "demo-commit":
            params = setup(seed, args.bits)
            r = seed % params.subgroup_order
            m = args.message % params.subgroup_order
            c = commit(params, m, r)
            print(f"p={params.modulus} q={params.subgroup_order} g={params.g} h={params.h}",
                  file=out)
            print(f"commit({m}, {r}) = {c.value}; verify: {verify(params, c, m, r)}; "
                  f"verify with m+1: {verify(params, c, (m + 1) % params.subgroup_order, r)}",
                  file=out)
            return 0
        workers = args.workers or 1
        trials = None if args.trials is None else _parse_trials(args.trials)
        if args.command == "run":
            rep, est = do_run(args.dist, args.n, args.strategy, args.fine or "mhr", trials, seed,
                              args.malleable == "on", workers)
            reports = [rep]
            print(f"mean={est.mean!r} stderr={est.std_error!r} trials={est.trials} "
                  f"method={est.method}", file=out)
        elif args.command == "audit":
            args.trials, args.seed, args.workers = trials, seed, workers
            reports = do_audit(args.theorem, args)
            _print_rows(reports, out)
        elif args.command == "sweep":
            ns = [int(x) for x in args.ns.split(",")] if args.ns else [args.n]
            strategies = [s for s in args.strategy.split(";") if s]
            for s in strategies:
                parse_strategy(s)
            reports = do_sweep(args.dist, ns, strategies, args.fine or "mhr", trials, seed,
                               workers)
            _print_rows(reports, out)
        else:
            reports = audit.lemma_suite(trials=trials, seed=seed, workers=workers)
            _print_rows(reports, out)
        emit_report(reports, args.out, args.format)
        return _exit_code(reports)
    except DralabError as exc:
        print(f"dralab: error: {exc}", file=err)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
