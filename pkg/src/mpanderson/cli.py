"""Command-line front end: ``validate``, ``run`` and ``report``.

Exit codes: 0 success; 1 a failed check (constraint row, incomplete or
tampered run, empty records, failed run); 2 unusable input (unreadable or
ill-formed config, missing key, unknown kind).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, kernels
from . import experiments as ex
from .msa import ParamError, ScaleParams, validate_params
from .randomfield import ConfigError

OUT_ENV = "MPANDERSON_OUT"
DEFAULT_OUT = "runs"

PLOT_STUB = '''"""Plot the TSV series of this run (needs matplotlib, not a package dependency)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "series", "*.tsv"))):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh, delimiter="\\t") if r and not r[0].startswith("#")]
    head, body = rows[0], rows[1:]
    cols = [[float(v) if v not in ("", "None") else float("nan") for v in c] for c in zip(*body)]
    if not cols:
        continue
    fig, ax = plt.subplots()
    for name, c in zip(head[1:], cols[1:]):
        ax.plot(cols[0], c, ".", label=name)
    ax.set_xlabel(head[0])
    ax.legend()
    fig.savefig(path[:-4] + ".png", dpi=120)
    plt.close(fig)
'''


class UsageError(Exception):
    """Bad input; exit code 2."""


def code_version() -> str:
    return f"mpanderson {__version__} ({'numba' if kernels.USING_NUMBA else 'numpy'} kernels)"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    return data


# -- validate ---------------------------------------------------------------

def cmd_validate(args) -> int:
    data = load_json(args.config)
    raw = data.get("scale", data) if isinstance(data.get("scale"), dict) else data
    try:
        p = ScaleParams.from_dict(raw)
    except KeyError as exc:
        raise UsageError(f"{args.config}: {exc.args[0]}") from None
    except (TypeError, ValueError, ParamError) as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    rep = validate_params(p)
    for r in rep.rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<14} {r.lhs!r} {r.relation} {r.rhs!r}")
    if rep.passed:
        print("all constraint rows pass")
        return 0
    print("failing rows: " + ", ".join(rep.failing()))
    return 1


# -- run ----------------------------------------------------------------------

def _versioned_dir(root: Path, kind: str, dg: str) -> Path:
    base = root / f"{kind}-{dg[:12]}"
    base.mkdir(parents=True, exist_ok=True)
    n = 1
    while True:
        d = base / f"run-{n:03d}"
        try:
            d.mkdir()
            return d
        except FileExistsError:
            n += 1


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    tmp = run_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(run_dir / "manifest.json")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(dest: Path, cfg: dict, records: list[dict]) -> dict:
    """summary.json, summary.csv, series/*.tsv and plot.py under ``dest``; returns the summary."""
    dest.mkdir(parents=True, exist_ok=True)
    summary = ex.summarize(cfg, records)
    (dest / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(dest / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in ex.flatten(summary):
            w.writerow([k, _fmt(v)])
    sdir = dest / "series"
    sdir.mkdir(exist_ok=True)
    for name, table in ex.series(cfg, records).items():
        cols, rows = table[0], table[1]
        meta = table[2] if len(table) > 2 else {}
        with open(sdir / f"{name}.tsv", "w") as fh:
            for k, v in meta.items():
                fh.write(f"# {k}: {v}\n")
            fh.write("\t".join(cols) + "\n")
            for row in rows:
                fh.write("\t".join(_fmt(v) for v in row) + "\n")
    (dest / "plot.py").write_text(PLOT_STUB)
    return summary


def build_config(args) -> dict:
    raw = load_json(args.config) if args.config else {}
    if "kind" in raw and raw["kind"] != args.kind:
        raise UsageError(f"config kind {raw['kind']!r} does not match requested kind {args.kind!r}")
    raw = {**raw, "kind": args.kind}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.samples is not None:
        raw["samples"] = args.samples
    try:
        return ex.make_config(raw)
    except (ConfigError, ParamError, KeyError) as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args) -> int:
    cfg = build_config(args)
    root = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    dg = ex.digest(cfg)
    try:
        run_dir = _versioned_dir(root, cfg["kind"], dg)
    except OSError as exc:
        raise UsageError(f"cannot create output directory under {root}: {exc.strerror}") from None
    manifest = {
        "kind": cfg["kind"], "digest": dg, "seed": cfg["seed"], "code_version": code_version(),
        "config": cfg, "started": _now(), "finished": None, "complete": False,
        "reason": "running", "samples_done": 0, "threads": args.threads,
        "paths": {"records": "records.jsonl", "timing": "timing.jsonl", "summary": "summary.csv",
                  "summary_json": "summary.json", "series": "series", "plot": "plot.py"},
    }
    _write_manifest(run_dir, manifest)
    records = []
    try:
        with open(run_dir / "records.jsonl", "w") as rf, open(run_dir / "timing.jsonl", "w") as tf:
            for rec, dt in ex.run(cfg, threads=args.threads):
                rf.write(ex.dumps(rec) + "\n")
                rf.flush()
                tf.write(json.dumps({"sample_index": rec["sample_index"], "seconds": dt}) + "\n")
                records.append(rec)
                manifest["samples_done"] = len(records)
        write_outputs(run_dir, cfg, records)
    except Exception as exc:  # noqa: BLE001 - recorded in the manifest
        manifest.update(finished=_now(), complete=False, samples_done=len(records),
                        reason=f"{type(exc).__name__}: {exc}")
        _write_manifest(run_dir, manifest)
        print(f"run failed after {len(records)} samples: {manifest['reason']}", file=sys.stderr)
        print(run_dir)
        return 1
    manifest.update(finished=_now(), complete=True, reason="")
    _write_manifest(run_dir, manifest)
    print(run_dir)
    return 0


# -- report -------------------------------------------------------------------

class ReportError(Exception):
    """Run directory unusable for a report; exit code 1."""


def load_run(run_dir: Path) -> tuple[dict, dict, list[dict]]:
    mpath = run_dir / "manifest.json"
    if not mpath.exists():
        raise ReportError(f"{run_dir}: no manifest.json")
    manifest = json.loads(mpath.read_text())
    if not manifest.get("complete"):
        raise ReportError(f"incomplete run: {manifest.get('reason') or 'not finished'}")
    cfg = manifest["config"]
    if ex.digest(cfg) != manifest["digest"]:
        raise ReportError("config digest mismatch: the stored config was modified")
    rpath = run_dir / manifest["paths"]["records"]
    records = [json.loads(line) for line in rpath.read_text().splitlines() if line.strip()] if rpath.exists() else []
    if not records:
        raise ReportError("no records")
    if any(r.get("digest") != manifest["digest"] for r in records):
        raise ReportError("records carry a different config digest")
    return manifest, cfg, records


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        manifest, cfg, records = load_run(run_dir)
    except ReportError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 1
    dest = Path(args.out) if args.out else run_dir / "report"
    summary = write_outputs(dest, cfg, records)
    print(f"{manifest['kind']}  digest {manifest['digest'][:12]}  samples {len(records)}")
    for k, v in ex.flatten(summary):
        print(f"  {k:<40} {_fmt(v)}")
    print(dest)
    return 0


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpanderson", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=code_version())
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check scale parameters against the constraint table")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("kind", choices=sorted(ex.KINDS))
    r.add_argument("config", nargs="?", help="JSON config (defaults when omitted)")
    r.add_argument("--seed", type=int)
    r.add_argument("--samples", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summaries and TSV series from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", help="destination (default <run_dir>/report)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
