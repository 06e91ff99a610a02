"""``fracheat`` command-line interface.

Usage::

    fracheat SUBCOMMAND [--config PATH] [--out DIR] [--seed N] [--workers N] [--tolerance X]
    fracheat rerun MANIFEST [--out DIR] [--workers N]

Every run writes its artefacts plus ``manifest.json`` into the output
directory. A failed run leaves whatever it had written together with a
``FAILED`` marker file.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .config import SUBCOMMANDS, RunConfig, load_config, parse_config
from .errors import DomainError, NumericError
from .runners import RUNNERS
from .spde import default_workers

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST = "manifest.json"
FAILED = "FAILED"


class UsageError(Exception):
    pass


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracheat", description="Fractional stochastic heat equation experiments.")
    p.add_argument("--version", action="version", version=f"fracheat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML or JSON experiment file")
        sp.add_argument("--out", type=Path, help="output directory (default runs/<subcommand>-<hash>)")
        sp.add_argument("--seed", type=int, help="first seed; overrides the config")
        sp.add_argument("--workers", type=int, help="worker processes (default FRACHEAT_WORKERS or all cores)")
        sp.add_argument("--tolerance", type=float, help="override the pass/fail tolerance of the check")
    rp = sub.add_parser("rerun", help="repeat a run from its manifest and compare output hashes")
    rp.add_argument("manifest", type=Path)
    rp.add_argument("--out", type=Path, help="output directory (default <manifest dir>/rerun)")
    rp.add_argument("--workers", type=int)
    return p


def _workers(n: int | None) -> int:
    if n is None:
        return default_workers()
    if n < 1:
        raise UsageError("--workers must be positive")
    return n


def _resolve_config(name: str, path: Path | None, seed: int | None) -> RunConfig:
    if path is None:
        if name not in ("kernel-check",):
            raise UsageError(f"{name} needs --config")
        doc = {"subcommand": name}
    else:
        try:
            cfg = load_config(path)
        except OSError as err:
            raise UsageError(f"cannot read config {path}: {err.strerror or err}") from None
        doc = json.loads(cfg.canonical_json())
        if doc["subcommand"] != name:
            raise UsageError(f"config {path} is for {doc['subcommand']!r}, not {name!r}")
    if seed is not None:
        if seed < 0:
            raise UsageError("--seed must be non-negative")
        doc["seed"] = seed
    return parse_config(doc)


def execute(cfg: RunConfig, out: Path, workers: int = 1, tolerance: float | None = None) -> tuple[int, dict]:
    """Run one configuration into ``out``; returns the exit code and the manifest."""
    if tolerance is not None and not tolerance > 0:
        raise UsageError("--tolerance must be positive")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise UsageError(f"cannot create output directory {out}: {err.strerror or err}") from None
    (out / FAILED).unlink(missing_ok=True)
    manifest = {
        "tool": "fracheat",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config": json.loads(cfg.canonical_json()),
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "tolerance": tolerance,
    }
    try:
        res = RUNNERS[cfg.subcommand](cfg, out, workers=workers, tolerance=tolerance)
    except BaseException as err:
        (out / FAILED).write_text(f"{type(err).__name__}: {err}\n")
        raise
    manifest["seeds"] = {"first": min(res.seeds), "last": max(res.seeds), "count": len(res.seeds)} if res.seeds else None
    manifest["outputs"] = {p.name: sha256_file(p) for p in sorted(res.files)}
    manifest["passed"] = bool(res.passed)
    (out / MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    for line in res.lines:
        print(line)
    return (EXIT_OK if res.passed else EXIT_CHECK), manifest


def _rerun(args) -> int:
    try:
        manifest = json.loads(args.manifest.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"cannot read manifest {args.manifest}: {err}") from None
    cfg = parse_config(manifest["config"])
    out = args.out or args.manifest.parent / "rerun"
    _, new = execute(cfg, out, _workers(args.workers), manifest.get("tolerance"))
    same = True
    for name, digest in manifest.get("outputs", {}).items():
        ok = new["outputs"].get(name) == digest
        same &= ok
        print(f"{'identical' if ok else 'DIFFERS'} {name}")
    return EXIT_OK if same else EXIT_CHECK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "rerun":
            return _rerun(args)
        cfg = _resolve_config(args.command, args.config, args.seed)
        out = args.out or Path("runs") / f"{args.command}-{cfg.sha256()[:12]}"
        code, _ = execute(cfg, out, _workers(args.workers), args.tolerance)
        print(f"results in {out}")
        return code
    except (UsageError, DomainError) as err:
        print(f"fracheat: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as err:
        print(f"fracheat: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"fracheat: file system error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
