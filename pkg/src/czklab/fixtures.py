"""Pinned regression corpus: CLI invocations and the sha256 of their reports."""

from __future__ import annotations

import hashlib
import json
import tempfile
from dataclasses import dataclass
from pathlib import Path

CORPUS_DIR = Path(__file__).parent / "corpus"
FIXTURE_FILE = CORPUS_DIR / "fixtures.json"


@dataclass(frozen=True)
class FixtureResult:
    name: str
    ok: bool
    expected: str
    actual: str
    detail: str = ""


def config_digest(argv: list[str]) -> str:
    return hashlib.sha256("\0".join(argv).encode()).hexdigest()


def report_digest(argv: list[str]) -> str:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "report"
        code = main(list(argv) + ["--out", str(out)])
        data = out.read_bytes() if out.exists() else b""
    return hashlib.sha256(code.to_bytes(1, "big") + data).hexdigest()


def load_fixtures(path: str | Path = FIXTURE_FILE) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def verify_fixtures(path: str | Path = FIXTURE_FILE) -> list[FixtureResult]:
    results = []
    for n, fx in enumerate(load_fixtures(path)):
        name = fx.get("name", f"fixture-{n}") if isinstance(fx, dict) else f"fixture-{n}"
        try:
            argv, want = list(fx["argv"]), fx["sha256"]
            if fx.get("config_digest") and fx["config_digest"] != config_digest(argv):
                results.append(FixtureResult(name, False, fx["config_digest"], config_digest(argv), "config digest"))
                continue
        except (KeyError, TypeError) as exc:
            results.append(FixtureResult(name, False, "", "", f"malformed record: {exc}"))
            continue
        got = report_digest(argv)
        results.append(FixtureResult(name, got == want, want, got))
    return results


def pin_fixtures(specs: list[dict], path: str | Path = FIXTURE_FILE) -> list[dict]:
    """Recompute digests for ``specs`` (name, argv, note) and write them; a reviewed step."""
    out = []
    for fx in specs:
        argv = list(fx["argv"])
        out.append(
            {
                "name": fx["name"],
                "argv": argv,
                "seed": fx.get("seed"),
                "config_digest": config_digest(argv),
                "sha256": report_digest(argv),
                "note": fx.get("note", ""),
            }
        )
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
