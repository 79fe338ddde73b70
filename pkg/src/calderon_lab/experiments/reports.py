"""Experiment reports and deterministic file output.

A report's status is a pure function of its measured values against the
recorded tolerances; skips mark degenerate inputs, never failures.  File
output is byte-stable: floats are written with repr (shortest round-trip),
keys are sorted, and no timestamps enter the files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

__all__ = ["Report", "write_csv", "write_summary", "format_value"]

_STATUSES = ("pass", "fail", "skip")


@dataclass(frozen=True)
class Report:
    name: str
    claim: str
    status: str
    measured: dict[str, float]
    tolerances: dict[str, float]
    config_hash: str
    seed: int

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise ValueError(f"bad status {self.status!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "claim": self.claim,
            "pass": self.status != "fail",
            "status": self.status,
            "measured": dict(sorted(self.measured.items())),
            "tolerance": dict(sorted(self.tolerances.items())),
            "config_hash": self.config_hash,
            "seed": self.seed,
        }


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_summary(path: str, reports: list[Report]) -> None:
    payload = {
        "experiments": [r.to_dict() for r in sorted(reports, key=lambda r: r.name)],
        "config_hash": reports[0].config_hash if reports else None,
        "seed": reports[0].seed if reports else None,
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
