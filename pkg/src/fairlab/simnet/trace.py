"""Trace files: the complete record of one simulation, one event per line.

The first line is a header carrying the scenario digest and configuration; the
last line is a run summary. Everything in between is ordered by a global step
counter the parties never observe. The record stream is complete enough for
the auditor to reconstruct every honest party's local view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class Trace:
    header: dict
    records: list[dict] = field(default_factory=list)

    def append(self, record: dict) -> None:
        self.records.append(record)

    def lines(self) -> list[str]:
        out = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        out.extend(json.dumps(r, sort_keys=True) for r in self.records)
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    @classmethod
    def from_lines(cls, lines: list[str]) -> "Trace":
        records = [json.loads(line) for line in lines if line.strip()]
        if not records or records[0].get("kind") != "header":
            raise ValueError("trace does not start with a header record")
        header = {k: v for k, v in records[0].items() if k != "kind"}
        return cls(header=header, records=records[1:])

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path: str) -> "Trace":
        with open(path) as fh:
            return cls.from_lines(fh.read().splitlines())

    # -- convenience views ---------------------------------------------------

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    @property
    def summary(self) -> dict:
        for r in reversed(self.records):
            if r["kind"] == "summary":
                return r
        raise ValueError("trace has no summary record")

    def blocks(self) -> list[dict]:
        return self.of_kind("block")
