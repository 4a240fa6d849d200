"""Append-only operator event log: one record per notable action or alarm."""

from __future__ import annotations

from dataclasses import dataclass

INFO = "INFO"
ALARM = "ALARM"

# Informational codes.
CHECK_OK = "CHECK_OK"
MSG_AUTHENTIC = "MSG_AUTHENTIC"
STORED = "STORED"
REPLICA_STORED = "REPLICA_STORED"
REPLICA_NOT_FOUND = "REPLICA_NOT_FOUND"
INDEX_ACCEPTED = "INDEX_ACCEPTED"
BLOCK_MINTED = "BLOCK_MINTED"
NO_BLOCK = "NO_BLOCK"
RECOVERED = "RECOVERED"
INTERCEPTOR_REPLACED = "INTERCEPTOR_REPLACED"

# Alarm codes.
DIGEST_MISMATCH = "DIGEST_MISMATCH"
DECRYPT_FAILED = "DECRYPT_FAILED"
DUPLICATE_RECORD = "DUPLICATE_RECORD"
MALFORMED_PAYLOAD = "MALFORMED_PAYLOAD"
INDEX_REJECTED = "INDEX_REJECTED"
FDI_ALARM = "FDI_ALARM"
UNRECOVERABLE = "UNRECOVERABLE"
CHAIN_INVALID = "CHAIN_INVALID"
UNKNOWN_BLOCK = "UNKNOWN_BLOCK"
COVERAGE_GAP = "COVERAGE_GAP"
REPLICA_MISMATCH = "REPLICA_MISMATCH"
REPLICA_NO_RESPONSE = "REPLICA_NO_RESPONSE"
REPLICA_REQUEST_REJECTED = "REPLICA_REQUEST_REJECTED"
SENSOR_MISMATCH = "SENSOR_MISMATCH"


@dataclass(frozen=True)
class EventRecord:
    tick: int
    actor: str
    severity: str
    code: str
    detail: str

    def line(self) -> str:
        detail = self.detail.replace("\t", " ").replace("\n", " ")
        return f"{self.tick}\t{self.actor}\t{self.severity}\t{self.code}\t{detail}"


class EventLog:
    """Totally ordered by (tick, append sequence); records are never rewritten."""

    def __init__(self):
        self.records: list[EventRecord] = []

    def append(self, tick: int, actor: str, severity: str, code: str, detail: str = ""):
        self.records.append(EventRecord(tick, actor, severity, code, detail))

    def info(self, tick: int, actor: str, code: str, detail: str = ""):
        self.append(tick, actor, INFO, code, detail)

    def alarm(self, tick: int, actor: str, code: str, detail: str = ""):
        self.append(tick, actor, ALARM, code, detail)

    def alarms(self) -> list[EventRecord]:
        return [r for r in self.records if r.severity == ALARM]

    def by_code(self, code: str, actor: str | None = None) -> list[EventRecord]:
        return [
            r
            for r in self.records
            if r.code == code and (actor is None or r.actor == actor)
        ]

    def dump(self) -> str:
        return "".join(r.line() + "\n" for r in self.records)

    def __len__(self) -> int:
        return len(self.records)
