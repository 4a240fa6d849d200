"""Offline re-verification of run artifacts, independent of the simulation.

Re-verifies the chain dump, then checks every ledger index against every
listed Historian dump by recomputing record digests. Serves as the standalone
oracle for the in-simulation validator: on the same state, both must flag the
same records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .config import fmt_minute
from .ledger import FirstBadBlock, parse_chain_dump, verify_chain
from .storage import Historian

INTACT = "intact"
MISMATCH = "mismatch"
MISSING = "missing"


@dataclass(frozen=True)
class AuditFinding:
    node_id: int
    key: tuple[str | None, str]
    expected_digest: str
    found_digest: str | None
    verdict: str


@dataclass
class AuditReport:
    chain_issue: FirstBadBlock | None = None
    findings: list[AuditFinding] = field(default_factory=list)
    uncovered: list[tuple[int, tuple[str, str]]] = field(default_factory=list)

    @property
    def all_intact(self) -> bool:
        return (self.chain_issue is None
                and all(f.verdict == INTACT for f in self.findings))

    def flagged(self) -> list[AuditFinding]:
        return [f for f in self.findings if f.verdict != INTACT]

    def to_text(self) -> str:
        lines = []
        if self.chain_issue is None:
            lines.append("chain|valid")
        else:
            lines.append(f"chain|bad|{self.chain_issue.position}|{self.chain_issue.reason}")
        for f in self.findings:
            name = f.key[0] if f.key[0] is not None else "?"
            lines.append(f"finding|node{f.node_id}|{f.verdict}|{name}|{f.key[1]}"
                         f"|{f.expected_digest}|{f.found_digest or '-'}")
        for node_id, key in self.uncovered:
            lines.append(f"uncovered|node{node_id}|{key[0]}|{key[1]}")
        return "".join(line + "\n" for line in lines)


def audit_artifacts(chain_text: str, historian_texts: dict[int, str]) -> AuditReport:
    """Cross-check chain and historian dumps; read-only, no recovery."""
    report = AuditReport()
    chain = parse_chain_dump(chain_text)
    report.chain_issue = verify_chain(chain)
    if report.chain_issue is not None:
        return report

    stores = {nid: Historian.load(nid, text) for nid, text in historian_texts.items()}

    for node_id in sorted(stores):
        store = stores[node_id]
        duties = [
            ix
            for block in chain.blocks[1:]
            for ix in block.indexes
            if node_id in ix.replica_ids
        ]
        used: set = set()
        verdicts: dict[int, AuditFinding] = {}
        # Exact digest matches first, so a tampered record can never steal the
        # verdict of an intact one sharing the same minute.
        for pos, ix in enumerate(duties):
            minute = fmt_minute(ix.captured_at)
            expected = ix.vector_digest.hex
            hit = next((r for r in store.at_time(minute)
                        if r.key not in used and r.digest_hex() == expected), None)
            if hit is not None:
                used.add(hit.key)
                verdicts[pos] = AuditFinding(node_id, hit.key, expected, expected, INTACT)
        for pos, ix in enumerate(duties):
            if pos in verdicts:
                continue
            minute = fmt_minute(ix.captured_at)
            expected = ix.vector_digest.hex
            stray = next((r for r in store.at_time(minute) if r.key not in used), None)
            if stray is not None:
                used.add(stray.key)
                verdicts[pos] = AuditFinding(node_id, stray.key, expected,
                                             stray.digest_hex(), MISMATCH)
            else:
                verdicts[pos] = AuditFinding(node_id, (None, minute), expected,
                                             None, MISSING)
        report.findings.extend(verdicts[pos] for pos in range(len(duties)))
        for record in store.records():
            if record.key not in used:
                report.uncovered.append((node_id, record.key))
    return report


def audit_directory(artifact_dir) -> AuditReport:
    """Audit the standard artifact filenames written by a run."""
    artifact_dir = Path(artifact_dir)
    chain_path = artifact_dir / "chain.txt"
    if not chain_path.is_file():
        raise IOError(f"missing chain dump {chain_path}")
    historians = {}
    for path in sorted(artifact_dir.glob("historian*.txt")):
        stem = path.stem.removeprefix("historian")
        if not stem.isdigit():
            continue
        historians[int(stem)] = path.read_text(encoding="utf-8")
    if not historians:
        raise IOError(f"no historian dumps found in {artifact_dir}")
    return audit_artifacts(chain_path.read_text(encoding="utf-8"), historians)
