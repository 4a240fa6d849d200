"""The single block-minting module: collects sealed index submissions each
interval, mints a block when at least one is authentic, assigns replica
holders, and announces the new tip to every storage node under its own key.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime

from . import events as ev
from .config import parse_minute
from .envelope import (
    AuthError,
    Digest,
    KeyDirectory,
    NodeKeys,
    open_envelope,
    seal,
)
from .ledger import Block, Chain, LedgerIndex, make_block


@dataclass(frozen=True)
class IndexSubmission:
    origin: int
    vector_digest: Digest
    captured_at: datetime


def draw_replicas(origin: int, n_nodes: int, replication_factor: int,
                  rng: random.Random) -> tuple[int, ...]:
    """Origin first, then replication_factor-1 distinct others drawn uniformly."""
    others = [i for i in range(1, n_nodes + 1) if i != origin]
    return (origin, *rng.sample(others, replication_factor - 1))


class ChainModule:
    """Sole writer of the chain; trusted and unattackable in this model."""

    def __init__(self, keys: NodeKeys, directory: KeyDirectory,
                 event_log: ev.EventLog, rng: random.Random,
                 n_storage_nodes: int, replication_factor: int,
                 crypto_rng: random.Random):
        self.keys = keys
        self.directory = directory
        self.events = event_log
        self.rng = rng  # replica-choice stream
        self.crypto_rng = crypto_rng
        self.n_storage_nodes = n_storage_nodes
        self.replication_factor = replication_factor
        self.chain = Chain()
        self.buffer: list[IndexSubmission] = []
        self.tick = 0

    def collect(self, env) -> bool:
        """Verify one index submission; buffer it for the open interval."""
        try:
            plaintext = open_envelope(env, self.keys,
                                      self.directory.sig_pub(env.sender_id))
        except AuthError as exc:
            detail = f"index from {env.sender_id} corrupted ({exc.detail}); dropped"
            if exc.claimed is not None:
                detail += f"; claimed={exc.claimed} rebuilt={exc.rebuilt}"
            self.events.alarm(self.tick, "chain", ev.INDEX_REJECTED, detail)
            return False
        try:
            digest_hex, minute = plaintext.decode("ascii").split("|")
            submission = IndexSubmission(
                int(env.sender_id.removeprefix("node")),
                Digest(digest_hex),
                parse_minute(minute),
            )
        except (UnicodeDecodeError, ValueError):
            self.events.alarm(self.tick, "chain", ev.INDEX_REJECTED,
                              f"index from {env.sender_id} authentic but malformed")
            return False
        self.buffer.append(submission)
        self.events.info(self.tick, "chain", ev.INDEX_ACCEPTED,
                         f"index from {env.sender_id} verified: {digest_hex}")
        return True

    def close_interval(self, minted_at: datetime) -> Block | None:
        """Mint one block from the buffered submissions, or nothing if none came."""
        if not self.buffer:
            self.events.info(self.tick, "chain", ev.NO_BLOCK,
                             "no authentic index this interval; chain unchanged")
            return None
        indexes = [
            LedgerIndex(
                s.vector_digest, s.captured_at,
                draw_replicas(s.origin, self.n_storage_nodes,
                              self.replication_factor, self.rng),
            )
            for s in self.buffer
        ]
        self.buffer = []
        block = make_block(indexes, self.chain.tip.block_hash, minted_at)
        self.chain.append(block)
        self.events.info(self.tick, "chain", ev.BLOCK_MINTED,
                         f"hash={block.block_hash.hex} n_indexes={len(indexes)}")
        return block

    def broadcast_log(self, block_hash: Digest) -> list[tuple[str, object]]:
        """One sealed announcement per storage node, same plaintext, per-node key."""
        envelopes = []
        for i in range(1, self.n_storage_nodes + 1):
            name = f"node{i}"
            env = seal(block_hash.hex.encode("ascii"), self.keys, name,
                       self.directory.enc_pub(name), self.crypto_rng)
            envelopes.append((name, env))
        return envelopes
