"""Block-minting module tests: collect, interval close, announcements."""

import random
from datetime import datetime

import pytest
from hypothesis import given
import hypothesis.strategies as st

from histchain import events as ev
from histchain.envelope import (
    AuthError,
    KeyDirectory,
    generate_node_keys,
    open_envelope,
    seal,
    vector_digest,
    MeasurementVector,
)
from histchain.events import EventLog
from histchain.ledger import dump_chain
from histchain.minter import ChainModule, draw_replicas

TS = datetime(2020, 12, 23, 3, 24)


def make_module(n_nodes=6, seed=0):
    rng = random.Random(seed)
    directory = KeyDirectory()
    keys = {}
    for name in [f"node{i}" for i in range(1, n_nodes + 1)] + ["chain"]:
        keys[name] = generate_node_keys(name, rng)
        directory.register(keys[name])
    module = ChainModule(keys["chain"], directory, EventLog(),
                         random.Random(seed + 1), n_nodes, 3, rng)
    return module, keys


def submission_env(keys, origin=2, payload=None, ts="2020-12-23T03:24"):
    vec = MeasurementVector(f"Sensor {origin}", TS, (7, 6, 6, 7))
    body = payload if payload is not None else f"{vector_digest(vec).hex}|{ts}".encode()
    return seal(body, keys[f"node{origin}"], "chain", keys["chain"].enc_pub)


class TestCollect:
    def test_authentic_index_accepted(self):
        module, keys = make_module()
        assert module.collect(submission_env(keys)) is True
        assert len(module.buffer) == 1
        assert module.buffer[0].origin == 2
        assert module.events.by_code(ev.INDEX_ACCEPTED, "chain")

    def test_corrupted_index_rejected_with_alarm(self):
        module, keys = make_module()
        env = submission_env(keys, origin=1)
        ct = bytearray(env.ciphertext)
        ct[-1] ^= 0x10
        assert module.collect(type(env)(env.sender_id, env.recipient_id,
                                        bytes(ct), env.signature)) is False
        assert module.buffer == []
        assert module.events.by_code(ev.INDEX_REJECTED, "chain")

    def test_malformed_but_authentic_rejected(self):
        module, keys = make_module()
        assert module.collect(submission_env(keys, payload=b"nonsense")) is False
        assert module.buffer == []


class TestCloseInterval:
    def test_empty_buffer_no_block(self):
        module, _ = make_module()
        assert module.close_interval(TS) is None
        assert len(module.chain) == 1
        assert module.events.by_code(ev.NO_BLOCK, "chain")

    def test_single_index_block(self):
        module, keys = make_module()
        module.collect(submission_env(keys, origin=2))
        block = module.close_interval(TS)
        assert block is not None and len(block.indexes) == 1
        ix = block.indexes[0]
        assert ix.replica_ids[0] == 2
        assert len(set(ix.replica_ids)) == 3
        assert all(1 <= r <= 6 for r in ix.replica_ids)
        assert len(module.chain) == 2

    def test_submission_after_close_lands_in_next_block(self):
        module, keys = make_module()
        module.collect(submission_env(keys, origin=2))
        module.close_interval(TS)
        module.collect(submission_env(keys, origin=3, ts="2020-12-23T03:25"))
        later = datetime(2020, 12, 23, 3, 25)
        block = module.close_interval(later)
        assert block is not None
        assert block.indexes[0].replica_ids[0] == 3
        assert len(module.chain) == 3

    def test_rejected_digest_never_reaches_chain_dump(self):
        module, keys = make_module()
        bad = submission_env(keys, origin=1)
        ct = bytearray(bad.ciphertext)
        ct[-1] ^= 0x10
        module.collect(type(bad)(bad.sender_id, bad.recipient_id, bytes(ct), bad.signature))
        module.collect(submission_env(keys, origin=2))
        module.close_interval(TS)
        rejected_vec = MeasurementVector("Sensor 1", TS, (7, 6, 6, 7))
        text = dump_chain(module.chain)
        assert vector_digest(rejected_vec).hex not in text

    def test_fixed_seed_reproducible_assignments(self):
        draws = []
        for _ in range(2):
            module, keys = make_module(seed=5)
            for origin in (1, 2, 4):
                module.collect(submission_env(keys, origin=origin))
            block = module.close_interval(TS)
            draws.append([ix.replica_ids for ix in block.indexes])
        assert draws[0] == draws[1]


class TestBroadcastLog:
    def test_one_envelope_per_node_distinct_ciphertexts(self):
        module, keys = make_module()
        module.collect(submission_env(keys, origin=2))
        block = module.close_interval(TS)
        logs = module.broadcast_log(block.block_hash)
        assert [name for name, _ in logs] == [f"node{i}" for i in range(1, 7)]
        ciphertexts = [env.ciphertext for _, env in logs]
        assert len(set(ciphertexts)) == len(ciphertexts)
        for name, env in logs:
            plaintext = open_envelope(env, keys[name], keys["chain"].sig_pub)
            assert plaintext.decode() == block.block_hash.hex

    def test_cross_node_open_fails(self):
        module, keys = make_module()
        module.collect(submission_env(keys, origin=2))
        block = module.close_interval(TS)
        logs = dict(module.broadcast_log(block.block_hash))
        with pytest.raises(AuthError) as exc:
            open_envelope(logs["node1"], keys["node2"], keys["chain"].sig_pub)
        assert exc.value.kind == AuthError.DECRYPT_FAILED


class TestDrawReplicas:
    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10**6))
    def test_origin_first_distinct_in_range(self, origin, seed):
        draw = draw_replicas(origin, 6, 3, random.Random(seed))
        assert draw[0] == origin
        assert origin not in draw[1:]
        assert len(set(draw)) == 3
        assert all(1 <= r <= 6 for r in draw)

    def test_respects_replication_factor(self):
        draw = draw_replicas(2, 6, 4, random.Random(0))
        assert len(draw) == 4 and draw[0] == 2
