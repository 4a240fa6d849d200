"""Simulated wire: framed, ordered, per-link delivery with interceptor hooks.

Frame layout (big-endian), bit-exact:

    version(1) | msg_type(1) | sender_id(2) | recipient_id(2)
    | payload_len(4) | payload

The payload of every frame is a packed envelope: ciphertext_len(4) followed by
the ciphertext and then the signature bytes. Adversaries sit on links as
interceptors: pure functions Frame -> Frame (mutate) or None (drop).
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .envelope import SignedEnvelope

FRAME_VERSION = 1

MEASUREMENT = 1
INDEX = 2
LOG = 3
REPLICA_REQ = 4
REPLICA_RESP = 5
MSG_TYPES = (MEASUREMENT, INDEX, LOG, REPLICA_REQ, REPLICA_RESP)

HEADER = struct.Struct(">BBHHI")
HEADER_LEN = HEADER.size  # 10

TRUNCATED = "truncated"
BAD_LENGTH = "bad_length"
UNKNOWN_TYPE = "unknown_type"


class EncodeError(ValueError):
    """Frame fields out of range at the sender."""


class DecodeError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}{': ' + detail if detail else ''}")
        self.reason = reason


@dataclass(frozen=True)
class Frame:
    version: int
    msg_type: int
    sender_id: int
    recipient_id: int
    payload: bytes


def encode_frame(frame: Frame) -> bytes:
    if frame.version != FRAME_VERSION:
        raise EncodeError(f"unsupported version {frame.version}")
    if frame.msg_type not in MSG_TYPES:
        raise EncodeError(f"unknown msg_type {frame.msg_type}")
    if not (0 <= frame.sender_id <= 0xFFFF and 0 <= frame.recipient_id <= 0xFFFF):
        raise EncodeError("endpoint ids must fit in 2 bytes")
    header = HEADER.pack(frame.version, frame.msg_type, frame.sender_id,
                         frame.recipient_id, len(frame.payload))
    return header + frame.payload


def decode_frame(data: bytes) -> Frame:
    if len(data) < HEADER_LEN:
        raise DecodeError(TRUNCATED, f"{len(data)} bytes, header needs {HEADER_LEN}")
    version, msg_type, sender, recipient, payload_len = HEADER.unpack_from(data)
    if version != FRAME_VERSION or msg_type not in MSG_TYPES:
        raise DecodeError(UNKNOWN_TYPE, f"version={version} msg_type={msg_type}")
    if len(data) - HEADER_LEN != payload_len:
        raise DecodeError(BAD_LENGTH,
                          f"declared {payload_len}, actual {len(data) - HEADER_LEN}")
    return Frame(version, msg_type, sender, recipient, data[HEADER_LEN:])


def pack_envelope(env: SignedEnvelope) -> bytes:
    return struct.pack(">I", len(env.ciphertext)) + env.ciphertext + env.signature


def unpack_envelope(payload: bytes, sender_id: str, recipient_id: str) -> SignedEnvelope:
    if len(payload) < 4:
        raise DecodeError(TRUNCATED, "envelope length prefix missing")
    (ct_len,) = struct.unpack_from(">I", payload)
    if len(payload) < 4 + ct_len:
        raise DecodeError(BAD_LENGTH, "ciphertext shorter than declared")
    ciphertext = payload[4:4 + ct_len]
    signature = payload[4 + ct_len:]
    return SignedEnvelope(sender_id, recipient_id, ciphertext, signature)


class EndpointRegistry:
    """Wire ids for named endpoints: storage nodes 1..N, PLCs, chain module."""

    def __init__(self, n_storage_nodes: int):
        self.n_storage_nodes = n_storage_nodes
        self._by_name = {f"node{i}": i for i in range(1, n_storage_nodes + 1)}
        self._by_name["plc1"] = 101
        self._by_name["plc2"] = 102
        self._by_name["chain"] = 200
        self._by_id = {v: k for k, v in self._by_name.items()}

    def wire_id(self, name: str) -> int:
        return self._by_name[name]

    def name(self, wire_id: int) -> str:
        return self._by_id[wire_id]


Interceptor = Callable[[Frame], Optional[Frame]]


@dataclass
class InterceptorHandle:
    src: str
    dst: str


class Link:
    """Directional FIFO between two endpoints; at most one interceptor."""

    def __init__(self, src: str, dst: str):
        self.src = src
        self.dst = dst
        self.queue: deque[Frame] = deque()
        self.interceptor: Interceptor | None = None

    def apply(self, frame: Frame) -> Frame | None:
        if self.interceptor is None:
            return frame
        return self.interceptor(frame)


class Network:
    """Owns all links and delivery; endpoints never touch queues directly."""

    def __init__(self, registry: EndpointRegistry, trace: bool = False):
        self.registry = registry
        self.links: dict[tuple[str, str], Link] = {}
        self._ready: deque[tuple[str, str]] = deque()
        self.trace: list[str] | None = [] if trace else None

    def add_link(self, src: str, dst: str) -> Link:
        link = self.links.get((src, dst))
        if link is None:
            link = Link(src, dst)
            self.links[(src, dst)] = link
        return link

    def install_interceptor(self, src: str, dst: str,
                            fn: Interceptor) -> tuple[InterceptorHandle, bool]:
        """Install on a link; returns (handle, replaced_existing). Last install wins."""
        link = self.links[(src, dst)]
        replaced = link.interceptor is not None
        link.interceptor = fn
        return InterceptorHandle(src, dst), replaced

    def remove_interceptor(self, handle: InterceptorHandle):
        self.links[(handle.src, handle.dst)].interceptor = None

    def _record(self, frame: Frame):
        if self.trace is not None:
            self.trace.append(encode_frame(frame).hex())

    def send(self, frame: Frame):
        src = self.registry.name(frame.sender_id)
        dst = self.registry.name(frame.recipient_id)
        encode_frame(frame)  # malformed frames error at the sender
        link = self.links[(src, dst)]
        delivered = link.apply(frame)
        if delivered is None:
            return
        self._record(delivered)
        link.queue.append(delivered)
        self._ready.append((src, dst))

    def pump(self, handlers: dict[str, Callable[[Frame], None]]):
        """Deliver queued frames in send order until quiet; handlers may send more."""
        while self._ready:
            key = self._ready.popleft()
            frame = self.links[key].queue.popleft()
            handlers[key[1]](frame)

    def round_trip(self, frame: Frame,
                   responders: dict[str, Callable[[Frame], Frame | None]]) -> Frame | None:
        """Synchronous request/response over a link pair, interceptors included."""
        src = self.registry.name(frame.sender_id)
        dst = self.registry.name(frame.recipient_id)
        outbound = self.links[(src, dst)].apply(frame)
        if outbound is None:
            return None
        self._record(outbound)
        response = responders[dst](outbound)
        if response is None:
            return None
        inbound = self.links[(dst, src)].apply(response)
        if inbound is None:
            return None
        self._record(inbound)
        return inbound
