"""Transcript authentication with one signature per direction.

Two parties exchange any number of messages over an unauthenticated
channel, each keeping its own view of the conversation. At the end each
side signs a digest of its view exactly once (Lamport key or Merkle
leaf) and sends that authenticator; the peer accepts only if the
signature verifies and the digest matches its own view.

The transcript is ordered per direction (FIFO); the global interleaving
of the two directions is not authenticated, because the two views of an
asynchronous channel may legitimately disagree on it.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Optional, Sequence, Union

from hashsig import lamport, merkle
from hashsig.errors import FrameError, KeyAlreadyUsed, MalformedData, ParamMismatch, PhaseViolation, ScriptError
from hashsig.lamport import LamportPrivateKey, LamportPublicKey, LamportSignature
from hashsig.merkle import MerkleKeySet, MerklePublicKey, MerkleSignature
from hashsig.primitives import FamilyKey, FamilyKeys, MAC_TAG_BYTES, eval_g, eval_t, mac_tag, mac_verify

log = logging.getLogger(__name__)

FRAME_MAGIC = b"QAB1"
FRAME_DATA = 0x01
FRAME_AUTH = 0x02
_FRAME_HEADER = struct.Struct(">4sBI")
_ENTRY_HEADER = struct.Struct(">BII")

SigningKey = Union[LamportPrivateKey, MerkleKeySet]
VerificationKey = Union[LamportPublicKey, MerklePublicKey]


class Role(IntEnum):
    INITIATOR = 0x49
    RESPONDER = 0x52

    @property
    def peer(self) -> Role:
        return Role.RESPONDER if self is Role.INITIATOR else Role.INITIATOR

    @property
    def outgoing(self) -> Direction:
        return Direction.I2R if self is Role.INITIATOR else Direction.R2I


class Direction(IntEnum):
    I2R = 0x01
    R2I = 0x02

    @property
    def label(self) -> str:
        return "I>R" if self is Direction.I2R else "R>I"

    @property
    def sender(self) -> Role:
        return Role.INITIATOR if self is Direction.I2R else Role.RESPONDER

    @classmethod
    def parse(cls, text: str) -> Direction:
        key = text.strip().upper().replace("->", ">")
        if key in ("I>R", "I2R"):
            return cls.I2R
        if key in ("R>I", "R2I"):
            return cls.R2I
        raise ValueError(f"unknown direction {text!r}")


class Phase(Enum):
    EXCHANGING = "exchanging"
    FINALIZING = "finalizing"
    ACCEPTED = "accepted"
    ABORTED = "aborted"


class AbortReason(Enum):
    MALFORMED = "malformed"
    MAC_INVALID = "mac-invalid"
    ROLE_MISMATCH = "role-mismatch"
    BAD_SIGNATURE = "bad-signature"
    DIGEST_MISMATCH = "digest-mismatch"
    MISSING_AUTHENTICATOR = "missing-authenticator"
    KEY_ALREADY_USED = "key-already-used"


@dataclass(frozen=True)
class Outcome:
    accepted: bool
    reason: Optional[AbortReason] = None
    peer_commitment: Optional[bytes] = None

    @classmethod
    def accept(cls, commitment: Optional[bytes] = None) -> Outcome:
        return cls(True, None, commitment)

    @classmethod
    def abort(cls, reason: AbortReason) -> Outcome:
        return cls(False, reason)

    def __str__(self) -> str:
        return "accepted" if self.accepted else f"aborted({self.reason.value})"


# -- transcript --------------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    direction: Direction
    seq: int
    payload: bytes


def encode_entries(entries: Sequence[Entry]) -> bytes:
    """direction (1) || seq (4, BE) || length (4, BE) || payload, per entry."""
    out = bytearray()
    for e in entries:
        out += _ENTRY_HEADER.pack(e.direction, e.seq, len(e.payload))
        out += e.payload
    return bytes(out)


class Transcript:
    def __init__(self) -> None:
        self.entries: list[Entry] = []
        self._next = {Direction.I2R: 0, Direction.R2I: 0}

    def append(self, direction: Direction, payload: bytes) -> Entry:
        entry = Entry(direction, self._next[direction], bytes(payload))
        self._next[direction] += 1
        self.entries.append(entry)
        return entry

    def count(self, direction: Direction) -> int:
        return self._next[direction]

    def canonical(self) -> list[Entry]:
        return sorted(self.entries, key=lambda e: (e.direction, e.seq))

    def encode(self) -> bytes:
        return encode_entries(self.canonical())

    def __len__(self) -> int:
        return len(self.entries)


# -- wire framing ------------------------------------------------------------


def frame(kind: int, body: bytes) -> bytes:
    return _FRAME_HEADER.pack(FRAME_MAGIC, kind, len(body)) + body


def deframe(wire: bytes) -> tuple[int, bytes]:
    if len(wire) < _FRAME_HEADER.size:
        raise FrameError("frame shorter than its header")
    magic, kind, length = _FRAME_HEADER.unpack_from(wire)
    if magic != FRAME_MAGIC:
        raise FrameError(f"bad frame magic {magic!r}")
    if kind not in (FRAME_DATA, FRAME_AUTH):
        raise FrameError(f"unknown frame type {kind:#x}")
    body = wire[_FRAME_HEADER.size :]
    if len(body) != length:
        raise FrameError(f"frame declares {length} octets, carries {len(body)}")
    return kind, bytes(body)


# -- keys --------------------------------------------------------------------


def key_ell(key: Union[SigningKey, VerificationKey]) -> int:
    """Digest width used by the owner of ``key`` for transcript digests."""
    if isinstance(key, (LamportPrivateKey, LamportPublicKey)):
        return key.params.ell
    return key.params.ots.ell


def serialize_verification_key(key: VerificationKey) -> bytes:
    return key.to_bytes()


def key_commitment(family: FamilyKeys, key: VerificationKey, width: int) -> bytes:
    return eval_t(family.t, serialize_verification_key(key), width)


def check_commitment(commitment: bytes, candidate: VerificationKey, family: FamilyKeys) -> bool:
    """Does an unauthenticated next key match the commitment the peer signed?"""
    return key_commitment(family, candidate, 8 * len(commitment)) == commitment


def _sign_blob(key: SigningKey, family: FamilyKeys, blob: bytes,
               on_consume: Optional[Callable[[], None]]) -> bytes:
    if isinstance(key, LamportPrivateKey):
        return lamport.sign(key, family.g, blob, on_consume).to_bytes()
    sig = merkle.merkle_sign(key, blob, on_consume)
    return sig.to_bytes(key.params.m)


def _verify_blob(key: VerificationKey, blob: bytes, sig_bytes: bytes) -> bool:
    """Raises MalformedData/ParamMismatch for structurally bad signatures."""
    if isinstance(key, LamportPublicKey):
        sig = LamportSignature.from_bytes(sig_bytes)
        return lamport.verify(key, blob, sig)
    sig, m = MerkleSignature.from_bytes(sig_bytes, key.keys)
    if m != key.params.m:
        raise MalformedData("node width differs from the tree's")
    return merkle.merkle_verify(key.root, key.params, key.keys, blob, sig)


# -- authenticator -----------------------------------------------------------


@dataclass(frozen=True)
class Authenticator:
    transcript_digest: bytes
    role_label: int
    commitment: Optional[bytes]
    signature: bytes
    mac: Optional[bytes] = None

    def signed_blob(self) -> bytes:
        return signed_blob(self.transcript_digest, self.role_label, self.commitment)

    def to_bytes(self) -> bytes:
        out = self.signed_blob()
        if self.mac is not None:
            out += self.mac
        return out + self.signature

    @classmethod
    def from_bytes(cls, body: bytes, digest_bytes: int, commitment_bytes: int, with_mac: bool) -> Authenticator:
        if len(body) < digest_bytes + 2:
            raise MalformedData("authenticator too short")
        digest = body[:digest_bytes]
        role, flag = body[digest_bytes], body[digest_bytes + 1]
        off = digest_bytes + 2
        commitment = None
        if flag == 0x01:
            commitment = body[off : off + commitment_bytes]
            off += commitment_bytes
        elif flag != 0x00:
            raise MalformedData(f"bad commitment flag {flag:#x}")
        mac = None
        if with_mac:
            mac = body[off : off + MAC_TAG_BYTES]
            off += MAC_TAG_BYTES
        if off >= len(body) or (commitment is not None and len(commitment) != commitment_bytes):
            raise MalformedData("authenticator truncated")
        if mac is not None and len(mac) != MAC_TAG_BYTES:
            raise MalformedData("authenticator truncated")
        return cls(bytes(digest), role, commitment, bytes(body[off:]), mac)


def signed_blob(digest: bytes, role_label: int, commitment: Optional[bytes]) -> bytes:
    flag = b"\x01" if commitment is not None else b"\x00"
    return bytes(digest) + bytes([role_label]) + flag + (commitment or b"")


# -- party state -------------------------------------------------------------


@dataclass
class SessionConfig:
    """One party's setup.

    ``family`` holds the public (f, g, T) keys both parties agreed on; the
    Lamport keys in play must have been generated with ``family.f`` and
    ``family.g``.
    """

    role: Role
    signing_key: SigningKey
    peer_key: VerificationKey
    family: FamilyKeys
    next_public_key: Optional[VerificationKey] = None
    mac_key: Optional[FamilyKey] = None
    on_consume: Optional[Callable[[], None]] = None


class SessionState:
    def __init__(self, config: SessionConfig) -> None:
        self.config = config
        self.role = Role(config.role)
        self.phase = Phase.EXCHANGING
        self.phase_history = [Phase.EXCHANGING]
        self.transcript = Transcript()
        self.frame_errors: list[str] = []
        self.signatures_issued = 0
        self.outcome: Optional[Outcome] = None
        self._sent = False
        self._received = False
        self._pending: Optional[Outcome] = None

    # phase bookkeeping

    def _enter(self, phase: Phase) -> None:
        allowed = {
            Phase.EXCHANGING: {Phase.FINALIZING},
            Phase.FINALIZING: {Phase.ACCEPTED, Phase.ABORTED},
        }
        if phase not in allowed.get(self.phase, set()):
            raise PhaseViolation(f"{self.phase.value} -> {phase.value} is not a legal transition")
        self.phase = phase
        self.phase_history.append(phase)

    def abort(self, reason: AbortReason) -> Outcome:
        if self.phase in (Phase.ACCEPTED, Phase.ABORTED):
            return self.outcome
        if self.phase is Phase.EXCHANGING:
            self._enter(Phase.FINALIZING)
        self._enter(Phase.ABORTED)
        self.outcome = Outcome.abort(reason)
        log.debug("%s aborted: %s", self.role.name, reason.value)
        return self.outcome

    # data phase

    def send(self, payload: bytes) -> bytes:
        if self.phase is not Phase.EXCHANGING:
            raise PhaseViolation(f"cannot send while {self.phase.value}")
        self.transcript.append(self.role.outgoing, payload)
        return frame(FRAME_DATA, bytes(payload))

    def receive(self, wire: bytes) -> bytes:
        if self.phase is not Phase.EXCHANGING:
            raise PhaseViolation(f"cannot receive data while {self.phase.value}")
        try:
            kind, body = deframe(wire)
            if kind != FRAME_DATA:
                raise FrameError("authenticator frame on the data path")
        except FrameError as exc:
            self.frame_errors.append(str(exc))
            raise
        self.transcript.append(self.role.peer.outgoing, body)
        return body

    # finalization

    def finalize_send(self) -> Authenticator:
        if self._sent:
            self.abort(AbortReason.KEY_ALREADY_USED)
            raise KeyAlreadyUsed("this party has already signed its transcript")
        if self.phase not in (Phase.EXCHANGING, Phase.FINALIZING):
            raise PhaseViolation(f"cannot finalize while {self.phase.value}")
        cfg = self.config
        width = key_ell(cfg.signing_key)
        digest = eval_g(cfg.family.g, self.transcript.encode(), width).data
        commitment = None
        if cfg.next_public_key is not None:
            commitment = key_commitment(cfg.family, cfg.next_public_key, width)
        blob = signed_blob(digest, self.role, commitment)
        if self.phase is Phase.EXCHANGING:
            self._enter(Phase.FINALIZING)
        try:
            signature = _sign_blob(cfg.signing_key, cfg.family, blob, cfg.on_consume)
        except KeyAlreadyUsed:
            self._sent = True
            self.abort(AbortReason.KEY_ALREADY_USED)
            raise
        self._sent = True
        self.signatures_issued += 1
        mac = mac_tag(cfg.mac_key, blob) if cfg.mac_key is not None else None
        if self._pending is not None:
            self._enter(Phase.ACCEPTED)
            self.outcome = self._pending
        return Authenticator(digest, self.role, commitment, signature, mac)

    def finalize_receive(self, auth: Union[Authenticator, bytes]) -> Outcome:
        if self._received or self.phase not in (Phase.EXCHANGING, Phase.FINALIZING):
            raise PhaseViolation("peer authenticator already processed or session closed")
        self._received = True
        if self.phase is Phase.EXCHANGING:
            self._enter(Phase.FINALIZING)
        verdict = self._check(auth)
        if not verdict.accepted:
            return self.abort(verdict.reason)
        if self._sent:
            self._enter(Phase.ACCEPTED)
            self.outcome = verdict
        else:
            self._pending = verdict
        return verdict

    def _check(self, auth: Union[Authenticator, bytes]) -> Outcome:
        cfg = self.config
        peer_width = key_ell(cfg.peer_key)
        if isinstance(auth, (bytes, bytearray)):
            try:
                auth = Authenticator.from_bytes(bytes(auth), peer_width // 8, peer_width // 8, cfg.mac_key is not None)
            except MalformedData:
                return Outcome.abort(AbortReason.MALFORMED)
        if len(auth.transcript_digest) != peer_width // 8:
            return Outcome.abort(AbortReason.MALFORMED)
        blob = auth.signed_blob()
        if cfg.mac_key is not None:
            if auth.mac is None or not mac_verify(cfg.mac_key, blob, auth.mac):
                return Outcome.abort(AbortReason.MAC_INVALID)
        if auth.role_label != self.role.peer:
            return Outcome.abort(AbortReason.ROLE_MISMATCH)
        try:
            valid = _verify_blob(cfg.peer_key, blob, auth.signature)
        except (MalformedData, ParamMismatch):
            return Outcome.abort(AbortReason.MALFORMED)
        if not valid:
            return Outcome.abort(AbortReason.BAD_SIGNATURE)
        own = eval_g(cfg.family.g, self.transcript.encode(), peer_width).data
        if own != auth.transcript_digest:
            return Outcome.abort(AbortReason.DIGEST_MISMATCH)
        return Outcome.accept(auth.commitment)


# -- scripted adversary ------------------------------------------------------


@dataclass(frozen=True)
class PassThrough:
    def to_text(self) -> str:
        return "pass"


@dataclass(frozen=True)
class FlipBit:
    index: int
    bit: int

    def to_text(self) -> str:
        return f"flip {self.index} {self.bit}"


@dataclass(frozen=True)
class Drop:
    index: int

    def to_text(self) -> str:
        return f"drop {self.index}"


@dataclass(frozen=True)
class Reorder:
    i: int
    j: int

    def to_text(self) -> str:
        return f"reorder {self.i} {self.j}"


@dataclass(frozen=True)
class Inject:
    direction: Direction
    payload: bytes

    def to_text(self) -> str:
        return f"inject {self.direction.label} {self.payload.hex()}"


Action = Union[PassThrough, FlipBit, Drop, Reorder, Inject]


@dataclass
class ChannelScript:
    """Adversary actions, indexed by honest message number.

    Indices ``0 .. N-1`` are the scheduled data messages; ``N`` and
    ``N + 1`` are the initiator's and responder's authenticators.
    Text form: one action per line, ``#`` starts a comment.
    """

    actions: list[Action] = field(default_factory=list)

    @classmethod
    def parse(cls, text: str) -> ChannelScript:
        actions: list[Action] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            word, *args = line.split()
            try:
                if word == "pass" and not args:
                    actions.append(PassThrough())
                elif word == "flip" and len(args) == 2:
                    actions.append(FlipBit(int(args[0]), int(args[1])))
                elif word == "drop" and len(args) == 1:
                    actions.append(Drop(int(args[0])))
                elif word == "reorder" and len(args) == 2:
                    actions.append(Reorder(int(args[0]), int(args[1])))
                elif word == "inject" and len(args) in (1, 2):
                    actions.append(Inject(Direction.parse(args[0]), bytes.fromhex(args[1]) if len(args) == 2 else b""))
                else:
                    raise ValueError(word)
            except ValueError as exc:
                raise ScriptError(f"line {lineno}: cannot parse {raw!r}") from exc
        return cls(actions)

    def to_text(self) -> str:
        return "".join(a.to_text() + "\n" for a in self.actions)


@dataclass(frozen=True)
class Event:
    seq: int
    direction: Direction
    action: str
    data: bytes

    def __str__(self) -> str:
        return f"{self.seq} {self.direction.label} {self.action} {self.data[:16].hex()}"


@dataclass
class _Packet:
    index: Optional[int]
    direction: Direction
    wire: bytes
    injected: bool = False


def _flip(wire: bytes, bit: int) -> bytes:
    if not 0 <= bit < 8 * len(wire):
        raise ScriptError(f"bit {bit} outside a {len(wire)}-octet frame")
    out = bytearray(wire)
    out[bit >> 3] ^= 0x80 >> (bit & 7)
    return bytes(out)


def _locate(packets: list[_Packet], index: int) -> int:
    for pos, pkt in enumerate(packets):
        if pkt.index == index:
            return pos
    raise ScriptError(f"message {index} is no longer in flight")


def _apply(action: Action, packets: list[_Packet], emit: Callable[[Direction, str, bytes], None]) -> None:
    if isinstance(action, PassThrough):
        return
    if isinstance(action, FlipBit):
        pkt = packets[_locate(packets, action.index)]
        pkt.wire = _flip(pkt.wire, action.bit)
        emit(pkt.direction, "flip", pkt.wire)
    elif isinstance(action, Drop):
        pkt = packets.pop(_locate(packets, action.index))
        emit(pkt.direction, "drop", pkt.wire)
    elif isinstance(action, Reorder):
        a, b = _locate(packets, action.i), _locate(packets, action.j)
        packets[a], packets[b] = packets[b], packets[a]
        emit(packets[a].direction, "reorder", packets[a].wire)
    elif isinstance(action, Inject):
        packets.append(_Packet(None, action.direction, frame(FRAME_DATA, action.payload), injected=True))
    else:
        raise ScriptError(f"unknown action {action!r}")


def _validate(actions: Sequence[Action], messages: int) -> None:
    total = messages + 2
    for action in actions:
        indices: tuple[int, ...] = ()
        if isinstance(action, (FlipBit, Drop)):
            indices = (action.index,)
        elif isinstance(action, Reorder):
            indices = (action.i, action.j)
            if (action.i < messages) != (action.j < messages):
                raise ScriptError("cannot reorder a data message with an authenticator")
        elif isinstance(action, Inject):
            Direction(action.direction)
        elif not isinstance(action, PassThrough):
            raise ScriptError(f"unknown action {action!r}")
        if isinstance(action, FlipBit) and action.bit < 0:
            raise ScriptError("negative bit index")
        for i in indices:
            if not 0 <= i < total:
                raise ScriptError(f"index {i} outside 0..{total - 1}")


def run_scripted(
    initiator: SessionConfig,
    responder: SessionConfig,
    schedule: Sequence[tuple[Direction, bytes]],
    script: Union[ChannelScript, Sequence[Action], None] = None,
) -> tuple[Outcome, Outcome, list[Event]]:
    """Drive both parties over a simulated channel the adversary controls.

    Data messages are sent in schedule order, transformed by the script,
    delivered; then both parties finalize and the authenticators are
    transformed and delivered the same way. Deterministic.
    """
    actions = list(script.actions if isinstance(script, ChannelScript) else (script or []))
    n = len(schedule)
    _validate(actions, n)
    if Role(initiator.role) is not Role.INITIATOR or Role(responder.role) is not Role.RESPONDER:
        raise ScriptError("configs must be one initiator and one responder")

    parties = {Role.INITIATOR: SessionState(initiator), Role.RESPONDER: SessionState(responder)}
    events: list[Event] = []

    def emit(direction: Direction, action: str, data: bytes) -> None:
        events.append(Event(len(events), direction, action, data))

    data_phase: list[Action] = []
    auth_phase: list[Action] = []
    for action in actions:
        if isinstance(action, (FlipBit, Drop)):
            (data_phase if action.index < n else auth_phase).append(action)
        elif isinstance(action, Reorder):
            (data_phase if action.i < n else auth_phase).append(action)
        elif isinstance(action, Inject):
            data_phase.append(action)

    packets: list[_Packet] = []
    for index, (direction, payload) in enumerate(schedule):
        direction = Direction(direction)
        wire = parties[direction.sender].send(payload)
        emit(direction, "send", wire)
        packets.append(_Packet(index, direction, wire))

    for action in data_phase:
        _apply(action, packets, emit)

    for pkt in packets:
        receiver = parties[pkt.direction.sender.peer]
        emit(pkt.direction, "inject" if pkt.injected else "recv", pkt.wire)
        try:
            receiver.receive(pkt.wire)
        except FrameError:
            pass

    auth_packets: list[_Packet] = []
    for offset, role in enumerate((Role.INITIATOR, Role.RESPONDER)):
        try:
            auth = parties[role].finalize_send()
        except KeyAlreadyUsed:
            continue
        auth_packets.append(_Packet(n + offset, role.outgoing, frame(FRAME_AUTH, auth.to_bytes())))

    for action in auth_phase:
        _apply(action, auth_packets, emit)

    for pkt in auth_packets:
        receiver = parties[pkt.direction.sender.peer]
        emit(pkt.direction, "auth", pkt.wire)
        if receiver.phase not in (Phase.EXCHANGING, Phase.FINALIZING):
            continue
        try:
            kind, body = deframe(pkt.wire)
        except FrameError:
            receiver.abort(AbortReason.MALFORMED)
            continue
        if kind != FRAME_AUTH:
            receiver.abort(AbortReason.MALFORMED)
            continue
        receiver.finalize_receive(body)

    for state in parties.values():
        if state.outcome is None:
            state.abort(AbortReason.MISSING_AUTHENTICATOR)
    return parties[Role.INITIATOR].outcome, parties[Role.RESPONDER].outcome, events
