"""A metered stand-in for packed CKKS ciphertexts.

Values are plain float64 slot arrays; only the HE-legal operation set is
exposed (elementwise add/sub/mul, plaintext scalar or vector ops, cyclic
rotation) and every operation is charged to the context's ``CostLedger``.
No encryption happens here.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadRotation, InvalidParams, WidthMismatch


@dataclass
class CostLedger:
    mults: int = 0
    depth: int = 0
    rotations: int = 0
    pt_ops: int = 0
    adds: int = 0

    def copy(self) -> "CostLedger":
        return CostLedger(**asdict(self))

    def since(self, start: "CostLedger") -> "CostLedger":
        """Counter deltas relative to an earlier snapshot (depth is reported as-is)."""
        return CostLedger(
            mults=self.mults - start.mults,
            depth=self.depth,
            rotations=self.rotations - start.rotations,
            pt_ops=self.pt_ops - start.pt_ops,
            adds=self.adds - start.adds,
        )

    def record(self) -> dict:
        return {"mults": self.mults, "depth": self.depth, "rotations": self.rotations, "ptOps": self.pt_ops}

    def to_json(self) -> str:
        return json.dumps(self.record(), sort_keys=True)


@dataclass(frozen=True)
class NoiseModel:
    enabled: bool = False
    eps_std: float = 0.0

    def __post_init__(self):
        if self.eps_std < 0:
            raise InvalidParams("eps_std must be >= 0")


class SlotContext:
    """Slot width, cost ledger, noise source and accounting policy for one computation.

    With ``count_scalar_mults=True`` a multiplication by a plaintext (scalar
    or vector) is charged as a multiplication and consumes a depth level,
    the way a rescale does in CKKS. By default such products only bump
    ``pt_ops``.
    """

    def __init__(self, slots: int, *, noise: NoiseModel | None = None, seed: int = 0,
                 count_scalar_mults: bool = False):
        if slots < 1 or slots & (slots - 1):
            raise InvalidParams(f"slot count must be a power of two, got {slots}")
        self.slots = int(slots)
        self.log_slots = self.slots.bit_length() - 1
        self.noise = noise or NoiseModel()
        self.count_scalar_mults = count_scalar_mults
        self.ledger = CostLedger()
        self._rng = np.random.Generator(np.random.Philox(seed))

    def encrypt(self, values, fill: float = 0.0) -> "SlotVector":
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size > self.slots:
            raise WidthMismatch(f"{v.size} values do not fit in {self.slots} slots")
        out = np.full(self.slots, fill, dtype=np.float64)
        out[: v.size] = v
        return SlotVector(self, out, 0)

    def pack(self, values, fill: float = 0.0) -> list["SlotVector"]:
        """Split a logical vector across ceil(n/s) ciphertexts, padding the tail with ``fill``."""
        v = np.asarray(values, dtype=np.float64).ravel()
        count = max(1, -(-v.size // self.slots))
        padded = np.full(count * self.slots, fill, dtype=np.float64)
        padded[: v.size] = v
        return [SlotVector(self, chunk.copy(), 0) for chunk in padded.reshape(count, self.slots)]

    def _noisy(self, arr: np.ndarray) -> np.ndarray:
        if self.noise.enabled and self.noise.eps_std > 0:
            arr = arr + self._rng.normal(0.0, self.noise.eps_std, size=arr.shape)
        return arr

    def _emit(self, arr: np.ndarray, depth: int) -> "SlotVector":
        if depth > self.ledger.depth:
            self.ledger.depth = depth
        return SlotVector(self, self._noisy(arr), depth)


def unpack(cts, n: int | None = None) -> np.ndarray:
    flat = np.concatenate([ct.decrypt() for ct in cts])
    return flat if n is None else flat[:n]


class SlotVector:
    """A simulated ciphertext: ``ctx.slots`` lanes plus the depth at which it was produced."""

    __slots__ = ("ctx", "_slots", "depth")
    __array_priority__ = 1000  # keep ndarray * SlotVector routed to __rmul__

    def __init__(self, ctx: SlotContext, slots: np.ndarray, depth: int = 0):
        self.ctx = ctx
        self._slots = slots
        self.depth = depth

    def __len__(self):
        return self.ctx.slots

    def __repr__(self):
        return f"SlotVector(s={self.ctx.slots}, depth={self.depth})"

    def decrypt(self) -> np.ndarray:
        return self._slots.copy()

    def _peer(self, other: "SlotVector") -> None:
        if other.ctx is not self.ctx:
            raise WidthMismatch("operands belong to different contexts")

    def _plain(self, other) -> np.ndarray | float:
        if np.ndim(other) == 0:
            return float(other)
        arr = np.asarray(other, dtype=np.float64)
        if arr.shape != (self.ctx.slots,):
            raise WidthMismatch(f"plaintext of shape {arr.shape} against {self.ctx.slots} slots")
        return arr

    # -- additive ops --
    def __add__(self, other):
        ctx = self.ctx
        if isinstance(other, SlotVector):
            self._peer(other)
            ctx.ledger.adds += 1
            return ctx._emit(self._slots + other._slots, max(self.depth, other.depth))
        ctx.ledger.pt_ops += 1
        return ctx._emit(self._slots + self._plain(other), self.depth)

    __radd__ = __add__

    def __neg__(self):
        return SlotVector(self.ctx, -self._slots, self.depth)

    def __sub__(self, other):
        if isinstance(other, SlotVector):
            self._peer(other)
            self.ctx.ledger.adds += 1
            return self.ctx._emit(self._slots - other._slots, max(self.depth, other.depth))
        self.ctx.ledger.pt_ops += 1
        return self.ctx._emit(self._slots - self._plain(other), self.depth)

    def __rsub__(self, other):
        self.ctx.ledger.pt_ops += 1
        return self.ctx._emit(self._plain(other) - self._slots, self.depth)

    # -- multiplicative ops --
    def __mul__(self, other):
        ctx = self.ctx
        if isinstance(other, SlotVector):
            self._peer(other)
            ctx.ledger.mults += 1
            return ctx._emit(self._slots * other._slots, max(self.depth, other.depth) + 1)
        ctx.ledger.pt_ops += 1
        depth = self.depth
        if ctx.count_scalar_mults:
            ctx.ledger.mults += 1
            depth += 1
        return ctx._emit(self._slots * self._plain(other), depth)

    __rmul__ = __mul__

    def square(self):
        return self * self

    def pow(self, p: int) -> "SlotVector":
        """Elementwise ``self**p`` by square-and-multiply.

        The set bits' powers are combined shallowest-first, so the depth added
        is ceil(log2 p) and the multiplication count is
        (bit_length - 1) + (popcount - 1).
        """
        p = int(p)
        if p < 1:
            raise InvalidParams(f"power must be >= 1, got {p}")
        heap = []
        sq = self
        for bit in range(p.bit_length()):
            if bit:
                sq = sq * sq
            if (p >> bit) & 1:
                heapq.heappush(heap, (sq.depth, bit, sq))
        tiebreak = p.bit_length()
        while len(heap) > 1:
            _, _, a = heapq.heappop(heap)
            _, _, b = heapq.heappop(heap)
            prod = a * b
            heapq.heappush(heap, (prod.depth, tiebreak, prod))
            tiebreak += 1
        return heap[0][2]

    # -- slot movement --
    def rotate(self, step: int) -> "SlotVector":
        """Cyclic left rotation by ``step`` lanes; ``step=0`` is free."""
        s = self.ctx.slots
        if not 0 <= step < s:
            raise BadRotation(f"rotation {step} outside [0, {s})")
        if step == 0:
            return self
        self.ctx.ledger.rotations += 1
        return self.ctx._emit(np.roll(self._slots, -step), self.depth)

    def rotate_right(self, step: int) -> "SlotVector":
        return self.rotate((-step) % self.ctx.slots)

    def rotate_and_sum(self) -> "SlotVector":
        """Every lane receives the sum of all lanes: log2(s) rotations and additions."""
        acc = self
        step = self.ctx.slots // 2
        while step >= 1:
            acc = acc + acc.rotate(step)
            step //= 2
        return acc


def total_sum(cts: list[SlotVector]) -> SlotVector:
    """Sum of every lane of every ciphertext, broadcast to all lanes of one ciphertext.

    Ciphertexts are first added lane-wise (no rotations), then one
    rotate-and-sum finishes the reduction.
    """
    acc = cts[0]
    for ct in cts[1:]:
        acc = acc + ct
    return acc.rotate_and_sum()
