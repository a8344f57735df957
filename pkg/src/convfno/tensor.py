"""Dense float64 tensors and a reverse-mode tape.

Operations record themselves on the innermost active :class:`Tape`. Outside
a tape every op runs as plain numpy with nothing retained, which is the fast
path used for inference and data generation.

    with Tape() as tape:
        loss = some_model(x)
    grads = tape.backward(loss)
"""
from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

__all__ = ["Tensor", "Tape", "TapeError", "backward", "as_tensor", "record", "current_tape"]


class TapeError(RuntimeError):
    """Raised for malformed tapes (order violations, released buffers)."""


class Tensor:
    """A dense row-major array of float64 (or complex128 for spectral weights)."""

    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        if arr.ndim > 0 and min(arr.shape) < 1:
            raise ValueError(f"tensor extents must be >= 1, got {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    # basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # arithmetic sugar; the implementations live in ops --------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not a supported primitive")
        return ops.mul(self, 1.0 / other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def sum(self):
        from . import ops
        return ops.sum(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out", "parents", "backward_fn", "index")

    def __init__(self, out, parents, backward_fn, index):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn
        self.index = index


_local = threading.local()


def _stack() -> list:
    st = getattr(_local, "stack", None)
    if st is None:
        st = _local.stack = []
    return st


def current_tape() -> "Tape | None":
    st = _stack()
    return st[-1] if st else None


class Tape:
    """Records primitive ops in execution order.

    Execution order is a topological order by construction, so the
    backward sweep is a reverse scan of ``nodes``.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._produced: dict[int, int] = {}
        self._leaves: dict[int, Tensor] = {}
        self._released = False

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        st = _stack()
        if not st or st[-1] is not self:
            raise TapeError("tape stack corrupted: exiting a tape that is not innermost")
        st.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def push(self, out: Tensor, parents: Sequence[Tensor], backward_fn: Callable) -> None:
        if self._released:
            raise TapeError("cannot record on a tape whose buffers were released")
        for p in parents:
            if p.requires_grad and id(p) not in self._produced:
                self._leaves.setdefault(id(p), p)
        node = _Node(out, tuple(parents), backward_fn, len(self.nodes))
        self._produced[id(out)] = node.index
        self.nodes.append(node)

    @property
    def leaves(self) -> list[Tensor]:
        return list(self._leaves.values())

    def check_order(self) -> None:
        """Verify every recorded node's parents were produced before it."""
        for node in self.nodes:
            for p in node.parents:
                j = self._produced.get(id(p))
                if j is not None and j >= node.index:
                    raise TapeError(f"node {node.index} consumes a tensor produced at {j}: cycle")

    def backward(self, output: Tensor, seed=None, retain: bool = False) -> dict:
        return backward(self, output, seed, retain=retain)


def record(out_data, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap ``out_data`` as a Tensor and register it on the active tape.

    ``backward_fn(g)`` must return one gradient (or None) per parent.
    """
    out = Tensor(out_data)
    tape = current_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.push(out, parents, backward_fn)
    return out


def _reduce_like(g: np.ndarray, ref: Tensor) -> np.ndarray:
    if not ref.is_complex and np.iscomplexobj(g):
        g = g.real
    if g.shape != ref.shape:
        raise TapeError(f"gradient shape {g.shape} does not match tensor shape {ref.shape}")
    return g


def backward(tape: Tape, output: Tensor, seed=None, retain: bool = False) -> dict:
    """Reverse sweep over ``tape``.

    Returns ``{leaf: gradient}`` for every requires_grad leaf seen on the
    tape (zeros for leaves the output does not depend on) and accumulates
    into ``leaf.grad``. Complex leaves get ``dL/dRe + i dL/dIm``.
    """
    if tape._released:
        raise TapeError("saved activations were released by an earlier backward; record again")
    if seed is None:
        if output.size != 1:
            raise TapeError(f"a seed is required for non-scalar output of shape {output.shape}")
        seed = np.ones_like(output.data)
    seed = np.asarray(seed.data if isinstance(seed, Tensor) else seed, dtype=output.dtype)
    if seed.shape != output.shape:
        raise TapeError(f"seed shape {seed.shape} != output shape {output.shape}")
    tape.check_order()

    grads: dict[int, np.ndarray] = {id(output): seed}
    start = tape._produced.get(id(output))
    if start is None and id(output) not in tape._leaves:
        raise TapeError("output was not produced on this tape")
    if start is not None:
        for node in reversed(tape.nodes[: start + 1]):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            if node.backward_fn is None:
                raise TapeError(f"node {node.index} has no saved backward state")
            pgrads = node.backward_fn(g)
            for p, pg in zip(node.parents, pgrads):
                if pg is None or not p.requires_grad:
                    continue
                pg = _reduce_like(pg, p)
                prev = grads.get(id(p))
                grads[id(p)] = pg if prev is None else prev + pg

    result = {}
    for key, leaf in tape._leaves.items():
        g = grads.get(key)
        if g is None:
            g = np.zeros_like(leaf.data)
        result[leaf] = g
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
    if not retain:
        for node in tape.nodes:
            node.backward_fn = None
        tape._released = True
    return result
