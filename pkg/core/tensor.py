"""
Tensor Module
Dense numpy-backed tensors with reverse-mode automatic differentiation.

Every op records its parents and a vector-Jacobian product closure. ``backward``
orders the recorded graph topologically (the tape) and walks it in exact reverse,
accumulating gradients in a dictionary so the same graph can be differentiated
several times (per-task gradient norms, linearity checks).
"""
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NonFiniteError

_DEBUG_CHECKS = False
_DEFAULT_DTYPE = np.float64

VJP = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def set_debug_checks(enabled: bool) -> None:
    """Enable or disable finite-value checks after every op."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS


def set_default_dtype(dtype) -> None:
    """Set the dtype used when wrapping plain Python/numpy data."""
    global _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.dtype(dtype).type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """
    Immutable value node of the computation graph.
    """

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str = None,
        _parents: Tuple["Tensor", ...] = (),
        _vjp: VJP = None,
        _op: str = "leaf",
        dtype=None,
    ):
        if isinstance(data, np.ndarray) and dtype is None and data.dtype in (np.float32, np.float64):
            self.data = data
        else:
            self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._vjp = _vjp
        self._op = _op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{label})"

    def __add__(self, other):
        from .ops import add, add_const
        if isinstance(other, Tensor):
            return add(self, other)
        return add_const(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from .ops import scale
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def __sub__(self, other):
        return self + (-other)


def constant(data, dtype=None) -> Tensor:
    """Wrap data that never needs a gradient (inputs, targets)."""
    return Tensor(data, requires_grad=False, dtype=dtype)


def parameter(data, name: str = None, dtype=None) -> Tensor:
    """Wrap a trainable array."""
    return Tensor(np.array(data, dtype=dtype or _DEFAULT_DTYPE), requires_grad=True, name=name)


def make_result(data: np.ndarray, parents: Sequence[Tensor], vjp: VJP, op: str) -> Tensor:
    """
    Build an op output, recording the graph edge only when some parent needs a gradient.
    """
    if _DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by '{op}'")
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, requires_grad=False, _op=op)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _vjp=vjp, _op=op)


class Tape:
    """
    Ordered record of the ops between the leaves and one output.

    ``nodes`` is topologically sorted (parents before children); backward walks it
    in exact reverse.
    """

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, output: Tensor, wrt: Iterable[Tensor] = None) -> "Tape":
        """
        Collect the graph feeding ``output``.

        Args:
            output: Root of the graph
            wrt: When given, keep only nodes that lie on a path to one of these

        Returns:
            Tape in topological order
        """
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        if wrt is None:
            return cls(order)

        targets = {id(t) for t in wrt}
        relevant = set()
        for node in order:
            if id(node) in targets or any(id(p) in relevant for p in node._parents):
                relevant.add(id(node))
        return cls([n for n in order if id(n) in relevant])

    def __len__(self):
        return len(self.nodes)


def backward(
    loss: Tensor,
    params: Union[Mapping[str, Tensor], Sequence[Tensor]],
    seed: np.ndarray = None,
) -> Union[Dict[str, np.ndarray], List[np.ndarray]]:
    """
    Reverse-mode accumulation of d(loss)/d(param).

    Args:
        loss: Output tensor (a scalar unless ``seed`` is given)
        params: Named mapping or sequence of parameters
        seed: Upstream gradient, defaults to ones

    Returns:
        Gradients shaped like ``params``; parameters the loss does not depend on
        get zeros.
    """
    named = isinstance(params, Mapping)
    tensors = list(params.values()) if named else list(params)

    grads: Dict[int, np.ndarray] = {}
    if loss.requires_grad:
        tape = Tape.record(loss, wrt=tensors)
        relevant = {id(n) for n in tape.nodes}
        grads[id(loss)] = np.ones_like(loss.data) if seed is None else np.asarray(seed, dtype=loss.dtype)
        for node in reversed(tape.nodes):
            g = grads.get(id(node))
            if g is None or node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or id(parent) not in relevant:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    result = [grads.get(id(t), np.zeros_like(t.data)) for t in tensors]
    if named:
        return dict(zip(params.keys(), result))
    return result
