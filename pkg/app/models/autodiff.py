"""
ToolNet Pipeline Autodiff
最小的反向模式自动微分：二维 float64 张量、计算图与优化器
"""

import itertools
import json
import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.error_handler import ContractError, DimensionError, MissingInputError

logger = logging.getLogger(__name__)

_node_ids = itertools.count()

ArrayLike = Union[np.ndarray, Sequence, float]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class DTensor:
    """二维张量节点；参数节点的 grad 在 backward 中累加"""

    def __init__(
        self,
        data: ArrayLike,
        parents: Tuple["DTensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        requires_grad: bool = False,
        name: str = "",
    ):
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim > 2:
            raise DimensionError("only 2-D tensors are supported", array.shape)
        self.data = array
        self.grad = np.zeros_like(array)
        self.node_id = next(_node_ids)
        self.name = name
        self._parents = parents
        self._backward_fn = backward_fn
        self.is_leaf = not parents
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"DTensor{label}(shape={self.shape})"

    # 运算符便捷写法
    def __matmul__(self, other: "DTensor") -> "DTensor":
        return matmul(self, other)

    def __add__(self, other: "DTensor") -> "DTensor":
        return add(self, other)

    def __mul__(self, other: "DTensor") -> "DTensor":
        return hadamard(self, other)


def parameter(data: ArrayLike, name: str = "") -> DTensor:
    return DTensor(data, requires_grad=True, name=name)


def constant(data: ArrayLike, name: str = "") -> DTensor:
    return DTensor(data, requires_grad=False, name=name)


def _result(data: np.ndarray, parents: Tuple[DTensor, ...], backward_fn: BackwardFn) -> DTensor:
    return DTensor(data, parents=parents, backward_fn=backward_fn)


def _same_shape(op: str, a: DTensor, b: DTensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch", a.shape, b.shape)


# ---------------------------------------------------------------- ops

def matmul(a: DTensor, b: DTensor) -> DTensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError("matmul: inner dimensions differ", a.shape, b.shape)

    def backward_fn(g):
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward_fn)


def add(a: DTensor, b: DTensor) -> DTensor:
    _same_shape("add", a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def add_bias(x: DTensor, bias: DTensor) -> DTensor:
    """x[m×n] 每行加 bias[1×n]，唯一允许的广播"""
    if bias.shape[0] != 1 or bias.shape[1] != x.shape[1]:
        raise DimensionError("add_bias: bias must be a single row", x.shape, bias.shape)

    def backward_fn(g):
        return g, g.sum(axis=0, keepdims=True)

    return _result(x.data + bias.data, (x, bias), backward_fn)


def hadamard(a: DTensor, b: DTensor) -> DTensor:
    _same_shape("hadamard", a, b)

    def backward_fn(g):
        return g * b.data, g * a.data

    return _result(a.data * b.data, (a, b), backward_fn)


def scale_by(x: DTensor, s: DTensor) -> DTensor:
    """x 乘以 1×1 标量张量 s"""
    if s.shape != (1, 1):
        raise DimensionError("scale_by: scale must be 1x1", s.shape)
    factor = s.data[0, 0]

    def backward_fn(g):
        return g * factor, np.array([[np.sum(g * x.data)]])

    return _result(x.data * factor, (x, s), backward_fn)


def affine(x: DTensor, scale: float, shift: float) -> DTensor:
    """scale * x + shift，常数系数"""
    return _result(x.data * scale + shift, (x,), lambda g: (g * scale,))


def one_minus(x: DTensor) -> DTensor:
    return affine(x, -1.0, 1.0)


def sigmoid(x: DTensor) -> DTensor:
    # 分段写法避免 exp 溢出
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward_fn(g):
        return (g * out * (1.0 - out),)

    return _result(out, (x,), backward_fn)


def tanh(x: DTensor) -> DTensor:
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - out ** 2),))


def prelu(x: DTensor, slope: DTensor) -> DTensor:
    """PReLU，每层一个可学习斜率"""
    if slope.shape != (1, 1):
        raise DimensionError("prelu: slope must be 1x1", slope.shape)
    a = slope.data[0, 0]
    pos = x.data > 0
    out = np.where(pos, x.data, a * x.data)

    def backward_fn(g):
        gx = np.where(pos, g, a * g)
        gs = np.array([[np.sum(np.where(pos, 0.0, g * x.data))]])
        return gx, gs

    return _result(out, (x, slope), backward_fn)


def concat(tensors: Sequence[DTensor], axis: int = -1) -> DTensor:
    """沿最后一维拼接（axis=0 时按行拼接）"""
    tensors = tuple(tensors)
    if not tensors:
        raise ContractError("concat: no tensors")
    axis = 1 if axis in (-1, 1) else 0
    other = 1 - axis
    for t in tensors[1:]:
        if t.shape[other] != tensors[0].shape[other]:
            raise DimensionError("concat: shape mismatch", tensors[0].shape, t.shape)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward_fn)


def sum_reduce(x: DTensor, axis: Optional[int] = None) -> DTensor:
    """axis=None 求和为 1×1；axis=0 按列求和为一行；axis=1 按行求和为一列"""
    if axis is None:
        out = np.array([[x.data.sum()]])
        return _result(out, (x,), lambda g: (np.full_like(x.data, g[0, 0]),))
    out = x.data.sum(axis=axis, keepdims=True)
    return _result(out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def softmax(x: DTensor, axis: int = 0) -> DTensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (x,), backward_fn)


def transpose(x: DTensor) -> DTensor:
    return _result(x.data.T.copy(), (x,), lambda g: (g.T,))


def log(x: DTensor) -> DTensor:
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,))


def clip(x: DTensor, low: float, high: float) -> DTensor:
    inside = (x.data >= low) & (x.data <= high)
    return _result(np.clip(x.data, low, high), (x,), lambda g: (np.where(inside, g, 0.0),))


def tile_rows(row: DTensor, n: int) -> DTensor:
    """把一行复制为 n 行（ones[n×1] @ row）"""
    if row.shape[0] != 1:
        raise DimensionError("tile_rows: expected a single row", row.shape)
    return matmul(constant(np.ones((n, 1))), row)


# ---------------------------------------------------------------- backward

def _topological_order(root: DTensor) -> List[DTensor]:
    order: List[DTensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(loss: DTensor) -> None:
    """从标量 loss 反向传播；参数的 grad 累加，不自动清零"""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = pg


def zero_grad(params: Iterable[DTensor]) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------- optimizers

class SGD:
    """朴素随机梯度下降"""

    def __init__(self, params: Dict[str, DTensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params.values():
            p.data -= self.lr * p.grad


class Adam:
    """Adam 优化器，偏差修正"""

    def __init__(
        self,
        params: Dict[str, DTensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * p.grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * p.grad ** 2
            p.data -= self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)


# ---------------------------------------------------------------- checkpoint

HEADER_KEY = "__header__"


def save_params(path: Union[str, Path], params: Dict[str, DTensor], header: Optional[dict] = None) -> Path:
    """npz 检查点：参数名 -> float64 数组，外加 JSON 头"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: p.data for name, p in params.items()}
    arrays[HEADER_KEY] = np.array(json.dumps(header or {}, sort_keys=True))
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    logger.debug(f"检查点已写入: {path} ({len(params)} 个参数)")
    return path


def load_params(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(str(path))
    with np.load(path, allow_pickle=False) as archive:
        header = json.loads(str(archive[HEADER_KEY])) if HEADER_KEY in archive.files else {}
        arrays = {name: archive[name].astype(np.float64) for name in archive.files if name != HEADER_KEY}
    return arrays, header
