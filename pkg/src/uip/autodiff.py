"""Reverse-mode autodiff on a flat tape of scalar nodes.

Every node is one scalar: (value, parent ids, local partials). Nodes are
identified by their integer position on the tape, values live in a single
growable float64 array, and each recorded operation covers a contiguous
block of nodes that share a common arity, with parents and partials stored
flat in node-major order. The backward pass walks operations in reverse
creation order, which is a valid reverse topological order because parents
always precede children on the tape; each node is visited exactly once.

The block-structured storage is purely an implementation detail: the
vector helpers (affine, matmul, ...) record one operation for a whole
block of output scalars so the Python overhead stays off the training
path, but semantically each output is still an independent scalar node.

Partials are evaluated during the forward pass (a classic preaccumulation
tape), so recording an op fixes its local derivatives.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import ContractViolationError

Ids = np.ndarray  # int64 array of node ids, any shape


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Tape:
    """Append-only computation tape with reverse-mode gradients."""

    def __init__(self, capacity: int = 1024):
        self._vals = np.zeros(max(capacity, 16))
        self._n = 0
        # (first node id, parents flat, partials flat, arity)
        self._ops: list[tuple[int, np.ndarray, np.ndarray, int]] = []

    def __len__(self) -> int:
        return self._n

    # -- allocation ------------------------------------------------------

    def _alloc(self, values: np.ndarray) -> Ids:
        k = values.size
        end = self._n + k
        if end > self._vals.size:
            grown = np.zeros(max(end, 2 * self._vals.size))
            grown[: self._n] = self._vals[: self._n]
            self._vals = grown
        self._vals[self._n : end] = values.ravel()
        ids = np.arange(self._n, end, dtype=np.int64).reshape(values.shape)
        self._n = end
        return ids

    def _record(self, values: np.ndarray, parents: np.ndarray, partials: np.ndarray, arity: int) -> Ids:
        ids = self._alloc(values)
        self._ops.append((int(ids.flat[0]), parents.ravel(), partials.ravel(), arity))
        return ids

    def leaf(self, values) -> Ids:
        """New input nodes (no parents). Gradients flow into them but not past."""
        return self._alloc(np.asarray(values, dtype=float))

    def val(self, ids) -> np.ndarray:
        """Current values of the given nodes."""
        return self._vals[np.asarray(ids, dtype=np.int64)]

    def scalar_val(self, node: int) -> float:
        return float(self._vals[node])

    # -- elementwise -----------------------------------------------------

    def _binary(self, a: Ids, b: Ids, values: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> Ids:
        parents = np.stack([a.ravel(), b.ravel()], axis=1)
        partials = np.stack([pa.ravel(), pb.ravel()], axis=1)
        return self._record(values, parents, partials, 2).reshape(a.shape)

    def add(self, a: Ids, b: Ids) -> Ids:
        va, vb = self.val(a), self.val(b)
        ones = np.ones(a.size)
        return self._binary(a, b, va + vb, ones, ones)

    def sub(self, a: Ids, b: Ids) -> Ids:
        va, vb = self.val(a), self.val(b)
        return self._binary(a, b, va - vb, np.ones(a.size), -np.ones(a.size))

    def mul(self, a: Ids, b: Ids) -> Ids:
        va, vb = self.val(a), self.val(b)
        return self._binary(a, b, va * vb, vb, va)

    def blend(self, a: Ids, b: Ids, wa, wb) -> Ids:
        """wa*a + wb*b with constant weights (scalar or per-element arrays)."""
        va, vb = self.val(a), self.val(b)
        wa = np.broadcast_to(np.asarray(wa, dtype=float), a.shape).copy()
        wb = np.broadcast_to(np.asarray(wb, dtype=float), b.shape).copy()
        return self._binary(a, b, wa * va + wb * vb, wa, wb)

    def _unary(self, a: Ids, values: np.ndarray, partials: np.ndarray) -> Ids:
        return self._record(values, a.ravel(), partials, 1).reshape(a.shape)

    def scale(self, a: Ids, c) -> Ids:
        c = np.broadcast_to(np.asarray(c, dtype=float), a.shape).copy()
        return self._unary(a, self.val(a) * c, c)

    def add_const(self, a: Ids, c) -> Ids:
        c = np.broadcast_to(np.asarray(c, dtype=float), a.shape)
        return self._unary(a, self.val(a) + c, np.ones(a.size))

    def neg(self, a: Ids) -> Ids:
        return self.scale(a, -1.0)

    def sigmoid(self, a: Ids) -> Ids:
        y = _stable_sigmoid(self.val(a))
        return self._unary(a, y, y * (1.0 - y))

    def tanh(self, a: Ids) -> Ids:
        y = np.tanh(self.val(a))
        return self._unary(a, y, 1.0 - y * y)

    def softplus(self, a: Ids) -> Ids:
        x = self.val(a)
        return self._unary(a, np.logaddexp(0.0, x), _stable_sigmoid(x))

    def sqrt(self, a: Ids) -> Ids:
        y = np.sqrt(self.val(a))
        return self._unary(a, y, 0.5 / y)

    def recip(self, a: Ids) -> Ids:
        y = 1.0 / self.val(a)
        return self._unary(a, y, -y * y)

    def abs(self, a: Ids) -> Ids:
        x = self.val(a)
        return self._unary(a, np.abs(x), np.sign(x))

    def square(self, a: Ids) -> Ids:
        x = self.val(a)
        return self._unary(a, x * x, 2.0 * x)

    # -- reductions and linear algebra ------------------------------------

    def sum(self, a: Ids) -> int:
        a = a.ravel()
        ids = self._record(np.array(self.val(a).sum()), a, np.ones(a.size), a.size)
        return int(ids.flat[0])

    def dot(self, a: Ids, b: Ids) -> int:
        a, b = a.ravel(), b.ravel()
        va, vb = self.val(a), self.val(b)
        parents = np.concatenate([a, b])
        partials = np.concatenate([vb, va])
        ids = self._record(np.array(va @ vb), parents, partials, parents.size)
        return int(ids.flat[0])

    def group_dot(self, a: Ids, b: Ids) -> Ids:
        """Row-wise dot of two (k, n) id blocks -> (k,) nodes."""
        va, vb = self.val(a), self.val(b)
        values = np.einsum("ij,ij->i", va, vb)
        parents = np.concatenate([a, b], axis=1)
        partials = np.concatenate([vb, va], axis=1)
        return self._record(values, parents, partials, 2 * a.shape[1])

    def group_sum(self, a: Ids) -> Ids:
        """Row-wise sum of a (k, n) id block -> (k,) nodes."""
        values = self.val(a).sum(axis=1)
        return self._record(values, a, np.ones(a.size), a.shape[1])

    def affine(self, w: Ids, x: Ids, b: Ids | None = None) -> Ids:
        """W @ x (+ b) for a (m, n) weight block and (n,) input block."""
        m, n = w.shape
        vw, vx = self.val(w), self.val(x)
        values = vw @ vx
        if b is None:
            parents = np.concatenate([w, np.tile(x, (m, 1))], axis=1)
            partials = np.concatenate([np.tile(vx, (m, 1)), vw], axis=1)
            arity = 2 * n
        else:
            values = values + self.val(b)
            parents = np.concatenate([w, np.tile(x, (m, 1)), b[:, None]], axis=1)
            partials = np.concatenate([np.tile(vx, (m, 1)), vw, np.ones((m, 1))], axis=1)
            arity = 2 * n + 1
        return self._record(values, parents, partials, arity)

    def matmul(self, a: Ids, b: Ids) -> Ids:
        """(m, k) @ (k, n) on node blocks -> (m, n) nodes."""
        m, k = a.shape
        k2, n = b.shape
        if k != k2:
            raise ContractViolationError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        va, vb = self.val(a), self.val(b)
        values = va @ vb
        # output (i, j): parents are row i of a and column j of b
        pa = np.repeat(a[:, None, :], n, axis=1)  # (m, n, k)
        pb = np.repeat(b.T[None, :, :], m, axis=0)  # (m, n, k)
        parents = np.concatenate([pa, pb], axis=2).reshape(m * n, 2 * k)
        da = np.repeat(vb.T[None, :, :], m, axis=0)  # d/d a[i,:] = b[:, j]
        db = np.repeat(va[:, None, :], n, axis=1)  # d/d b[:,j] = a[i, :]
        partials = np.concatenate([da, db], axis=2).reshape(m * n, 2 * k)
        return self._record(values, parents, partials, 2 * k).reshape(m, n)

    # -- backward ----------------------------------------------------------

    def gradient(self, root: int) -> np.ndarray:
        """d root / d node for every node on the tape (index with leaf ids)."""
        g = np.zeros(self._n)
        g[root] = 1.0
        for start, parents, partials, arity in reversed(self._ops):
            k = parents.size // arity
            seg = g[start : start + k]
            if not seg.any():
                continue
            np.add.at(g, parents, partials * np.repeat(seg, arity))
        return g


def grad_check(
    f: Callable[[np.ndarray], tuple[float, np.ndarray | None]],
    x0,
    eps: float = 1e-5,
) -> float:
    """Compare the analytic gradient of f at x0 against central differences.

    f maps a parameter vector to (value, gradient). The gradient is only
    consulted at x0 itself, so f may return None for it at other points.
    Returns max_i |g_i - fd_i| / max(1, |fd_i|); non-finite values anywhere
    count as failure (inf).
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ContractViolationError(f"grad_check eps {eps} outside [1e-7, 1e-3]")
    x0 = np.asarray(x0, dtype=float).copy()
    value, grad = f(x0)
    if grad is None:
        raise ContractViolationError("f must return its gradient at the expansion point")
    grad = np.asarray(grad, dtype=float)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        return math.inf
    worst = 0.0
    for i in range(x0.size):
        xp = x0.copy()
        xp.flat[i] += eps
        xm = x0.copy()
        xm.flat[i] -= eps
        vp, _ = f(xp)
        vm, _ = f(xm)
        if not (np.isfinite(vp) and np.isfinite(vm)):
            return math.inf
        fd = (vp - vm) / (2.0 * eps)
        err = abs(grad.flat[i] - fd) / max(1.0, abs(fd))
        worst = max(worst, err)
    return worst
