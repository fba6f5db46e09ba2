"""Exact tree-sum representation of the message-passing iterates.

For a polynomial family ``f^l_r(x, t) = sum_e c[l, t, r, e] prod_s x(s)**e_s``
the message ``z^t_{i->j}(r)`` (resp. node value ``z^t_i(r)``) equals a finite
sum over labeled non-backtracking trees of depth ``t`` whose root has type
``i`` and a single child of mark ``r``. Every tree carries a weight

    A(T) * Gamma(T, c, t) * x(T)

where ``A(T)`` multiplies matrix entries over edges, ``Gamma`` multiplies the
polynomial coefficient selected at each non-root vertex, and ``x(T)`` collects
the initial condition at the depth-``t`` ("artificial") leaves.

This module enumerates the trees explicitly; it is an oracle for tiny
instances, not a solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ScaleError
from .functions import CoordinatePolynomial, exponent_tuples

MAX_N, MAX_T, MAX_D, MAX_Q = 8, 3, 2, 2
MAX_TREES = 2_000_000


class Family(str, Enum):
    NODE = "T_i_r"            # z^t_i(r)
    MESSAGE = "T_i_to_j_r"    # z^t_{i->j}(r)


@dataclass(frozen=True)
class TreeNode:
    """Non-root vertex: type ``ell``, mark ``r`` (0-based), exponent tuple.

    For internal vertices ``exps[s]`` counts children of mark ``s``; natural
    leaves have all-zero ``exps``; artificial leaves (at depth ``t``) carry an
    arbitrary tuple with sum at most ``d`` and no children.
    """

    ell: int
    r: int
    exps: tuple[int, ...]
    children: tuple[TreeNode, ...] = ()


@dataclass(frozen=True)
class LabeledTree:
    root: int
    child: TreeNode
    t: int

    def bracket(self) -> str:
        return f"{self.root}({_bracket(self.child)})"

    def nodes(self):
        """Yield ``(node, parent_type, generation)`` for every non-root vertex."""
        stack = [(self.child, self.root, 1)]
        while stack:
            node, parent, gen = stack.pop()
            yield node, parent, gen
            for ch in node.children:
                stack.append((ch, node.ell, gen + 1))


def _bracket(node: TreeNode) -> str:
    head = f"{node.ell}:{node.r}[{','.join(map(str, node.exps))}]"
    if not node.children:
        return head
    return head + "(" + " ".join(_bracket(c) for c in node.children) + ")"


def _check_limits(N: int, q: int, d: int, t: int) -> None:
    if N > MAX_N or t > MAX_T or d > MAX_D or q > MAX_Q:
        raise ScaleError(f"tree enumeration limited to N<={MAX_N}, t<={MAX_T}, d<={MAX_D}, q<={MAX_Q}; "
                         f"got N={N}, t={t}, d={d}, q={q}")
    if t < 1 or N < 1 or q < 1 or d < 0:
        raise ScaleError("need t >= 1, N >= 1, q >= 1, d >= 0")


def count_trees(N: int, q: int, d: int, t: int, family: Family) -> int:
    """Size of the family without enumerating it."""
    exps = exponent_tuples(q, d)

    def below(gen):
        # subtrees hanging at generation ``gen``: two types are always excluded
        if gen == t:
            return max(N - 2, 0) * len(exps)
        sub = below(gen + 1)
        return max(N - 2, 0) * sum(sub ** sum(e) for e in exps)

    first = N - (2 if family is Family.MESSAGE else 1)
    if t == 1:
        return max(first, 0) * len(exps)
    sub = below(2)
    return max(first, 0) * sum(sub ** sum(e) for e in exps)


def _subtrees(N: int, q: int, d: int, exps, depth: int, t: int, excluded: frozenset, parent: int, mark: int):
    """All vertices of mark ``mark`` at generation ``depth`` with type not in ``excluded``."""
    out = []
    for ell in range(N):
        if ell in excluded:
            continue
        if depth == t:
            out.extend(TreeNode(ell, mark, e) for e in exps)
            continue
        below = [_subtrees(N, q, d, exps, depth + 1, t, frozenset((ell, parent)), ell, s) for s in range(q)]
        for e in exps:
            pools = [below[s] for s in range(q) for _ in range(e[s])]
            for kids in itertools.product(*pools):
                out.append(TreeNode(ell, mark, e, tuple(kids)))
    return out


def enumerate_trees(N: int, q: int, d: int, t: int, family: Family | str, i: int, r: int,
                    j: int | None = None) -> list[LabeledTree]:
    """Enumerate ``T^t_i(r)`` or ``T^t_{i->j}(r)`` (0-based types and marks)."""
    family = Family(family)
    _check_limits(N, q, d, t)
    if family is Family.MESSAGE and j is None:
        raise ScaleError("message family needs the target j")
    total = count_trees(N, q, d, t, family)
    if total > MAX_TREES:
        raise ScaleError(f"family has {total} trees, above the limit {MAX_TREES}")
    exps = exponent_tuples(q, d)
    excluded = frozenset((i, j)) if family is Family.MESSAGE else frozenset((i,))
    children = _subtrees(N, q, d, exps, 1, t, excluded, i, r)
    return [LabeledTree(i, c, t) for c in children]


def is_non_backtracking(tree: LabeledTree) -> bool:
    """Every three consecutive types along a root path are distinct."""

    def walk(node, parent, grand):
        if node.ell == parent or (grand is not None and node.ell == grand):
            return False
        return all(walk(ch, node.ell, parent) for ch in node.children)

    return walk(tree.child, tree.root, None)


def is_well_formed(tree: LabeledTree, q: int, d: int) -> bool:
    for node, _, gen in tree.nodes():
        if sum(node.exps) > d or len(node.exps) != q:
            return False
        if gen < tree.t:
            counts = tuple(sum(1 for ch in node.children if ch.r == s) for s in range(q))
            if counts != node.exps:
                return False
            marks = [ch.r for ch in node.children]
            if marks != sorted(marks):
                return False
        elif node.children:
            return False
    return True


def tree_weight(tree: LabeledTree, A: np.ndarray, coeffs: CoordinatePolynomial, x0: np.ndarray) -> tuple[float, float, float]:
    """``(A(T), Gamma(T, c, t), x(T))`` for one tree."""
    eidx = {e: k for k, e in enumerate(coeffs.exps)}
    x0 = np.atleast_2d(np.asarray(x0, dtype=float).T).T
    a_w = g_w = x_w = 1.0
    for node, parent, gen in tree.nodes():
        a_w *= A[node.ell, parent]
        g_w *= coeffs.at(tree.t - gen)[node.ell, node.r, eidx[node.exps]]
        if gen == tree.t:
            for s, p in enumerate(node.exps):
                if p:
                    x_w *= x0[node.ell, s] ** p
    return a_w, g_w, x_w


def tree_sum(A, coeffs: CoordinatePolynomial, x0, t: int, family: Family | str, i: int, r: int,
             j: int | None = None) -> float:
    """Sum of tree weights; equals ``z^t_i(r)`` or ``z^t_{i->j}(r)``."""
    A = np.asarray(A, dtype=float)
    total = 0.0
    for tree in enumerate_trees(A.shape[0], coeffs.q, coeffs.d, t, family, i, r, j):
        a_w, g_w, x_w = tree_weight(tree, A, coeffs, x0)
        total += a_w * g_w * x_w
    return total
