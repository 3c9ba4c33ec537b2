"""Red/green colourings of orthogonality graphs.

Vertices are rays in C^3, edges join orthogonal rays and triads are
mutually orthogonal triples.  A valid colouring makes every vertex red (0)
or green (1), gives each triad exactly one green vertex, and never colours
both ends of an edge green.  A ray set with no valid colouring admits no
non-contextual value assignment.
"""
from __future__ import annotations

import ast
import itertools
import math
import operator
import re
from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DUPLICATE_TOL = 1e-10
BRUTE_FORCE_MAX = 20


class Color(IntEnum):
    RED = 0
    GREEN = 1


class RayParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# -- ray sets ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RaySet:
    vectors: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        v = np.array(self.vectors, dtype=complex)
        if v.ndim != 2 or (len(v) and v.shape[1] < 2):
            raise ValueError("rays must be an (n, d) array with d >= 2")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero vector is not a ray")
        v = v / norms[:, None]
        gram = np.abs(v.conj() @ v.T)
        np.fill_diagonal(gram, 0.0)
        dup = np.argwhere(np.triu(gram >= 1.0 - DUPLICATE_TOL))
        if dup.size:
            i, j = dup[0]
            raise ValueError(f"duplicate rays {i} and {j}")
        labels = tuple(self.labels) or tuple(str(i) for i in range(len(v)))
        if len(labels) != len(v):
            raise ValueError("one label per ray")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.vectors)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt}
_NAMES = {"pi": math.pi}
_COMPLEX = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)(e[+-]?\d+)?([+-](\d+\.?\d*|\.\d+)(e[+-]?\d+)?)?i$", re.I)


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
        return _FUNCS[node.func.id](_eval(node.args[0]))
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    raise ValueError("unsupported expression")


def parse_component(token: str) -> complex:
    """A number, a complex ``re+imi`` literal or an expression like ``-1/sqrt(2)``."""
    if _COMPLEX.match(token):
        return complex(token[:-1] + "j")
    try:
        return complex(_eval(ast.parse(token, mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise ValueError(f"cannot read component {token!r}") from exc


def parse_rays(text: str) -> RaySet:
    """One ray per line, whitespace-separated components, ``#`` comments and
    an optional ``label:`` prefix."""
    vecs, labels = [], []
    width = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        label = None
        if ":" in line:
            label, line = (s.strip() for s in line.split(":", 1))
        tokens = line.split()
        try:
            comps = [parse_component(t) for t in tokens]
        except ValueError as exc:
            raise RayParseError(lineno, str(exc)) from None
        if width is None:
            width = len(comps)
        if len(comps) != width or width < 2:
            raise RayParseError(lineno, f"expected {width if width and width >= 2 else 'at least 2'} components, got {len(comps)}")
        if all(c == 0 for c in comps):
            raise RayParseError(lineno, "zero vector")
        vecs.append(comps)
        labels.append(label or str(len(labels)))
    if not vecs:
        raise RayParseError(0, "no rays found")
    try:
        return RaySet(np.array(vecs), tuple(labels))
    except ValueError as exc:
        raise RayParseError(0, str(exc)) from None


def load_rays(path) -> RaySet:
    return parse_rays(Path(path).read_text())


def shipped_rays(name: str) -> RaySet:
    """A ray set from the package data directory, e.g. ``peres33``."""
    return parse_rays(resources.files("ontic").joinpath("data", f"{name}.rays").read_text())


# -- graphs --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrthogonalityGraph:
    n: int
    edges: tuple
    tol: float = DEFAULT_TOL
    adjacency: tuple = field(init=False)

    def __post_init__(self):
        edges = tuple(sorted({(min(i, j), max(i, j)) for i, j in self.edges}))
        adj = [set() for _ in range(self.n)]
        for i, j in edges:
            if i == j:
                raise ValueError("self-edge")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", tuple(frozenset(a) for a in adj))

    @classmethod
    def from_edges(cls, n: int, edges) -> "OrthogonalityGraph":
        return cls(n, tuple(edges))


def build_graph(rays: RaySet, tol: float = DEFAULT_TOL) -> OrthogonalityGraph:
    if not 0 < tol <= 0.1:
        raise ValueError("orthogonality tolerance must lie in (0, 0.1]")
    v = rays.vectors
    gram = np.abs(v.conj() @ v.T)
    i, j = np.nonzero(np.triu(gram <= tol, k=1))
    return OrthogonalityGraph(len(rays), tuple(zip(i.tolist(), j.tolist())), tol)


def enumerate_triads(g: OrthogonalityGraph) -> list[tuple[int, int, int]]:
    out = []
    adj = g.adjacency
    for i in range(g.n):
        for j in sorted(x for x in adj[i] if x > i):
            for k in sorted(x for x in adj[i] & adj[j] if x > j):
                out.append((i, j, k))
    return out


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint: int  # 1 totality, 2 one green per triad, 3 no green edge
    vertices: tuple


def validate_coloring(g: OrthogonalityGraph, triads: Sequence, coloring: Sequence) -> list[Violation]:
    """All constraint violations; an empty list means the colouring is valid."""
    out = []
    if len(coloring) != g.n:
        return [Violation(1, tuple(range(len(coloring), g.n)))]
    bad = tuple(i for i, c in enumerate(coloring) if c not in (Color.RED, Color.GREEN))
    if bad:
        out.append(Violation(1, bad))
    for t in triads:
        if sum(coloring[v] == Color.GREEN for v in t) != 1:
            out.append(Violation(2, tuple(t)))
    for i, j in g.edges:
        if coloring[i] == Color.GREEN and coloring[j] == Color.GREEN:
            out.append(Violation(3, (i, j)))
    return out


# -- search --------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    satisfiable: bool
    coloring: Optional[tuple]
    nodes: int
    solutions: Optional[list] = None

    @property
    def verdict(self) -> str:
        return "SAT" if self.satisfiable else "UNSAT"


UNKNOWN = -1


class _Conflict(Exception):
    pass


class _Solver:
    def __init__(self, g: OrthogonalityGraph, triads: Sequence):
        self.g = g
        self.triads = [tuple(t) for t in triads]
        self.of_vertex = [[] for _ in range(g.n)]
        for ti, t in enumerate(self.triads):
            for v in t:
                self.of_vertex[v].append(ti)
        self.nodes = 0

    def assign(self, state: list, v: int, color: int):
        """Set v and propagate; raises _Conflict."""
        stack = [(v, color)]
        while stack:
            v, c = stack.pop()
            if state[v] == c:
                continue
            if state[v] != UNKNOWN:
                raise _Conflict
            state[v] = c
            if c == Color.GREEN:
                for u in self.g.adjacency[v]:
                    if state[u] == Color.GREEN:
                        raise _Conflict
                    if state[u] == UNKNOWN:
                        stack.append((u, Color.RED))
            else:
                for ti in self.of_vertex[v]:
                    t = self.triads[ti]
                    vals = [state[u] for u in t]
                    if Color.GREEN in vals:
                        continue
                    open_ = [u for u in t if state[u] == UNKNOWN]
                    if not open_:
                        raise _Conflict
                    if len(open_) == 1:
                        stack.append((open_[0], Color.GREEN))

    def pick_triad(self, state):
        best, best_open = None, None
        for t in self.triads:
            if any(state[u] == Color.GREEN for u in t):
                continue
            open_ = [u for u in t if state[u] == UNKNOWN]
            if best is None or len(open_) < len(best_open):
                best, best_open = t, open_
                if len(open_) <= 1:
                    break
        return best_open

    def branch(self, state, v, c):
        self.nodes += 1
        child = list(state)
        try:
            self.assign(child, v, c)
        except _Conflict:
            return None
        return child

    def solve(self, state, sink, all_free: bool):
        """Depth-first search; ``sink`` receives complete colourings and
        returns True to stop."""
        open_ = self.pick_triad(state)
        if open_ is not None:
            for v in open_:
                child = self.branch(state, v, Color.GREEN)
                if child is not None and self.solve(child, sink, all_free):
                    return True
            return False
        free = [v for v in range(self.g.n) if state[v] == UNKNOWN]
        if not free:
            return sink(tuple(Color(c) for c in state))
        if not all_free:
            return sink(tuple(Color(c) if c != UNKNOWN else Color.RED for c in state))
        v = free[0]
        for c in (Color.GREEN, Color.RED):
            child = self.branch(state, v, c)
            if child is not None and self.solve(child, sink, all_free):
                return True
        return False


def search_coloring(g: OrthogonalityGraph, triads: Optional[Sequence] = None, find_all: bool = False) -> SearchResult:
    """Backtracking over which vertex of an uncovered triad is green, with
    unit propagation.  ``find_all`` collects every valid colouring."""
    triads = enumerate_triads(g) if triads is None else triads
    solver = _Solver(g, triads)
    state = [UNKNOWN] * g.n
    found = []

    def sink(col):
        found.append(col)
        return not find_all

    solver.solve(state, sink, all_free=find_all)
    found = sorted(set(found)) if find_all else found
    return SearchResult(bool(found), found[0] if found else None, solver.nodes, found if find_all else None)


def brute_force_colorings(g: OrthogonalityGraph, triads: Optional[Sequence] = None) -> list[tuple]:
    """Every valid colouring by exhaustive enumeration of all 2^n assignments."""
    if g.n > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX} vertices")
    triads = enumerate_triads(g) if triads is None else triads
    bits = np.array(list(itertools.product((0, 1), repeat=g.n)), dtype=np.int8).reshape(-1, g.n)
    ok = np.ones(len(bits), dtype=bool)
    for t in triads:
        ok &= bits[:, list(t)].sum(axis=1) == 1
    for i, j in g.edges:
        ok &= ~((bits[:, i] == 1) & (bits[:, j] == 1))
    return sorted(tuple(Color(int(c)) for c in row) for row in bits[ok])


def contextual_witness(g: OrthogonalityGraph, triads: Optional[Sequence] = None) -> list[int]:
    """Vertices shared by two or more triads."""
    triads = enumerate_triads(g) if triads is None else triads
    count = np.zeros(g.n, dtype=int)
    for t in triads:
        count[list(t)] += 1
    return np.flatnonzero(count >= 2).tolist()
