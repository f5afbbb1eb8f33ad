"""Automorphism groups of PA multigraphs and the two-property asymmetry certificate.

Two exact routes to ``|Aut(G)|``:

* :func:`brute_force_aut_order` tests every vertex bijection (n <= 10).
* :func:`aut_order` runs equitable colour refinement followed by an
  individualisation search along the leftmost path of the search tree.  At
  each level the orbit of the individualised vertex inside the pointwise
  stabiliser is found by searching for automorphisms, with orbits already
  known from earlier generators pruned.  The group order is the product of
  the orbit lengths (orbit-stabiliser theorem).

Edge multiplicities are preserved exactly; self-loops act as a vertex colour.
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ResourceBudgetError
from .model import Multigraph, PaGraph, derive_seed, generate

__all__ = [
    "AutMethod",
    "AutResult",
    "AutSearchBudgetError",
    "Verdict",
    "CertificateResult",
    "brute_force_aut_order",
    "aut_order",
    "check_property_A",
    "check_property_B",
    "default_k_candidates",
    "asymmetry_certificate",
    "symmetry_rate",
    "symmetry_record",
]

BRUTE_FORCE_MAX_N = 10
DEFAULT_NODE_BUDGET = 200_000


class AutSearchBudgetError(ResourceBudgetError):
    """The individualisation search exceeded its node budget."""


class AutMethod(enum.Enum):
    BRUTE_FORCE = "BruteForce"
    REFINEMENT = "Refinement"


class Verdict(enum.Enum):
    CERTIFIED_ASYMMETRIC = "CertifiedAsymmetric"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class AutResult:
    """``order = |Aut(G)|``; generators are tuples of images of ``1..n``."""

    order: int
    generators: tuple[tuple[int, ...], ...]
    method: AutMethod

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("order must be positive")
        if (self.order == 1) != (len(self.generators) == 0):
            raise ValueError("order is 1 exactly when there are no generators")


@dataclass(frozen=True)
class CertificateResult:
    verdict: Verdict
    k_used: int
    witness: tuple[str, tuple[int, int]] | None = None
    tried: tuple[int, ...] = field(default=())

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED_ASYMMETRIC


# ---------------------------------------------------------------------------
# graph preparation


class _Graph:
    """0-indexed adjacency lists of a multigraph, loops held as a colour."""

    __slots__ = ("n", "adj", "adjd", "loops", "degree")

    def __init__(self, g: PaGraph | Multigraph):
        if isinstance(g, PaGraph):
            n = g.n
            adjd: list[dict[int, int]] = [dict() for _ in range(n)]
            rows = g.choices.tolist()
            for t, row in enumerate(rows, start=1):  # 0-indexed vertex t
                for w in row:
                    w -= 1
                    adjd[t][w] = adjd[t].get(w, 0) + 1
                    adjd[w][t] = adjd[w].get(t, 0) + 1
            loops = [0] * n
            loops[0] = g.m
        else:
            n = g.n
            adjd = [dict() for _ in range(n)]
            loops = [0] * n
            for (u, v), k in g.edges.items():
                u -= 1
                v -= 1
                if u == v:
                    loops[u] += k
                else:
                    adjd[u][v] = adjd[u].get(v, 0) + k
                    adjd[v][u] = adjd[v].get(u, 0) + k
        self.n = n
        self.adjd = adjd
        self.adj = [list(d.items()) for d in adjd]
        self.loops = loops
        self.degree = [sum(d.values()) for d in adjd]

    def is_automorphism(self, gamma: Sequence[int]) -> bool:
        loops, adjd = self.loops, self.adjd
        for u in range(self.n):
            gu = gamma[u]
            if loops[u] != loops[gu]:
                return False
            du = adjd[gu]
            if len(du) != len(self.adj[u]):
                return False
            for v, k in self.adj[u]:
                if du.get(gamma[v]) != k:
                    return False
        return True


# ---------------------------------------------------------------------------
# brute force


def _permutation_blocks(n: int, block: int = 200_000):
    it = itertools.permutations(range(n))
    while True:
        chunk = list(itertools.islice(it, block))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)


def _all_automorphisms(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    found = []
    for perms in _permutation_blocks(n):
        image = a[perms[:, :, None], perms[:, None, :]]
        ok = np.all(image == a[None, :, :], axis=(1, 2))
        found.append(perms[ok])
    return np.concatenate(found) if found else np.zeros((1, n), dtype=np.intp)


def _transversal_generators(autos: np.ndarray) -> list[tuple[int, ...]]:
    """Coset representatives along the stabiliser chain of 0, 1, 2, ...

    Their union generates the whole group.
    """
    n = autos.shape[1]
    gens = []
    current = autos
    for i in range(n):
        if len(current) <= 1:
            break
        images = current[:, i]
        for b in np.unique(images):
            if b == i:
                continue
            rep = current[np.argmax(images == b)]
            gens.append(tuple(int(x) + 1 for x in rep))
        current = current[images == i]
    return gens


def brute_force_aut_order(g: PaGraph | Multigraph) -> AutResult:
    """Exact ``|Aut(g)|`` by testing all ``n!`` bijections (``n <= 10``)."""
    if g.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}; use aut_order")
    mg = g.to_multigraph() if isinstance(g, PaGraph) else g
    autos = _all_automorphisms(mg.adjacency_matrix())
    gens = _transversal_generators(autos)
    return AutResult(len(autos), tuple(gens), AutMethod.BRUTE_FORCE)


# ---------------------------------------------------------------------------
# partition refinement


class _Partition:
    """Ordered partition in the usual ``lab``/``cell`` array layout.

    ``lab`` lists the vertices cell by cell, ``pos`` inverts ``lab``,
    ``cell[v]`` is the start index of v's cell and ``end[s]`` the
    exclusive end of the cell starting at ``s``.
    """

    __slots__ = ("lab", "pos", "cell", "end", "ncells")

    def __init__(self, lab, pos, cell, end, ncells):
        self.lab = lab
        self.pos = pos
        self.cell = cell
        self.end = end
        self.ncells = ncells

    def copy(self) -> "_Partition":
        return _Partition(self.lab[:], self.pos[:], self.cell[:], self.end[:], self.ncells)

    @property
    def discrete(self) -> bool:
        return self.ncells == len(self.lab)

    def cell_members(self, start: int) -> list[int]:
        return self.lab[start : self.end[start]]

    def target_cell(self) -> int:
        """Start of the first largest non-singleton cell."""
        best, best_size = -1, 1
        i, n, end = 0, len(self.lab), self.end
        while i < n:
            size = end[i] - i
            if size > best_size:
                best, best_size = i, size
            i = end[i]
        return best


def _initial_partition(G: _Graph) -> tuple[_Partition, list[int], tuple]:
    n = G.n
    keys = [(G.loops[v], G.degree[v]) for v in range(n)]
    lab = sorted(range(n), key=lambda v: (keys[v], v))
    pos = [0] * n
    for i, v in enumerate(lab):
        pos[v] = i
    cell = [0] * n
    end = [0] * n
    starts = []
    shape = []
    i = 0
    while i < n:
        j = i
        while j < n and keys[lab[j]] == keys[lab[i]]:
            cell[lab[j]] = i
            j += 1
        end[i] = j
        starts.append(i)
        shape.append((keys[lab[i]], j - i))
        i = j
    return _Partition(lab, pos, cell, end, len(starts)), starts, tuple(shape)


def _refine(G: _Graph, p: _Partition, active: list[int]) -> int:
    """Refine ``p`` in place to the coarsest equitable refinement.

    Returns a hash of the splitting trace, which depends only on the
    labelled-partition structure and so is invariant under isomorphism.
    """
    adj = G.adj
    lab, pos, cell, end = p.lab, p.pos, p.cell, p.end
    queued = set(active)
    queue = deque(active)
    trace = []
    while queue:
        s = queue.popleft()
        queued.discard(s)
        count: dict[int, int] = {}
        for i in range(s, end[s]):
            for u, k in adj[lab[i]]:
                count[u] = count.get(u, 0) + k
        if not count:
            continue
        bycell: dict[int, list[int]] = {}
        for u in count:
            c = cell[u]
            if end[c] - c > 1:
                bycell.setdefault(c, []).append(u)
        for c in sorted(bycell):
            touched = bycell[c]
            ce = end[c]
            size = ce - c
            if len(touched) == size:
                first = count[touched[0]]
                if all(count[u] == first for u in touched):
                    continue
            # move touched vertices to the tail of the cell
            j = ce
            for u in touched:
                j -= 1
                pu, other = pos[u], lab[j]
                lab[pu], lab[j] = other, u
                pos[other], pos[u] = pu, j
            touched.sort(key=count.__getitem__)
            for i, u in enumerate(touched, start=j):
                lab[i] = u
                pos[u] = i
            frags = []
            if j > c:
                frags.append((c, j, 0))
            i = j
            while i < ce:
                val = count[lab[i]]
                k = i
                while k < ce and count[lab[k]] == val:
                    k += 1
                frags.append((i, k, val))
                i = k
            for fs, fe, _ in frags:
                end[fs] = fe
                if fs != c:
                    for i in range(fs, fe):
                        cell[lab[i]] = fs
            p.ncells += len(frags) - 1
            trace.append((s, c, tuple((val, fe - fs) for fs, fe, val in frags)))
            if c in queued:
                add = [fs for fs, _, _ in frags if fs != c]
            else:
                largest = max(frags, key=lambda f: f[1] - f[0])[0]
                add = [fs for fs, _, _ in frags if fs != largest]
            for fs in add:
                if fs not in queued:
                    queued.add(fs)
                    queue.append(fs)
    return hash(tuple(trace))


def _individualize(G: _Graph, p: _Partition, v: int) -> int:
    """Split ``v`` off as a singleton at the tail of its cell and refine."""
    c = p.cell[v]
    ce = p.end[c]
    last = ce - 1
    lab, pos = p.lab, p.pos
    pv, other = pos[v], lab[last]
    lab[pv], lab[last] = other, v
    pos[other], pos[v] = pv, last
    p.end[c] = last
    p.end[last] = ce
    p.cell[v] = last
    p.ncells += 1
    return hash((c, _refine(G, p, [last])))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


@dataclass
class _Level:
    partition: _Partition  # refined partition before individualising ``v``
    start: int
    v: int
    trace: int  # trace of individualise-and-refine with ``v``


class _Search:
    def __init__(self, G: _Graph, budget: int):
        self.G = G
        self.budget = budget
        self.nodes = 0

    def _tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise AutSearchBudgetError(f"automorphism search exceeded {self.budget} nodes")

    def first_path(self, p: _Partition) -> tuple[list[_Level], list[int]]:
        path = []
        while not p.discrete:
            self._tick()
            start = p.target_cell()
            v = min(p.cell_members(start))
            saved = p.copy()
            tr = _individualize(self.G, p, v)
            path.append(_Level(saved, start, v, tr))
        return path, p.lab[:]

    def find_mapping(self, path: list[_Level], depth: int, w: int, leaf: list[int]) -> list[int] | None:
        """An automorphism fixing the level-``depth`` partition and sending ``v`` to ``w``."""
        level = path[depth]
        p = level.partition.copy()
        self._tick()
        if _individualize(self.G, p, w) != level.trace:
            return None
        return self._descend(path, depth + 1, p, leaf)

    def _descend(self, path, depth, p, leaf):
        if depth == len(path):
            if not p.discrete:
                return None
            gamma = [0] * len(leaf)
            for a, b in zip(leaf, p.lab):
                gamma[a] = b
            return gamma if self.G.is_automorphism(gamma) else None
        level = path[depth]
        start = level.start
        if p.end[start] - start != level.partition.end[start] - start:
            return None
        members = sorted(p.cell_members(start))
        for idx, u in enumerate(members):
            self._tick()
            q = p if idx == len(members) - 1 else p.copy()
            if _individualize(self.G, q, u) != level.trace:
                continue
            gamma = self._descend(path, depth + 1, q, leaf)
            if gamma is not None:
                return gamma
        return None


def aut_order(g: PaGraph | Multigraph, node_budget: int = DEFAULT_NODE_BUDGET) -> AutResult:
    """Exact ``|Aut(g)|`` by refinement and individualisation.

    Raises :class:`AutSearchBudgetError` rather than guessing when the
    search tree exceeds ``node_budget`` nodes.
    """
    G = _Graph(g)
    if G.n == 1:
        return AutResult(1, (), AutMethod.REFINEMENT)
    p, starts, _ = _initial_partition(G)
    _refine(G, p, starts)
    search = _Search(G, node_budget)
    path, leaf = search.first_path(p)

    uf = _UnionFind(G.n)
    gens: list[list[int]] = []
    order = 1
    for depth in range(len(path) - 1, -1, -1):
        level = path[depth]
        members = sorted(level.partition.cell_members(level.start))
        v = level.v
        rejected: list[int] = []
        for w in members:
            if w == v:
                continue
            rw = uf.find(w)
            if rw == uf.find(v) or any(uf.find(x) == rw for x in rejected):
                continue
            gamma = search.find_mapping(path, depth, w, leaf)
            if gamma is None:
                rejected.append(w)
                continue
            gens.append(gamma)
            for a, b in enumerate(gamma):
                uf.union(a, b)
        rv = uf.find(v)
        order *= sum(1 for w in members if uf.find(w) == rv)

    generators = tuple(tuple(b + 1 for b in gamma) for gamma in gens)
    return AutResult(order, generators, AutMethod.REFINEMENT)


# ---------------------------------------------------------------------------
# the asymmetry certificate


def check_property_A(g: PaGraph, k: int, degree_filter: bool = False) -> tuple[bool, tuple[int, int] | None]:
    """No two vertices ``k < t1 < t2`` made the same multiset of choices.

    Returns ``(holds, witness)`` where the witness is the lexicographically
    first violating pair.  With ``degree_filter`` only pairs of equal final
    degree count; the certificate stays sound because an automorphism
    mapping ``t1`` to ``t2`` preserves degree.
    """
    if not 0 <= k < g.n:
        raise ValueError(f"k must lie in [0, {g.n})")
    first: dict[tuple, list[int]] = {}
    rows = g.choices.tolist()
    deg = g.degrees.tolist()
    for t in range(max(k + 1, 2), g.n + 1):
        key = (tuple(rows[t - 2]), deg[t - 1]) if degree_filter else tuple(rows[t - 2])
        bucket = first.setdefault(key, [])
        if len(bucket) < 2:
            bucket.append(t)
    pairs = [tuple(b) for b in first.values() if len(b) == 2]
    if not pairs:
        return True, None
    return False, min(pairs)


def check_property_B(g: PaGraph, k: int) -> tuple[bool, tuple[int, int] | None]:
    """Every vertex ``s <= k`` has a degree shared by no other vertex."""
    if not 0 <= k <= g.n:
        raise ValueError(f"k must lie in [0, {g.n}]")
    deg = g.degrees
    for s in range(1, k + 1):
        same = np.flatnonzero(deg == deg[s - 1]) + 1
        others = same[same != s]
        if others.size:
            return False, (s, int(others[0])) if others[0] > s else (int(others[0]), s)
    return True, None


def default_k_candidates(n: int) -> list[int]:
    base = math.ceil(n**0.01)
    return sorted({k for k in (base, 8, 16, 32) if 0 <= k < n}) or [0]


def asymmetry_certificate(
    g: PaGraph, k_candidates: Sequence[int] | None = None, degree_filter: bool = False
) -> CertificateResult:
    """Certify ``|Aut(g)| = 1`` when both properties hold at some threshold.

    Sound for every ``k``: property B pins ``1..k`` and property A then
    forbids a smallest moved vertex.  Returns ``Unknown`` with the witness
    from the last threshold tried otherwise.
    """
    if k_candidates is None:
        k_candidates = default_k_candidates(g.n)
    ks = list(k_candidates)
    if not ks:
        raise ValueError("k_candidates must be non-empty")
    for k in ks:
        if not 0 <= k < g.n:
            raise ValueError(f"threshold {k} outside [0, {g.n})")
    witness = None
    for k in ks:
        ok_b, wit_b = check_property_B(g, k)
        ok_a, wit_a = check_property_A(g, k, degree_filter)
        if ok_a and ok_b:
            return CertificateResult(Verdict.CERTIFIED_ASYMMETRIC, k, None, tuple(ks))
        witness = ("A", wit_a) if not ok_a else ("B", wit_b)
    return CertificateResult(Verdict.UNKNOWN, ks[-1], witness, tuple(ks))


# ---------------------------------------------------------------------------
# rates


def _is_symmetric(g: PaGraph, method: str, k_candidates, degree_filter: bool = False) -> bool:
    if method == "exact":
        return aut_order(g).order > 1
    if method == "certificate":
        return not asymmetry_certificate(g, k_candidates, degree_filter).certified
    raise ValueError(f"unknown method {method!r}; use 'exact' or 'certificate'")


def symmetry_rate(
    m: int,
    n: int,
    trials: int,
    seed: int,
    method: str = "exact",
    weight_mode=None,
    k_candidates: Sequence[int] | None = None,
    degree_filter: bool = False,
) -> tuple[float, float]:
    """Fraction of sampled graphs that are symmetric (``exact``) or uncertified.

    Returns ``(rate, binomial standard error)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = 0
    for i in range(trials):
        g = generate(m, n, derive_seed(seed, i), weight_mode)
        hits += _is_symmetric(g, method, k_candidates, degree_filter)
    rate = hits / trials
    return rate, math.sqrt(rate * (1 - rate) / trials)


def symmetry_record(
    g: PaGraph, method: str = "exact", k_candidates=None, timing: bool = False, degree_filter: bool = False
) -> dict:
    """JSON-ready summary of one graph."""
    t0 = time.perf_counter()
    rec: dict = {"m": g.m, "n": g.n, "seed": g.seed, "method": method}
    if method == "exact":
        rec["aut_order"] = aut_order(g).order
        rec["k_used"] = None
        rec["witness"] = None
    elif method == "certificate":
        cert = asymmetry_certificate(g, k_candidates, degree_filter)
        rec["verdict"] = cert.verdict.value
        rec["k_used"] = cert.k_used
        rec["witness"] = None if cert.witness is None else {"property": cert.witness[0], "pair": list(cert.witness[1])}
    else:
        raise ValueError(f"unknown method {method!r}")
    if timing:
        rec["elapsed_ms"] = round((time.perf_counter() - t0) * 1000, 3)
    return rec
