"""Directed view of a PA graph: chooser -> chosen.

Levels follow the in-degree-0 convention: vertices nobody chose sit on
level 1, and ``level(w) = 1 + max(level(u))`` over the vertices ``u`` that
chose ``w``.  So ``level(w) - 1`` is the length of the longest chain of
choosers ``v_k -> ... -> v_1 -> w``, and "at level >= k" in the chain
sense means ``level(w) >= k + 1`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PaGraph, admissible_check, derive_seed, generate

__all__ = [
    "DagView",
    "LevelDecomposition",
    "GammaAdmResult",
    "dag_view",
    "levels",
    "high_level_count",
    "mean_high_level",
    "chain_length_threshold",
    "deep_level_threshold",
    "deep_vertex_violation_rate",
    "gamma_log_lower_bound",
    "brute_force_gamma_adm",
    "count_udags",
    "dag_trial_row",
]

BRUTE_FORCE_MAX_N = 7


@dataclass(frozen=True)
class DagView:
    """Edges ``(u, v, multiplicity)`` with ``u > v``; loops dropped."""

    n: int
    edges: tuple[tuple[int, int, int], ...]

    def out_neighbors(self, u: int) -> dict[int, int]:
        return {v: k for a, v, k in self.edges if a == u}


@dataclass(frozen=True)
class LevelDecomposition:
    level: np.ndarray  # level[v - 1]
    sizes: tuple[int, ...]

    def of(self, v: int) -> int:
        return int(self.level[v - 1])

    @property
    def depth(self) -> int:
        return len(self.sizes)


@dataclass(frozen=True)
class GammaAdmResult:
    gamma_count: int
    adm_count: int
    aut_order: int

    @property
    def identity_holds(self) -> bool:
        return self.gamma_count == self.adm_count * self.aut_order


def dag_view(g: PaGraph) -> DagView:
    edges = {}
    for t, row in enumerate(g.choices.tolist(), start=2):
        for w in row:
            edges[(t, w)] = edges.get((t, w), 0) + 1
    return DagView(g.n, tuple((u, v, k) for (u, v), k in sorted(edges.items())))


def levels(g: PaGraph) -> LevelDecomposition:
    """Level of every vertex, processing labels from ``n`` down to ``1``."""
    n = g.n
    lv = [1] * (n + 1)
    rows = g.choices.tolist()
    for u in range(n, 1, -1):
        up = lv[u] + 1
        for w in rows[u - 2]:
            if lv[w] < up:
                lv[w] = up
    level = np.array(lv[1:], dtype=np.int64)
    sizes = np.bincount(level)[1:]
    level.setflags(write=False)
    return LevelDecomposition(level, tuple(int(s) for s in sizes))


def high_level_count(g: PaGraph, eps: float, k: int) -> tuple[int, int]:
    """``(X, Y)``: vertices ending a chooser chain of length ``>= k``.

    ``X`` counts only vertices ``w > eps * n``; ``Y`` counts all of them.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if k < 1:
        raise ValueError("k must be a positive integer")
    lv = levels(g).level
    deep = lv >= k + 1
    labels = np.arange(1, g.n + 1)
    x = int(np.count_nonzero(deep & (labels > eps * g.n)))
    return x, int(np.count_nonzero(deep))


def mean_high_level(m: int, n: int, eps: float, k: int, trials: int, seed: int, weight_mode=None) -> tuple[float, float]:
    """Monte Carlo mean of ``X(eps, k)`` with its standard error."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    xs = np.array(
        [high_level_count(generate(m, n, derive_seed(seed, i), weight_mode), eps, k)[0] for i in range(trials)],
        dtype=float,
    )
    return float(xs.mean()), float(xs.std(ddof=1) / math.sqrt(trials))


def chain_length_threshold(m: int, eps: float) -> int:
    """Smallest integer ``k >= 15 (m / eps^2) ln(3 / eps)``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return math.ceil(15 * m / eps**2 * math.log(3 / eps))


def deep_level_threshold(m: int, delta: float) -> int:
    """``ceil(15 m / (2 delta^4) * ln(3 / (2 delta^2)))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(15 * m / (2 * delta**4) * math.log(3 / (2 * delta**2)))


def deep_vertex_violation_rate(
    m: int, n: int, delta: float, trials: int, seed: int, weight_mode=None
) -> tuple[float, float, int]:
    """Fraction of graphs with more than ``delta * n`` vertices below the first ``l`` levels.

    Returns ``(rate, binomial stderr, l)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ell = deep_level_threshold(m, delta)
    bad = 0
    for i in range(trials):
        lv = levels(generate(m, n, derive_seed(seed, i), weight_mode)).level
        bad += int(np.count_nonzero(lv > ell)) > delta * n
    rate = bad / trials
    return rate, math.sqrt(rate * (1 - rate) / trials), ell


def gamma_log_lower_bound(g: PaGraph) -> float:
    """``sum_j ln(|L_j|!)``: permuting within levels keeps the DAG class."""
    return math.fsum(math.lgamma(s + 1) for s in levels(g).sizes)


# ---------------------------------------------------------------------------
# brute force on small graphs


def _perms(n: int) -> np.ndarray:
    import itertools

    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def _relabelled(a: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Adjacency of ``pi(g)`` for every ``pi`` (row ``i`` of perms = images)."""
    inv = np.argsort(perms, axis=1)
    return a[inv[:, :, None], inv[:, None, :]]


def _admissible_mask(images: np.ndarray, m: int) -> np.ndarray:
    n = images.shape[1]
    diag = np.diagonal(images, axis1=1, axis2=2)
    want = np.zeros(n, dtype=images.dtype)
    want[0] = m
    ok = np.all(diag == want, axis=1)
    lower = np.tril(np.ones((n, n), dtype=bool), -1)
    down = np.where(lower[None], images, 0).sum(axis=2)
    return ok & np.all(down[:, 1:] == m, axis=1)


def _directed(images: np.ndarray) -> np.ndarray:
    n = images.shape[-1]
    return np.where(np.tril(np.ones((n, n), dtype=bool), -1), images, 0)


def _orbit_keys(d: np.ndarray, perms: np.ndarray) -> set[bytes]:
    rel = _relabelled(d, perms)
    return {row.tobytes() for row in rel.reshape(len(perms), -1)}


def _check_small(g: PaGraph) -> None:
    if g.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}")
    if not admissible_check(g):
        raise ValueError("graph must be admissible")


def brute_force_gamma_adm(g: PaGraph, restrict_to_udag: bool = True) -> GammaAdmResult:
    """Count relabellings that land back in the admissible set.

    ``gamma_count`` counts permutations ``pi`` with ``pi(g)`` admissible
    (and, when restricted, with ``DAG(pi(g))`` directed-isomorphic to
    ``DAG(g)``); ``adm_count`` counts the distinct labelled graphs reached.
    """
    _check_small(g)
    a = g.to_multigraph().adjacency_matrix()
    perms = _perms(g.n)
    images = _relabelled(a, perms)
    mask = _admissible_mask(images, g.m)
    if restrict_to_udag:
        orbit = _orbit_keys(_directed(a), perms)
        dirs = _directed(images).reshape(len(perms), -1)
        mask &= np.array([ok and dirs[i].tobytes() in orbit for i, ok in enumerate(mask)], dtype=bool)
    flat = images.reshape(len(perms), -1)
    reached = {flat[i].tobytes() for i in np.flatnonzero(mask)}
    aut = int(np.count_nonzero(np.all(images == a[None], axis=(1, 2))))
    return GammaAdmResult(int(np.count_nonzero(mask)), len(reached), aut)


def count_udags(g: PaGraph) -> int:
    """Directed-isomorphism classes of ``DAG(h)`` over admissible relabellings ``h`` of ``g``."""
    _check_small(g)
    a = g.to_multigraph().adjacency_matrix()
    perms = _perms(g.n)
    images = _relabelled(a, perms)
    mask = _admissible_mask(images, g.m)
    dirs = _directed(images[mask])
    seen: set[bytes] = set()
    classes = 0
    for d in {x.tobytes(): x for x in dirs}.values():
        if d.tobytes() in seen:
            continue
        classes += 1
        seen |= _orbit_keys(d, perms)
    return classes


def dag_trial_row(g: PaGraph, eps: float, k: int, head: int = 5) -> dict:
    """One CSV row: level summary, ``X``, ``Y`` and the level-factorial bound."""
    dec = levels(g)
    x, y = high_level_count(g, eps, k)
    row = {"n": g.n, "m": g.m, "seed": g.seed, "level_max": dec.depth}
    for j in range(head):
        row[f"size_{j + 1}"] = dec.sizes[j] if j < len(dec.sizes) else 0
    row.update({"X": x, "Y": y, "gamma_log_lb": math.fsum(math.lgamma(s + 1) for s in dec.sizes)})
    return row
