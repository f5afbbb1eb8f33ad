"""Degree statistics of PA graphs against their closed forms and bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .model import PaGraph, degrees_at, derive_seed, generate

__all__ = [
    "DegreeHistogram",
    "TheoryCurve",
    "DegreeLawCheck",
    "empirical_degree_counts",
    "expected_degree_counts_dp",
    "theory_degree_curve",
    "adjacency_bound",
    "degree_prob_bound",
    "binomial_stderr",
    "early_degree_collision_rate",
    "degree_samples",
    "tail_deviation_rate",
    "adjacency_rate",
    "degree_count_moments",
    "degree_law_rows",
    "degree_law_check",
    "degree_tail_shape",
    "write_degree_csv",
]

CSV_COLUMNS = ("t", "d", "empirical_mean", "empirical_stderr", "theory", "ratio")


@dataclass(frozen=True)
class DegreeHistogram:
    """``counts[d]`` vertices of degree ``d`` at time ``t`` (sparse)."""

    t: int
    m: int
    counts: dict[int, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())

    def degree_sum(self) -> int:
        return sum(d * c for d, c in self.counts.items())

    def check(self) -> bool:
        return (
            self.total() == self.t
            and self.degree_sum() == 2 * self.m * self.t - self.m
            and all(d >= self.m and c > 0 for d, c in self.counts.items())
        )


@dataclass(frozen=True)
class TheoryCurve:
    """``d -> 2m(m+1)t / (d(d+1)(d+2))``."""

    m: int

    def __call__(self, t: float, d):
        d = np.asarray(d, dtype=float)
        out = 2.0 * self.m * (self.m + 1) * t / (d * (d + 1) * (d + 2))
        return float(out) if out.ndim == 0 else out


def empirical_degree_counts(g: PaGraph, t: int) -> DegreeHistogram:
    deg = degrees_at(g, t)
    vals, cnt = np.unique(deg, return_counts=True)
    return DegreeHistogram(t, g.m, {int(d): int(c) for d, c in zip(vals, cnt)})


def expected_degree_counts_dp(t_max: int, d_max: int | None = None, m: int = 1) -> np.ndarray:
    """Exact ``E[N_{t,d}]`` for ``m = 1``; entry ``[t, d]`` for ``1 <= t <= t_max``.

    Runs in weight space, where vertex 1 starts at weight 2 and every
    weight-``w`` vertex is hit with probability ``w / 2t``.  Vertex 1's
    reported degree is its weight minus one, so its distribution is kept
    separately and shifted when writing the table.  Columns beyond
    ``d_max`` are dropped; mass only moves upward so the kept ones are exact.
    """
    if m != 1:
        raise ValueError("the exact recurrence covers m = 1 only; use degree_count_moments for m > 1")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if d_max is None:
        d_max = t_max + 1
    width = d_max + 2
    w = np.arange(width, dtype=float)
    others = np.zeros(width)
    root = np.zeros(width)
    root[2] = 1.0
    table = np.zeros((t_max + 1, d_max + 1))
    for t in range(1, t_max + 1):
        table[t] = others[: d_max + 1] + root[1 : d_max + 2]
        if t == t_max:
            break
        q = w / (2.0 * t)
        others = others * (1 - q) + np.r_[0.0, (others * q)[:-1]]
        root = root * (1 - q) + np.r_[0.0, (root * q)[:-1]]
        others[1] += 1.0
    return table


def theory_degree_curve(m: int, t: float, d: float) -> float:
    if d < 1 or t < 1:
        raise ValueError("need d >= 1 and t >= 1")
    return TheoryCurve(m)(t, d)


def adjacency_bound(m: int, v: int, w: int) -> float:
    """``5m (vw)^(-1/2) ln(3v/w)`` for ``w < v``."""
    if not w < v:
        raise ValueError("need w < v")
    return 5 * m / math.sqrt(v * w) * math.log(3 * v / w)


def degree_prob_bound(m: int, v: int, w: int, d: int) -> float:
    """``C(m+d-1, m-1) (1 - sqrt(w/v))^d``.

    Heuristic reference curve: the additive ``O(d / sqrt(vw))`` term has no
    explicit constant and is dropped, so this is not a certified bound.
    """
    if not w < v:
        raise ValueError("need w < v")
    if d < 0:
        raise ValueError("need d >= 0")
    return math.comb(m + d - 1, m - 1) * (1 - math.sqrt(w / v)) ** d


def binomial_stderr(rate: float, trials: int) -> float:
    return math.sqrt(rate * (1 - rate) / trials)


def _graphs(m, n, trials, seed, weight_mode):
    for i in range(trials):
        yield generate(m, n, derive_seed(seed, i), weight_mode)


def early_degree_collision_rate(
    m: int, n: int, trials: int, seed: int, exponent: float = 0.02, weight_mode=None
) -> float:
    """Fraction of graphs where two of the first ``ceil(n**exponent)`` vertices share a final degree."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    window = min(n, math.ceil(n**exponent))
    if window < 2:
        return 0.0
    hits = 0
    for g in _graphs(m, n, trials, seed, weight_mode):
        head = g.degrees[:window]
        hits += len(np.unique(head)) < window
    return hits / trials


def degree_samples(m: int, n: int, s: int, trials: int, seed: int, weight_mode=None) -> np.ndarray:
    """``deg_n(s)`` across independent graphs."""
    if not 1 <= s <= n:
        raise ValueError("need 1 <= s <= n")
    return np.array([g.degrees[s - 1] for g in _graphs(m, n, trials, seed, weight_mode)], dtype=np.int64)


def tail_deviation_rate(m: int, n: int, s: int, y: float, trials: int, seed: int, weight_mode=None) -> float:
    """Frequency of ``|deg_n(s) - mean| > y``, the mean taken across trials."""
    if not s < n:
        raise ValueError("need s < n")
    if y < 0:
        raise ValueError("need y >= 0")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    x = degree_samples(m, n, s, trials, seed, weight_mode).astype(float)
    return float(np.mean(np.abs(x - x.mean()) > y))


def adjacency_rate(m: int, n: int, v: int, w: int, trials: int, seed: int, weight_mode=None) -> tuple[float, float]:
    """Fraction of graphs in which ``v`` picked ``w`` at least once; with stderr."""
    if not 1 <= w < v <= n:
        raise ValueError("need 1 <= w < v <= n")
    hits = sum(bool(np.any(g.choices[v - 2] == w)) for g in _graphs(m, n, trials, seed, weight_mode))
    rate = hits / trials
    return rate, binomial_stderr(rate, trials)


def degree_count_moments(
    m: int, n: int, trials: int, seed: int, d_max: int, t: int | None = None, weight_mode=None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and stderr of ``N_{t,d}`` for ``d = 0..d_max`` over ``trials`` graphs."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    t = n if t is None else t
    rows = np.empty((trials, d_max + 1))
    for i, g in enumerate(_graphs(m, n, trials, seed, weight_mode)):
        deg = degrees_at(g, t)
        rows[i] = np.bincount(np.minimum(deg, d_max + 1), minlength=d_max + 2)[: d_max + 1]
    return rows.mean(axis=0), rows.std(axis=0, ddof=1) / math.sqrt(trials)


def degree_law_rows(m: int, n: int, trials: int, seed: int, d_max: int = 20, weight_mode=None) -> list[dict]:
    """One row per degree ``d = m..d_max`` in the CSV layout."""
    mean, se = degree_count_moments(m, n, trials, seed, d_max, weight_mode=weight_mode)
    curve = TheoryCurve(m)
    out = []
    for d in range(m, d_max + 1):
        th = curve(n, d)
        out.append(
            {
                "t": n,
                "d": d,
                "empirical_mean": float(mean[d]),
                "empirical_stderr": float(se[d]),
                "theory": th,
                "ratio": float(mean[d]) / th,
            }
        )
    return out


@dataclass(frozen=True)
class DegreeLawCheck:
    passed: bool
    worst_margin: float  # min over d of (allowed - |deviation|)
    rows: tuple[dict, ...]


def degree_law_check(m: int, n: int, trials: int, seed: int, d_max: int = 20, slack: float = 2.0, weight_mode=None) -> DegreeLawCheck:
    """``|mean N_{n,d} - theory| <= max(slack, 5 stderr)`` for ``m <= d <= d_max``."""
    rows = degree_law_rows(m, n, trials, seed, d_max, weight_mode)
    margins = [max(slack, 5 * r["empirical_stderr"]) - abs(r["empirical_mean"] - r["theory"]) for r in rows]
    worst = min(margins)
    return DegreeLawCheck(worst >= 0, worst, tuple(rows))


def degree_tail_shape(m: int, n: int, trials: int, seed: int, min_mean: float = 1.0, weight_mode=None) -> float:
    """``max_d mean N_{n,d} d^3 / n`` over ``d >= n^(1/15)``.

    Only degrees whose mean count is at least ``min_mean`` enter: beyond
    that a single observation of ``1 / trials`` dominates and says nothing
    about the expectation.
    """
    degs = [g.degrees for g in _graphs(m, n, trials, seed, weight_mode)]
    top = int(max(int(d.max()) for d in degs))
    mean = np.mean([np.bincount(d, minlength=top + 1) for d in degs], axis=0)
    d = np.arange(top + 1, dtype=float)
    keep = (d >= max(m, n ** (1 / 15))) & (mean >= min_mean)
    if not keep.any():
        return 0.0
    return float(np.max(mean[keep] * d[keep] ** 3 / n))


def write_degree_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
