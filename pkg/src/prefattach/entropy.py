"""Labelled-graph entropy of PA(m; n): exact, Monte Carlo and asymptotic.

All values are in nats.  ``P(G = g)`` is computed sequentially: at every
step the ``m`` picks are i.i.d. from frozen weights, so the probability of
the chosen multiset is the multinomial coefficient times the product of
the per-pick probabilities.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dag import levels
from .errors import ResourceBudgetError
from .model import (
    ChoiceSequence,
    InadmissibleGraphError,
    PaGraph,
    WeightMode,
    admissible_check,
    derive_seed,
    generate,
)
from .symmetry import asymmetry_certificate, aut_order

__all__ = [
    "EntropyMethod",
    "EntropyEstimate",
    "BracketComponents",
    "StructuralBracket",
    "log_prob_sequence",
    "log_prob_graph",
    "log_prob_batch",
    "admissible_count",
    "enumerate_admissible",
    "total_probability",
    "exact_entropy",
    "mc_entropy",
    "constant_A",
    "constant_A_enclosure",
    "entropy_constant",
    "asymptotic_entropy",
    "structural_entropy_estimate",
]

DEFAULT_ENUM_BUDGET = 10**7
DEFAULT_A_TERMS = 10**9
_CHUNK_CELLS = 4_000_000  # rows x steps x labels held at once during enumeration


class EntropyMethod(enum.Enum):
    EXACT = "Exact"
    MONTE_CARLO = "MonteCarlo"
    ASYMPTOTIC = "Asymptotic"


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    stderr: float
    samples: int
    method: EntropyMethod

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.method is EntropyMethod.EXACT and self.stderr != 0:
            raise ValueError("exact estimates carry no stderr")


@dataclass(frozen=True)
class BracketComponents:
    h_g: EntropyEstimate
    gamma_log_lb_mean: float
    log_factorial_n: float
    aut_log_mean: float
    certified_fraction: float


@dataclass(frozen=True)
class StructuralBracket:
    """Bounds on the entropy of the unlabelled graph, in nats."""

    lower: float
    upper: float
    components: BracketComponents

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# probability of a single graph


def _slot_log_weights(rows: np.ndarray, m: int, mode: WeightMode) -> tuple[np.ndarray, np.ndarray]:
    """Log weight of every pick under frozen step weights.

    Returns ``(log_w, run_lengths)`` where ``run_lengths`` are the sizes of
    the ``(step, target)`` groups, used for the multinomial correction.
    """
    steps, _ = rows.shape
    flat = rows.ravel()
    step = np.repeat(np.arange(steps), m)
    order = np.lexsort((step, flat))
    w, s = flat[order], step[order]
    new_target = np.r_[True, w[1:] != w[:-1]]
    new_run = new_target | np.r_[True, s[1:] != s[:-1]]
    idx = np.arange(flat.size)
    target_start = np.maximum.accumulate(np.where(new_target, idx, 0))
    run_start = np.maximum.accumulate(np.where(new_run, idx, 0))
    prior = run_start - target_start  # picks of w made in earlier steps
    base = np.where(w == 1, mode.root_weight(m), m)
    log_w = np.log((base + prior).astype(float))
    runs = np.diff(np.r_[np.flatnonzero(new_run), flat.size])
    return log_w, runs


def _log_normalizers(m: int, n: int, mode: WeightMode) -> float:
    return math.fsum(math.log(mode.normalizer(m, t)) for t in range(1, n))


def log_prob_sequence(seq: ChoiceSequence, weight_mode: WeightMode | str | None = None) -> float:
    """``ln P`` of the ordered choice sequence."""
    mode = WeightMode.coerce(weight_mode)
    if seq.n == 1:
        return 0.0
    log_w, _ = _slot_log_weights(seq.ordered, seq.m, mode)
    return float(math.fsum(log_w) - seq.m * _log_normalizers(seq.m, seq.n, mode))


def log_prob_graph(g: PaGraph, weight_mode: WeightMode | str | None = None) -> float:
    """``ln P(G = g)``; the graph's own weight mode is used when none is given."""
    if not isinstance(g, PaGraph):
        raise TypeError("log_prob_graph expects a PaGraph")
    if not admissible_check(g):
        raise InadmissibleGraphError("graph has probability zero")
    mode = g.weight_mode if weight_mode is None else WeightMode.coerce(weight_mode)
    m, n = g.m, g.n
    if n == 1:
        return 0.0
    log_w, runs = _slot_log_weights(g.choices, m, mode)
    multinomial = (n - 1) * math.lgamma(m + 1) - math.fsum(math.lgamma(r + 1) for r in runs if r > 1)
    return float(math.fsum(log_w) - m * _log_normalizers(m, n, mode) + multinomial)


def log_prob_batch(rows: np.ndarray, m: int, weight_mode: WeightMode | str | None = None) -> np.ndarray:
    """``ln P(G = g)`` for a stack of sorted choice arrays of shape ``(B, n - 1, m)``.

    Works on cumulative one-hot counts; memory is ``B * (n - 1) * (n + 1)``.
    """
    mode = WeightMode.coerce(weight_mode)
    rows = np.asarray(rows, dtype=np.int64)
    b, steps, mm = rows.shape
    if mm != m:
        raise ValueError("last axis must have length m")
    if steps == 0:
        return np.zeros(b)
    n = steps + 1
    hits = np.zeros((b, steps, n + 1), dtype=np.int32)
    bi = np.repeat(np.arange(b), steps * m)
    si = np.tile(np.repeat(np.arange(steps), m), b)
    np.add.at(hits, (bi, si, rows.ravel()), 1)
    prior = np.cumsum(hits, axis=1) - hits
    base = np.full(n + 1, m, dtype=np.int64)
    base[1] = mode.root_weight(m)
    weight = base[rows] + np.take_along_axis(prior, rows, axis=2)
    lg = np.array([math.lgamma(k + 1) for k in range(m + 1)])
    multinomial = steps * lg[m] - lg[hits].sum(axis=(1, 2))
    return np.log(weight).sum(axis=(1, 2)) - m * _log_normalizers(m, n, mode) + multinomial


# ---------------------------------------------------------------------------
# exhaustive enumeration


def _step_options(m: int, n: int) -> list[np.ndarray]:
    return [
        np.array(list(itertools.combinations_with_replacement(range(1, t), m)), dtype=np.int64).reshape(-1, m)
        for t in range(2, n + 1)
    ]


def admissible_count(m: int, n: int) -> int:
    """``prod_{t=2..n} C(t - 1 + m - 1, m)``."""
    return math.prod(math.comb(t + m - 2, m) for t in range(2, n + 1))


def enumerate_admissible(m: int, n: int, budget: int = DEFAULT_ENUM_BUDGET, chunk: int | None = None) -> Iterator[np.ndarray]:
    """Yield every admissible graph as sorted choice arrays, in chunks.

    Order is lexicographic over the per-step multisets.  Raises
    :class:`ResourceBudgetError` before any work when the count exceeds
    ``budget``.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    total = admissible_count(m, n)
    if total > budget:
        raise ResourceBudgetError(f"{total} admissible graphs exceed the enumeration budget {budget}")
    opts = _step_options(m, n)
    if not opts:
        yield np.zeros((1, 0, m), dtype=np.int64)
        return
    radices = [len(o) for o in opts]
    if chunk is None:
        chunk = max(1, _CHUNK_CELLS // ((n - 1) * (n + 1) * m))
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        out = np.empty((idx.size, n - 1, m), dtype=np.int64)
        rem = idx
        for step in range(n - 2, -1, -1):  # last step varies fastest
            rem, digit = np.divmod(rem, radices[step])
            out[:, step, :] = opts[step][digit]
        yield out


def _enumerated_log_probs(m: int, n: int, weight_mode, budget: int) -> Iterator[np.ndarray]:
    for rows in enumerate_admissible(m, n, budget):
        yield log_prob_batch(rows, m, weight_mode)


def total_probability(m: int, n: int, weight_mode: WeightMode | str | None = None, budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """``sum_g P(G = g)`` over all admissible graphs (should be 1)."""
    return math.fsum(math.fsum(np.exp(lp)) for lp in _enumerated_log_probs(m, n, weight_mode, budget))


def exact_entropy(m: int, n: int, weight_mode: WeightMode | str | None = None, budget: int = DEFAULT_ENUM_BUDGET) -> EntropyEstimate:
    """``-sum_g P(g) ln P(g)`` by full enumeration."""
    parts = [math.fsum(-np.exp(lp) * lp) for lp in _enumerated_log_probs(m, n, weight_mode, budget)]
    return EntropyEstimate(max(0.0, math.fsum(parts)), 0.0, admissible_count(m, n), EntropyMethod.EXACT)


# ---------------------------------------------------------------------------
# Monte Carlo


def mc_entropy(m: int, n: int, samples: int, seed: int, weight_mode: WeightMode | str | None = None) -> EntropyEstimate:
    """Sample mean of ``-ln P(G)`` with its standard error."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    vals = np.array([-log_prob_graph(generate(m, n, derive_seed(seed, i), weight_mode)) for i in range(samples)])
    return EntropyEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), samples, EntropyMethod.MONTE_CARLO)


# ---------------------------------------------------------------------------
# the constant A and the asymptotic formula


def _cutoff(tol: float) -> int:
    """Smallest ``D >= 3`` with ``(ln D + 1) / D <= tol``."""
    ok = lambda d: (math.log(d) + 1) / d <= tol  # noqa: E731
    hi = 3
    while not ok(hi):
        hi *= 2
    lo = max(3, hi // 2)
    if ok(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


@functools.lru_cache(maxsize=64)
def constant_A_enclosure(m: int, tol: float = 1e-6, max_terms: int = DEFAULT_A_TERMS) -> tuple[float, float]:
    """Interval ``[lo, hi]`` containing ``sum_{d >= m} ln d / ((d + 1)(d + 2))``.

    The tail beyond ``D`` is below ``int_D^inf ln x / x^2 dx = (ln D + 1) / D``
    since ``ln x / x^2`` decreases for ``x >= 3``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    pad = 1e-13  # rounding in the partial sum
    d_max = max(_cutoff(tol - 2 * pad if tol > 4 * pad else tol / 2), m)
    if d_max - m > max_terms:
        raise ResourceBudgetError(f"tol={tol} needs {d_max - m} terms, budget is {max_terms}")
    block = 1 << 20
    parts = []
    for start in range(m, d_max + 1, block):
        d = np.arange(start, min(d_max + 1, start + block), dtype=float)
        parts.append(float(np.sum(np.log(d) / ((d + 1) * (d + 2)))))
    partial = math.fsum(parts)
    return partial - pad, partial + (math.log(d_max) + 1) / d_max + pad


def constant_A(m: int, tol: float = 1e-6, max_terms: int = DEFAULT_A_TERMS) -> float:
    """Midpoint of :func:`constant_A_enclosure`."""
    lo, hi = constant_A_enclosure(m, tol, max_terms)
    return 0.5 * (lo + hi)


def entropy_constant(m: int, form: str = "stated", tol: float = 1e-6) -> float:
    """Coefficient of ``n`` in the asymptotic entropy.

    ``"stated"``: ``m (ln 2m - 1 - ln m! - A)``.
    ``"rederived"``: ``m ln 2m - m - m (m + 1) A - ln m!``, which keeps the
    ``(m + 1)`` factor of the expected degree profile and a single
    ``ln m!`` for the within-step ordering.
    """
    a = constant_A(m, tol)
    if form == "stated":
        return m * (math.log(2 * m) - 1 - math.lgamma(m + 1) - a)
    if form == "rederived":
        return m * math.log(2 * m) - m - m * (m + 1) * a - math.lgamma(m + 1)
    raise ValueError(f"unknown form {form!r}")


def asymptotic_entropy(m: int, n: int, form: str = "stated") -> float:
    """``m n ln n + c(m) n`` with the o(n) remainder dropped."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    return m * n * math.log(n) + entropy_constant(m, form) * n


# ---------------------------------------------------------------------------
# structural bracket


def structural_entropy_estimate(
    m: int,
    n: int,
    samples: int,
    seed: int,
    weight_mode: WeightMode | str | None = None,
    k_candidates=None,
) -> StructuralBracket:
    """Bracket the entropy of the isomorphism class of ``G``.

    Uses ``H(S(G)) = H(G) - H(sigma | sigma(G)) + E ln|Aut(G)|`` with
    ``H(sigma | sigma(G))`` bracketed by the mean level-factorial sum from
    below and ``ln n!`` from above.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    h, gam, aut, certified = [], [], [], 0
    for i in range(samples):
        g = generate(m, n, derive_seed(seed, i), weight_mode)
        h.append(-log_prob_graph(g))
        gam.append(math.fsum(math.lgamma(s + 1) for s in levels(g).sizes))
        if asymmetry_certificate(g, k_candidates).certified:
            certified += 1
            aut.append(0.0)
        else:
            aut.append(math.log(aut_order(g).order))
    h_arr = np.array(h)
    h_est = EntropyEstimate(float(h_arr.mean()), float(h_arr.std(ddof=1) / math.sqrt(samples)), samples, EntropyMethod.MONTE_CARLO)
    gamma_mean = math.fsum(gam) / samples
    aut_mean = math.fsum(aut) / samples
    log_nfact = math.lgamma(n + 1)
    comps = BracketComponents(h_est, gamma_mean, log_nfact, aut_mean, certified / samples)
    return StructuralBracket(h_est.value - log_nfact + aut_mean, h_est.value - gamma_mean + aut_mean, comps)
