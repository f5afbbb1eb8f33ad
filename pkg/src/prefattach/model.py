"""Preferential attachment multigraphs PA(m; n).

Vertex ``1`` starts with ``m`` self-loops.  Each later vertex ``t`` makes
``m`` choices among ``1 .. t-1`` with probability proportional to the
current degree, all ``m`` choices of a step being drawn from the degrees
frozen at the start of that step.

Sampling uses the classic flat endpoint array: every unit of sampling
weight is one slot, so a choice is a uniform index into the prefix of the
array that existed before the step began.  Slots written by earlier choices
are resolved by pointer jumping, which lets the whole graph be drawn with a
handful of vectorised passes.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "WeightMode",
    "PaGraph",
    "ChoiceSequence",
    "DegreeView",
    "Multigraph",
    "InadmissibleGraphError",
    "PagFormatError",
    "RNG_IDENTITY",
    "derive_seed",
    "make_rng",
    "generate",
    "degree_at",
    "degrees_at",
    "admissible_check",
    "encode_graph",
    "decode_graph",
]

#: Bit generator behind every seeded draw in format version ``pag v1``.
RNG_IDENTITY = f"numpy.random.PCG64 via SeedSequence (numpy {np.__version__.split('.')[0]}.x)"

_SEED_MASK = (1 << 64) - 1


class WeightMode(enum.Enum):
    """How vertex 1's self-loops enter the sampling weight."""

    #: loops weigh 2 each, so the normaliser at time t is exactly 2mt
    SELF_LOOP_DOUBLED = "d"
    #: weights equal reported degrees; normaliser 2mt - m
    PROPER_RENORMALIZED = "r"

    @classmethod
    def coerce(cls, value: "WeightMode | str | None") -> "WeightMode":
        if value is None:
            return cls.SELF_LOOP_DOUBLED
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        aliases = {
            "d": cls.SELF_LOOP_DOUBLED,
            "doubled": cls.SELF_LOOP_DOUBLED,
            "self_loop_doubled": cls.SELF_LOOP_DOUBLED,
            "selfloopdoubled": cls.SELF_LOOP_DOUBLED,
            "r": cls.PROPER_RENORMALIZED,
            "renormalized": cls.PROPER_RENORMALIZED,
            "proper_renormalized": cls.PROPER_RENORMALIZED,
            "properrenormalized": cls.PROPER_RENORMALIZED,
        }
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown weight mode {value!r}") from None

    def root_weight(self, m: int) -> int:
        """Initial sampling weight of vertex 1."""
        return 2 * m if self is WeightMode.SELF_LOOP_DOUBLED else m

    def normalizer(self, m: int, t: int) -> int:
        """Total sampling weight once vertices ``1..t`` are present."""
        return 2 * m * t if self is WeightMode.SELF_LOOP_DOUBLED else 2 * m * t - m


class InadmissibleGraphError(ValueError):
    """The multigraph could not have been produced by the PA process."""


class PagFormatError(ValueError):
    """Malformed ``pag v1`` stream."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def derive_seed(seed: int, trial: int) -> int:
    """Hash ``(seed, trial)`` into an independent 64-bit seed."""
    ss = np.random.SeedSequence([int(seed) & _SEED_MASK, int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & _SEED_MASK)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_mn(m: int, n: int) -> None:
    if int(m) != m or int(n) != n:
        raise TypeError("m and n must be integers")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def _validate_rows(rows: np.ndarray, m: int, n: int, *, sorted_rows: bool) -> None:
    if rows.shape != (n - 1, m):
        raise InadmissibleGraphError(f"expected choices of shape {(n - 1, m)}, got {rows.shape}")
    if rows.size == 0:
        return
    upper = np.arange(1, n, dtype=np.int64)[:, None]  # vertex t may target 1..t-1
    if rows.min() < 1 or np.any(rows > upper):
        bad = int(np.argwhere((rows < 1) | (rows > upper))[0][0]) + 2
        raise InadmissibleGraphError(f"vertex {bad} has a target outside 1..{bad - 1}")
    if sorted_rows and m > 1 and np.any(np.diff(rows, axis=1) < 0):
        raise InadmissibleGraphError("choice rows must be sorted ascending")


@dataclass(frozen=True, eq=False)
class ChoiceSequence:
    """Ordered choices: row ``t - 2`` holds the ``m`` picks of vertex ``t``."""

    m: int
    n: int
    ordered: np.ndarray

    def __post_init__(self) -> None:
        _check_mn(self.m, self.n)
        rows = np.array(self.ordered, dtype=np.int64).reshape(self.n - 1, self.m)
        _validate_rows(rows, self.m, self.n, sorted_rows=False)
        object.__setattr__(self, "ordered", _readonly(rows))

    def to_graph(self, weight_mode: WeightMode | str | None = None, seed: int | None = None) -> "PaGraph":
        return PaGraph(self.m, self.n, np.sort(self.ordered, axis=1), weight_mode, seed)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChoiceSequence):
            return NotImplemented
        return self.m == other.m and self.n == other.n and np.array_equal(self.ordered, other.ordered)

    __hash__ = None  # type: ignore[assignment]


class PaGraph:
    """An m-left regular labelled multigraph plus generation metadata.

    ``choices[t - 2]`` is the sorted multiset of targets picked by vertex
    ``t``.  Instances are immutable; the arrays are read-only.
    """

    __slots__ = ("m", "n", "choices", "weight_mode", "seed", "sequence", "_degrees")

    def __init__(
        self,
        m: int,
        n: int,
        choices: Iterable | np.ndarray | None = None,
        weight_mode: WeightMode | str | None = None,
        seed: int | None = None,
        sequence: ChoiceSequence | None = None,
    ):
        _check_mn(m, n)
        rows = np.zeros((0, m), dtype=np.int64) if choices is None else np.array(choices, dtype=np.int64)
        rows = rows.reshape(n - 1, m) if rows.size == (n - 1) * m else rows
        _validate_rows(rows, m, n, sorted_rows=True)
        if seed is not None and not 0 <= int(seed) <= _SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "choices", _readonly(rows))
        object.__setattr__(self, "weight_mode", WeightMode.coerce(weight_mode))
        object.__setattr__(self, "seed", None if seed is None else int(seed))
        object.__setattr__(self, "sequence", sequence)
        object.__setattr__(self, "_degrees", None)

    def __setattr__(self, name, value):
        raise AttributeError("PaGraph is immutable")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PaGraph):
            return NotImplemented
        return (
            self.m == other.m
            and self.n == other.n
            and self.weight_mode is other.weight_mode
            and self.seed == other.seed
            and np.array_equal(self.choices, other.choices)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        seed = "-" if self.seed is None else hex(self.seed)
        return f"PaGraph(m={self.m}, n={self.n}, mode={self.weight_mode.value}, seed={seed})"

    @property
    def degrees(self) -> np.ndarray:
        """Reported degrees ``deg_n(1..n)`` as a length-n array (index 0 is vertex 1)."""
        if self._degrees is None:
            deg = self.m + np.bincount(self.choices.ravel(), minlength=self.n + 1)[1:]
            object.__setattr__(self, "_degrees", _readonly(deg.astype(np.int64)))
        return self._degrees

    def targets(self, t: int) -> tuple[int, ...]:
        """Sorted choice multiset of vertex ``t`` (empty for vertex 1)."""
        if not 1 <= t <= self.n:
            raise IndexError(f"vertex {t} out of range 1..{self.n}")
        return () if t == 1 else tuple(int(x) for x in self.choices[t - 2])

    def edge_multiplicities(self) -> dict[tuple[int, int], int]:
        """``{(u, v): count}`` with ``u <= v``; the loop block is ``(1, 1)``."""
        edges: Counter = Counter({(1, 1): self.m})
        for t in range(2, self.n + 1):
            for w in self.choices[t - 2]:
                edges[(int(w), t)] += 1
        return dict(edges)

    def to_multigraph(self) -> "Multigraph":
        return Multigraph(self.n, self.edge_multiplicities())

    def view(self, t: int) -> "DegreeView":
        return DegreeView(self, t)

    @classmethod
    def from_multigraph(
        cls, g: "Multigraph", weight_mode: WeightMode | str | None = None, seed: int | None = None
    ) -> "PaGraph":
        """Recover the choice rows of an admissible multigraph.

        Raises :class:`InadmissibleGraphError` when ``g`` is not m-left regular.
        """
        m = g.loops(1)
        if not admissible_check(g, m):
            raise InadmissibleGraphError("multigraph is not admissible")
        rows = []
        for t in range(2, g.n + 1):
            row = []
            for w, mult in sorted(g.neighbors(t).items()):
                if w < t:
                    row.extend([w] * mult)
            rows.append(row)
        return cls(m, g.n, np.array(rows, dtype=np.int64).reshape(g.n - 1, m), weight_mode, seed)


class Multigraph:
    """Undirected labelled multigraph on ``1..n`` with edge multiplicities."""

    __slots__ = ("n", "edges", "_adj")

    def __init__(self, n: int, edges: Mapping[tuple[int, int], int] | Iterable[tuple[int, int]]):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = int(n)
        if isinstance(edges, Mapping):
            items = edges.items()
        else:
            items = Counter(tuple(e) for e in edges).items()
        norm: Counter = Counter()
        for (u, v), k in items:
            u, v = int(u), int(v)
            if not (1 <= u <= n and 1 <= v <= n):
                raise ValueError(f"edge ({u}, {v}) outside 1..{n}")
            if k < 0:
                raise ValueError("negative multiplicity")
            if k:
                norm[(min(u, v), max(u, v))] += int(k)
        self.edges = dict(norm)
        self._adj = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Multigraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Multigraph(n={self.n}, edges={self.edges})"

    def _adjacency(self) -> list[dict[int, int]]:
        if self._adj is None:
            adj: list[dict[int, int]] = [dict() for _ in range(self.n + 1)]
            for (u, v), k in self.edges.items():
                adj[u][v] = adj[u].get(v, 0) + k
                if u != v:
                    adj[v][u] = adj[v].get(u, 0) + k
            self._adj = adj
        return self._adj

    def neighbors(self, v: int) -> dict[int, int]:
        return self._adjacency()[v]

    def loops(self, v: int) -> int:
        return self.edges.get((v, v), 0)

    def adjacency_matrix(self) -> np.ndarray:
        """Symmetric count matrix; the diagonal holds loop counts."""
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for (u, v), k in self.edges.items():
            a[u - 1, v - 1] = k
            a[v - 1, u - 1] = k
        return a

    def relabel(self, perm: Mapping[int, int] | Iterable[int]) -> "Multigraph":
        """Apply ``v -> perm[v]``; a sequence is read as images of ``1..n``."""
        if not isinstance(perm, Mapping):
            perm = {i + 1: int(p) for i, p in enumerate(perm)}
        if sorted(perm.values()) != list(range(1, self.n + 1)) or len(perm) != self.n:
            raise ValueError("not a permutation of 1..n")
        return Multigraph(self.n, {(perm[u], perm[v]): k for (u, v), k in self.edges.items()})


class DegreeView:
    """Degrees ``deg_t(s)`` of every ``s <= t`` in the prefix graph ``G_t``."""

    def __init__(self, graph: PaGraph, t: int):
        if not 1 <= t <= graph.n:
            raise ValueError(f"time {t} outside 1..{graph.n}")
        self.graph = graph
        self.t = t
        self.degrees = _readonly(degrees_at(graph, t))

    def deg(self, s: int) -> int:
        if not 1 <= s <= self.t:
            raise ValueError(f"vertex {s} not present at time {self.t}")
        return int(self.degrees[s - 1])

    def dg(self, s: int) -> int:
        """Degree in excess of the initial ``m``."""
        return self.deg(s) - self.graph.m


def generate(
    m: int,
    n: int,
    seed: int,
    weight_mode: WeightMode | str | None = WeightMode.SELF_LOOP_DOUBLED,
) -> PaGraph:
    """Draw one graph from PA(m; n).

    Identical ``(m, n, seed, weight_mode)`` give identical graphs.  The
    ordered choices are kept on ``graph.sequence``.
    """
    _check_mn(m, n)
    if not 0 <= int(seed) <= _SEED_MASK:
        raise ValueError("seed must be a 64-bit unsigned integer")
    mode = WeightMode.coerce(weight_mode)
    if n == 1:
        empty = np.zeros((0, m), dtype=np.int64)
        return PaGraph(m, 1, empty, mode, seed, ChoiceSequence(m, 1, empty))

    rng = make_rng(seed)
    root = mode.root_weight(m)
    steps = n - 1
    # vertex t+1 sees the slots laid down by vertices 1..t
    live = root + 2 * m * np.arange(steps, dtype=np.int64)
    draws = rng.integers(0, np.repeat(live, m)).astype(np.int64)

    # slot layout: [root block][v2 picks][v2 x m][v3 picks][v3 x m] ...
    rel = draws - root
    in_root = rel < 0
    block = np.where(in_root, 0, rel // (2 * m))
    offset = np.where(in_root, 0, rel % (2 * m))
    own = ~in_root & (offset >= m)

    target = np.full(draws.shape, -1, dtype=np.int64)
    target[in_root] = 1
    target[own] = block[own] + 2
    pointer = np.where(in_root | own, -1, block * m + offset)

    pending = np.flatnonzero(target < 0)
    while pending.size:
        nxt = pointer[pending]
        resolved = target[nxt]
        done = resolved >= 0
        target[pending[done]] = resolved[done]
        still = pending[~done]
        pointer[still] = pointer[pointer[still]]
        pending = still

    ordered = target.reshape(steps, m)
    seq = ChoiceSequence(m, n, ordered)
    return PaGraph(m, n, np.sort(ordered, axis=1), mode, seed, seq)


def degrees_at(g: PaGraph, t: int) -> np.ndarray:
    """``deg_t(s)`` for ``s = 1..t`` (index 0 is vertex 1)."""
    if not 1 <= t <= g.n:
        raise ValueError(f"time {t} outside 1..{g.n}")
    counts = np.bincount(g.choices[: t - 1].ravel(), minlength=t + 1)[1 : t + 1]
    return g.m + counts.astype(np.int64)


def degree_at(g: PaGraph, t: int, s: int) -> int:
    """Degree of vertex ``s`` once vertex ``t`` has made its choices."""
    if not 1 <= t <= g.n:
        raise ValueError(f"time {t} outside 1..{g.n}")
    if not 1 <= s <= t:
        raise ValueError(f"vertex {s} is not present at time {t}")
    return g.m + int(np.count_nonzero(g.choices[s - 1 : t - 1] == s))


def admissible_check(g: PaGraph | Multigraph, m: int | None = None) -> bool:
    """True iff ``g`` is m-left regular with exactly ``m`` loops at vertex 1.

    ``m`` defaults to the loop count at vertex 1 (which must then be >= 1).
    """
    if isinstance(g, PaGraph):
        return m is None or m == g.m
    loops_at_1 = g.loops(1)
    if m is None:
        m = loops_at_1
    if m < 1 or loops_at_1 != m:
        return False
    down = [0] * (g.n + 1)
    for (u, v), k in g.edges.items():
        if u == v:
            if u != 1:
                return False
            continue
        down[v] += k  # keys are stored with u < v
    return all(down[t] == m for t in range(2, g.n + 1))


def encode_graph(g: PaGraph) -> bytes:
    """Serialise to the ``pag v1`` text format."""
    seed = "-" if g.seed is None else format(g.seed, "x")
    lines = [f"pag v1 m={g.m} n={g.n} mode={g.weight_mode.value} seed={seed}"]
    for t in range(2, g.n + 1):
        lines.append(f"{t}: " + " ".join(str(int(w)) for w in g.choices[t - 2]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_int(text: str, what: str, line: int) -> int:
    if not text.isdigit():
        raise PagFormatError(f"bad {what} {text!r}", line)
    return int(text)


def decode_graph(data: bytes | str) -> PaGraph:
    """Parse a ``pag v1`` stream; errors name the offending line."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    if "\r" in text:
        raise PagFormatError("CR characters are not allowed", None)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise PagFormatError("empty stream", 1)
    head = lines[0].split(" ")
    if len(head) < 2 or head[0] != "pag":
        raise PagFormatError("bad magic, expected 'pag'", 1)
    if head[1] != "v1":
        raise PagFormatError(f"unsupported version {head[1]!r}", 1)
    fields = {}
    for item in head[2:]:
        key, sep, value = item.partition("=")
        if not sep or key in fields:
            raise PagFormatError(f"bad header field {item!r}", 1)
        fields[key] = value
    if set(fields) != {"m", "n", "mode", "seed"}:
        raise PagFormatError("header needs exactly m=, n=, mode=, seed=", 1)
    m = _parse_int(fields["m"], "m", 1)
    n = _parse_int(fields["n"], "n", 1)
    if m < 1 or n < 1:
        raise PagFormatError("m and n must be positive", 1)
    if fields["mode"] not in ("d", "r"):
        raise PagFormatError(f"bad mode {fields['mode']!r}", 1)
    seed_text = fields["seed"]
    if seed_text == "-":
        seed = None
    else:
        try:
            seed = int(seed_text.removeprefix("0x"), 16)
        except ValueError:
            raise PagFormatError(f"bad seed {seed_text!r}", 1) from None
        if seed > _SEED_MASK:
            raise PagFormatError("seed exceeds 64 bits", 1)
    if len(lines) != n:
        raise PagFormatError(f"expected {n - 1} vertex lines, found {len(lines) - 1}", min(len(lines), n) + 1)

    rows = np.empty((n - 1, m), dtype=np.int64)
    for t in range(2, n + 1):
        lineno = t
        line = lines[t - 1]
        if line != line.rstrip(" \t"):
            raise PagFormatError("trailing whitespace", lineno)
        label, sep, rest = line.partition(": ")
        if not sep:
            raise PagFormatError("expected '<t>: <targets>'", lineno)
        if _parse_int(label, "vertex label", lineno) != t:
            raise PagFormatError(f"expected vertex {t}, got {label}", lineno)
        parts = rest.split(" ")
        if len(parts) != m:
            raise PagFormatError(f"vertex {t} lists {len(parts)} targets, header declares m={m}", lineno)
        targets = [_parse_int(p, "target", lineno) for p in parts]
        if any(b < a for a, b in zip(targets, targets[1:])):
            raise PagFormatError(f"targets of vertex {t} are not sorted ascending", lineno)
        if targets[0] < 1 or targets[-1] >= t:
            raise PagFormatError(f"vertex {t} has a target outside 1..{t - 1}", lineno)
        rows[t - 2] = targets
    return PaGraph(m, n, rows, fields["mode"], seed)

