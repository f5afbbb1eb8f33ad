"""Brute-force oracle suites and a small desk-scale report, shared by the CLI."""

from __future__ import annotations

import math

from . import dag, degrees, entropy, symmetry
from .model import PaGraph, derive_seed, generate

__all__ = ["admissible_graphs", "run_oracles", "desk_report"]

NORMALIZATION_LIMIT = 10**6


def admissible_graphs(m: int, n: int):
    """Every admissible labelled graph as a :class:`PaGraph`."""
    for rows in entropy.enumerate_admissible(m, n):
        for r in rows:
            yield PaGraph(m, n, r)


def _aut_suite(max_n: int) -> dict:
    cases = [(1, n) for n in range(1, min(max_n, 7) + 1)] + [(2, n) for n in range(1, min(max_n, 6) + 1)]
    checked = mismatches = unsound = 0
    for m, n in cases:
        for g in admissible_graphs(m, n):
            bf = symmetry.brute_force_aut_order(g).order
            checked += 1
            mismatches += symmetry.aut_order(g).order != bf
            unsound += symmetry.asymmetry_certificate(g).certified and bf != 1
    return {
        "suite": "aut_equivalence",
        "passed": mismatches == 0 and unsound == 0,
        "detail": f"{checked} graphs, {mismatches} order mismatches, {unsound} unsound certificates",
    }


def _normalization_suite(max_n: int) -> dict:
    worst, cases = 0.0, 0
    for m in range(1, max_n + 1):
        for n in range(1, max_n + 1):
            if entropy.admissible_count(m, n) > NORMALIZATION_LIMIT:
                break
            for mode in ("d", "r"):
                worst = max(worst, abs(entropy.total_probability(m, n, mode) - 1.0))
                cases += 1
    return {"suite": "normalization", "passed": worst <= 1e-10, "detail": f"{cases} (m, n, mode) cases, worst |sum - 1| = {worst:.3e}"}


def _gamma_suite(max_n: int) -> dict:
    cases = [(1, n) for n in range(1, min(max_n, 6) + 1)] + [(2, n) for n in range(1, min(max_n, 5) + 1)]
    checked = bad = 0
    for m, n in cases:
        for g in admissible_graphs(m, n):
            res = dag.brute_force_gamma_adm(g)
            checked += 1
            bad += not res.identity_holds or dag.gamma_log_lower_bound(g) > math.log(res.gamma_count) + 1e-12
    return {"suite": "gamma_adm_aut", "passed": bad == 0, "detail": f"{checked} graphs, {bad} failures"}


def run_oracles(max_n: int = 6) -> list[dict]:
    if max_n < 1:
        raise ValueError("max_n must be positive")
    return [_aut_suite(max_n), _normalization_suite(max_n), _gamma_suite(max_n)]


def desk_report(seed: int, trials: int = 20) -> dict:
    """A quick pass over every experiment at small sizes."""
    rep: dict = {"seed": seed, "trials": trials}
    rep["constant_A"] = {str(m): entropy.constant_A(m) for m in (1, 2, 3)}
    sym = {}
    for m, n in ((1, 100), (2, 200), (3, 100), (3, 1000)):
        rate, se = symmetry.symmetry_rate(m, n, trials, derive_seed(seed, 1))
        sym[f"m={m},n={n}"] = {"rate": rate, "stderr": se}
    rep["symmetry"] = sym
    n = 1024
    mc = entropy.mc_entropy(1, n, max(trials, 2), derive_seed(seed, 2))
    rep["entropy_m1_n1024"] = {
        "mc": mc.value,
        "stderr": mc.stderr,
        "stated": entropy.asymptotic_entropy(1, n, "stated"),
        "rederived": entropy.asymptotic_entropy(1, n, "rederived"),
    }
    check = degrees.degree_law_check(2, 10**4, max(trials, 2), derive_seed(seed, 3))
    rep["degree_law_m2_n1e4"] = {"passed": check.passed, "worst_margin": check.worst_margin}
    rate, se, ell = dag.deep_vertex_violation_rate(3, 1000, 0.3, trials, derive_seed(seed, 4))
    rep["deep_vertices_m3_n1e3"] = {"rate": rate, "stderr": se, "ell": ell}
    g = generate(3, 1000, derive_seed(seed, 5))
    rep["levels_m3_n1e3_sizes_head"] = list(dag.levels(g).sizes[:5])
    return rep
