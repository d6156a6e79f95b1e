"""Exact ground-state censuses: brute-force minimization on V_n and periodic coloring counts.

Search spaces are indexed by base-q integers (first position most significant),
split into contiguous ranges, scanned in numpy batches and merged by addition,
so every count is independent of the number of workers.
"""
import logging
import multiprocessing as mp
import os
import time
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import comb, factorial

from errors import BudgetExceededError, DomainError, InvalidSpecError, RegimeError
from periodic_subgroups import SubgroupSpec, coset_balls, label_text
from spin_config import (
    ModelParams,
    SpinConfiguration,
    ball_positions,
    ball_target,
    batch_u_values,
    interior_ball_family,
    is_ground_state,
    parse_rational,
)
from tree_group import volume

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 100_000_000
DEFAULT_CHUNK_SIZE = 262_144
DEFAULT_MINIMIZER_LIMIT = 1000
# state indices are int64 inside numpy
INDEX_LIMIT = 2 ** 62
JSON_SAFE_INT = 2 ** 53
SCALAR_CHECK_SAMPLE = 32


class CensusResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: str
    parameters: Dict[str, Any]
    states_examined: int = 0
    workers: int = 1
    min_energy: Optional[Fraction] = None
    minimizer_count: Optional[int] = None
    vertex_order: List[str] = []
    minimizers: List[List[int]] = []
    minimizers_truncated: bool = False
    periodic_count: Optional[int] = None
    graph_count: Optional[int] = None
    formula_count: Optional[int] = None
    formula_ratio: Optional[Fraction] = None
    distinct_restrictions: Optional[int] = None
    agreement: Dict[str, bool] = {}
    wall_time_seconds: float = 0.0

    @property
    def internal_disagreements(self) -> List[str]:
        return [name for name, ok in self.agreement.items() if not ok and not name.startswith("formula_")]

    @property
    def formula_disagreements(self) -> List[str]:
        return [name for name, ok in self.agreement.items() if not ok and name.startswith("formula_")]

    def to_payload(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "mode": self.mode,
            "parameters": self.parameters,
            "states_examined": _json_int(self.states_examined),
            "workers": self.workers,
        }
        if self.mode == "exhaustive":
            payload.update({
                "min_energy": str(self.min_energy),
                "minimizer_count": _json_int(self.minimizer_count),
                "vertex_order": self.vertex_order,
                "minimizers": self.minimizers,
                "minimizers_truncated": self.minimizers_truncated,
            })
        else:
            payload.update({
                "periodic_count": _json_int(self.periodic_count),
                "graph_count": _json_int(self.graph_count),
                "formula_count": _json_int(self.formula_count),
                "formula_ratio": None if self.formula_ratio is None else str(self.formula_ratio),
                "distinct_restrictions": _json_int(self.distinct_restrictions),
            })
        payload["agreement"] = dict(sorted(self.agreement.items()))
        return payload


def _json_int(value: Optional[int]) -> Any:
    if value is None:
        return None
    return value if abs(value) < JSON_SAFE_INT else str(value)


def injective_ball_count(q: int, k: int) -> int:
    """C(q, k+2)·(k+2)!: ordered choices of distinct spins for a unit ball"""
    if q < 2 or k < 1:
        raise DomainError(f"Formula needs q >= 2 and k >= 1, got q={q}, k={k}")
    return int(comb(q, k + 2, exact=True)) * int(factorial(k + 2, exact=True))


def theorem2_formula(q: int, k: int) -> int:
    """Closed-form count the J < 0 periodic census is compared against"""
    return injective_ball_count(q, k)


def cooccurrence_differences(spec: SubgroupSpec) -> FrozenSet[int]:
    """Label differences p⊕p' of two cosets sharing a label-level unit ball"""
    vectors = spec.generator_vectors
    differences = set(vectors)
    for i, left in enumerate(vectors):
        for right in vectors[i + 1:]:
            differences.add(left ^ right)
    return frozenset(differences)


def constraint_graph(m: int, differences: Iterable[int]) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(1 << m))
    for p in range(1 << m):
        for d in differences:
            if d:
                graph.add_edge(p, p ^ d)
    return graph


def count_proper_colorings(graph: nx.Graph, q: int) -> int:
    """Backtracking count; once the uncolored vertices are pairwise non-adjacent the rest is a product"""
    order = sorted(graph.nodes, key=lambda v: (-graph.degree(v), v))
    position = {v: i for i, v in enumerate(order)}
    earlier = [[position[u] for u in graph.neighbors(v) if position[u] < i] for i, v in enumerate(order)]
    size = len(order)
    tail_start = size
    for i in range(size - 1, -1, -1):
        if any(position[u] > i for u in graph.neighbors(order[i])):
            break
        tail_start = i
    assigned = [0] * size

    def extend(i: int) -> int:
        if i == size:
            return 1
        if i >= tail_start:
            total = 1
            for j in range(i, size):
                total *= q - len({assigned[p] for p in earlier[j]})
            return total
        used = {assigned[p] for p in earlier[i]}
        total = 0
        for color in range(1, q + 1):
            if color in used:
                continue
            assigned[i] = color
            total += extend(i + 1)
        assigned[i] = 0
        return total

    return extend(0)


def partition_ranges(total: int, parts: int) -> List[Tuple[int, int]]:
    """Balanced split of range(total) into `parts` contiguous half-open ranges"""
    parts = max(1, parts)
    return [(total * i // parts, total * (i + 1) // parts) for i in range(parts)]


def _decode(indices: np.ndarray, q: int, width: int) -> np.ndarray:
    """Base-q digits of each index, first column most significant, shifted to spins 1..q"""
    digits = np.empty((indices.size, width), dtype=np.int16)
    rest = indices.copy()
    for col in range(width - 1, -1, -1):
        digits[:, col] = rest % q
        rest //= q
    return digits + 1


def _scan_exhaustive(task: Dict[str, Any]) -> Dict[str, Any]:
    positions = task["positions"]
    targets = task["targets"]
    q, width, maximize = task["q"], task["width"], task["maximize"]
    bound_sum, limit, chunk = task["bound_sum"], task["limit"], task["chunk_size"]
    best: Optional[int] = None
    count = 0
    listed: List[int] = []
    passed_total = 0
    mismatches = 0
    for lo in range(task["start"], task["stop"], chunk):
        hi = min(lo + chunk, task["stop"])
        indices = np.arange(lo, hi, dtype=np.int64)
        u = batch_u_values(_decode(indices, q, width), positions)
        sums = u.sum(axis=1)
        passed = (u == targets).all(axis=1)
        passed_total += int(np.count_nonzero(passed))
        mismatches += int(np.count_nonzero(passed != (sums == bound_sum)))
        chunk_best = int(sums.max() if maximize else sums.min())
        if best is None or (chunk_best > best if maximize else chunk_best < best):
            best, count, listed = chunk_best, 0, []
        if chunk_best == best:
            hits = indices[sums == best]
            count += int(hits.size)
            room = limit - len(listed)
            if room > 0:
                listed.extend(int(i) for i in hits[:room])
    return {
        "best": best,
        "count": count,
        "listed": listed,
        "passed": passed_total,
        "mismatches": mismatches,
    }


def _scan_colorings(task: Dict[str, Any]) -> Dict[str, Any]:
    balls = task["balls"]
    home = balls[0]
    q, width, constant, chunk = task["q"], task["width"], task["constant"], task["chunk_size"]
    weights = q ** np.arange(len(home) - 1, -1, -1, dtype=np.int64)
    count = 0
    restrictions: set = set()
    for lo in range(task["start"], task["stop"], chunk):
        hi = min(lo + chunk, task["stop"])
        colors = _decode(np.arange(lo, hi, dtype=np.int64), q, width)
        gathered = colors[:, balls]
        if constant:
            ok = (gathered == gathered[:, :, :1]).all(axis=(1, 2))
        else:
            ok = (np.diff(np.sort(gathered, axis=2), axis=2) != 0).all(axis=(1, 2))
        count += int(np.count_nonzero(ok))
        if ok.any():
            codes = (colors[ok][:, home].astype(np.int64) - 1) @ weights
            restrictions.update(int(c) for c in np.unique(codes))
    return {"count": count, "restrictions": sorted(restrictions)}


def _merge_exhaustive(partials: List[Dict[str, Any]], maximize: bool, limit: int) -> Dict[str, Any]:
    """Fold partition results into the result a single scan over their union would give"""
    best_values = [p["best"] for p in partials if p["best"] is not None]
    best = (max(best_values) if maximize else min(best_values)) if best_values else None
    count = 0
    listed: List[int] = []
    for partial in partials:
        if best is not None and partial["best"] == best:
            count += partial["count"]
            listed.extend(partial["listed"])
    return {
        "best": best,
        "count": count,
        "listed": listed[:limit],
        "passed": sum(p["passed"] for p in partials),
        "mismatches": sum(p["mismatches"] for p in partials),
    }


def _merge_colorings(partials: List[Dict[str, Any]]) -> Dict[str, Any]:
    restrictions: set = set()
    for partial in partials:
        restrictions.update(partial["restrictions"])
    return {"count": sum(p["count"] for p in partials), "restrictions": sorted(restrictions)}


class CensusEngine:
    def __init__(
        self,
        budget: Optional[int] = None,
        workers: Optional[int] = None,
        chunk_size: Optional[int] = None,
        minimizer_limit: Optional[int] = None,
    ):
        self.budget = budget if budget is not None else int(os.environ.get("CENSUS_BUDGET", DEFAULT_BUDGET))
        self.workers = workers if workers is not None else int(os.environ.get("CENSUS_WORKERS", 1))
        self.chunk_size = chunk_size if chunk_size is not None else int(
            os.environ.get("CENSUS_CHUNK_SIZE", DEFAULT_CHUNK_SIZE)
        )
        self.minimizer_limit = minimizer_limit if minimizer_limit is not None else int(
            os.environ.get("CENSUS_MINIMIZER_LIMIT", DEFAULT_MINIMIZER_LIMIT)
        )
        if self.workers < 1 or self.chunk_size < 1:
            raise DomainError(f"Workers and chunk size must be positive, got {self.workers}, {self.chunk_size}")

    def _check_budget(self, required: int) -> None:
        if required > self.budget or required > INDEX_LIMIT:
            logger.error(f"❌ Refusing enumeration of {required} states (budget {self.budget})")
            raise BudgetExceededError(required, self.budget)

    def _run(self, scan, base_task: Dict[str, Any], total: int) -> List[Dict[str, Any]]:
        ranges = partition_ranges(total, self.workers)
        tasks = [dict(base_task, start=lo, stop=hi, chunk_size=self.chunk_size) for lo, hi in ranges]
        logger.info(f"🔄 Scanning {total} states in {len(tasks)} partitions with {self.workers} worker(s)")
        if self.workers == 1:
            return [scan(task) for task in tasks]
        with mp.Pool(processes=self.workers) as pool:
            return pool.map(scan, tasks)

    def exhaustive_min_energy(self, params: ModelParams, n: int) -> CensusResult:
        """Minimize H over all q^|V_n| configurations and cross-check the minimizers against the checker"""
        started = time.perf_counter()
        family = interior_ball_family(n, params)
        if family.empty:
            raise DomainError(f"V_{n} holds no ball of radius {params.r_prime}; need n >= {params.r_prime}")
        support = volume(n, params.tree)
        width = len(support)
        required = params.q ** width
        self._check_budget(required)

        ball_len = len(family.balls[0])
        target = ball_target(ball_len, params)
        targets = np.full(len(family.balls), target, dtype=np.int64)
        bound_sum = int(targets.sum())
        base_task = {
            "positions": ball_positions(family, support),
            "targets": targets,
            "q": params.q,
            "width": width,
            "maximize": params.J > 0,
            "bound_sum": bound_sum,
            "limit": self.minimizer_limit,
        }
        partials = self._run(_scan_exhaustive, base_task, required)

        merged = _merge_exhaustive(partials, params.J > 0, self.minimizer_limit)
        best, count, listed = merged["best"], merged["count"], merged["listed"]
        minimizers = _decode(np.array(listed, dtype=np.int64), params.q, width).tolist() if listed else []
        mismatches, passed = merged["mismatches"], merged["passed"]

        scalar_ok = True
        for spins in minimizers[:SCALAR_CHECK_SAMPLE]:
            config = SpinConfiguration(k=params.k, q=params.q, values=dict(zip(support.members, spins)))
            scalar_ok = scalar_ok and is_ground_state(config, params, n)[0]

        agreement = {
            "checker_equals_minimizers": mismatches == 0 and best == bound_sum and passed == count,
            "scalar_checker_on_minimizers": scalar_ok,
        }
        if params.J > 0:
            agreement["formula_constant_ground_states"] = count == params.q and all(
                len(set(spins)) == 1 for spins in minimizers
            )
        min_energy = -params.J * best
        logger.info(f"📊 Minimum energy {min_energy} reached by {count} configuration(s)")
        return CensusResult(
            mode="exhaustive",
            parameters={
                "k": params.k, "r": params.r, "q": params.q, "J": str(params.J), "n": n,
                "volume_size": width, "ball_count": len(family.balls), "ball_size": ball_len,
                "ball_target": target, "budget": _json_int(self.budget),
            },
            states_examined=required,
            workers=self.workers,
            min_energy=min_energy,
            minimizer_count=count,
            vertex_order=support.texts(),
            minimizers=minimizers,
            minimizers_truncated=count > len(minimizers),
            agreement=agreement,
            wall_time_seconds=time.perf_counter() - started,
        )

    def count_periodic_ground_states(self, spec: SubgroupSpec, q: int, J: Any) -> CensusResult:
        """Count coset colorings whose periodic configuration meets every unit-ball target (r = 2)"""
        started = time.perf_counter()
        coupling = parse_rational(J)
        if coupling == 0:
            raise DomainError("Coupling J must be nonzero")
        if q < 2:
            raise DomainError(f"Need q >= 2, got q={q}")
        if not spec.is_valid:
            raise InvalidSpecError(f"Generator vectors {spec.vector_texts} are not distinct and nonzero")
        if not spec.is_full_index:
            raise InvalidSpecError(f"Generator vectors {spec.vector_texts} do not span; index is below 2^{spec.m}")
        positive = coupling > 0
        if not positive and q < spec.k + 2:
            raise RegimeError(
                f"J < 0 census needs q >= k+2 = {spec.k + 2} so every unit ball can be injective; got q={q}"
            )
        width = 1 << spec.m
        required = q ** width
        self._check_budget(required)

        balls = np.array(coset_balls(spec), dtype=np.int64)
        partials = self._run(
            _scan_colorings,
            {"balls": balls, "q": q, "width": width, "constant": positive},
            required,
        )
        merged = _merge_colorings(partials)
        periodic_count = merged["count"]
        restrictions = set(merged["restrictions"])

        graph_count = self.count_by_constraint_graph(spec, q, positive=positive)
        formula_count = q if positive else theorem2_formula(q, spec.k)
        ratio = Fraction(periodic_count, formula_count) if formula_count else None
        agreement = {
            "enumeration_vs_graph": periodic_count == graph_count,
            "formula_vs_enumeration": periodic_count == formula_count,
            "formula_vs_ball_restrictions": len(restrictions) == formula_count,
        }
        if ratio is not None and ratio != 1:
            logger.warning(
                f"⚠️ Enumerated {periodic_count} colorings, formula gives {formula_count} (ratio {ratio})"
            )
        logger.info(f"📊 {periodic_count} periodic ground states, {len(restrictions)} distinct unit-ball restrictions")
        return CensusResult(
            mode="periodic",
            parameters={
                "k": spec.k, "m": spec.m, "q": q, "J": str(coupling), "r": 2,
                "generator_vectors": spec.vector_texts, "labels": width, "budget": _json_int(self.budget),
            },
            states_examined=required,
            workers=self.workers,
            periodic_count=periodic_count,
            graph_count=graph_count,
            formula_count=formula_count,
            formula_ratio=ratio,
            distinct_restrictions=len(restrictions),
            agreement=agreement,
            wall_time_seconds=time.perf_counter() - started,
        )

    def count_by_constraint_graph(
        self,
        spec: SubgroupSpec,
        q: int,
        positive: bool = False,
        differences: Optional[Sequence[int]] = None,
    ) -> int:
        """Second counting method on the label graph with edges {p, p⊕d}, d in D

        For J < 0 a coloring counts iff it is proper; for J > 0 iff it is constant
        on each connected component.
        """
        if differences is None:
            if not spec.is_valid:
                raise InvalidSpecError(f"Generator vectors {spec.vector_texts} are not distinct and nonzero")
            differences = sorted(cooccurrence_differences(spec))
        graph = constraint_graph(spec.m, differences)
        if positive:
            return q ** nx.number_connected_components(graph)
        count = count_proper_colorings(graph, q)
        logger.info(
            f"📊 Constraint graph on {graph.number_of_nodes()} labels, {graph.number_of_edges()} edges: "
            f"{count} proper {q}-colorings"
        )
        return count


def difference_texts(differences: Iterable[int], m: int) -> List[str]:
    return [label_text(d, m) for d in sorted(differences)]
