"""Spin configurations on V_n, the generalized Kronecker energy and the ground-state checker."""
import logging
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from errors import DomainError, InvalidSpinError, MissingVertexError, ParameterMismatchError
from tree_group import TreeParams, VertexSet, Word, ball, parse_word, volume

logger = logging.getLogger(__name__)


def parse_rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise DomainError(f"Coupling must be exact; pass {value!r} as a string like '3/2'")
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise DomainError(f"Cannot read {value!r} as a rational number") from None


def parse_int(value: Any, field: str) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise DomainError(f"Field {field} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DomainError(f"Field {field} must be an integer, got {value!r}") from None


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(ge=1)
    r: int = Field(ge=1)
    q: int = Field(ge=2)
    J: Fraction

    @field_validator("J", mode="before")
    @classmethod
    def _exact_coupling(cls, value: Any) -> Fraction:
        coupling = parse_rational(value)
        if coupling == 0:
            raise DomainError("Coupling J must be nonzero")
        return coupling

    @field_serializer("J")
    def _coupling_text(self, value: Fraction) -> str:
        return str(value)

    @property
    def r_prime(self) -> int:
        return (self.r + 1) // 2

    @property
    def tree(self) -> TreeParams:
        return TreeParams(k=self.k)


class SpinConfiguration(BaseModel):
    """Spins from {1..q} on a finite support of the tree"""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    q: int = Field(ge=2)
    values: Dict[Word, int]

    @model_validator(mode="after")
    def _spins_in_range(self) -> "SpinConfiguration":
        for word, spin in self.values.items():
            if word.k != self.k:
                raise ParameterMismatchError(f"Vertex '{word}' lives on k={word.k}, configuration on k={self.k}")
            if not 1 <= spin <= self.q:
                raise InvalidSpinError(spin, self.q, where=str(word))
        return self

    @property
    def support(self) -> VertexSet:
        return VertexSet(members=tuple(self.values))

    def spin_of(self, word: Word) -> int:
        try:
            return self.values[word]
        except KeyError:
            raise MissingVertexError(word) from None

    def with_spin(self, word: Word, spin: int) -> "SpinConfiguration":
        values = dict(self.values)
        values[word] = spin
        return SpinConfiguration(k=self.k, q=self.q, values=values)


class BallFamily(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    radius: int
    centers: Tuple[Word, ...] = ()
    balls: Tuple[VertexSet, ...] = ()
    empty: bool = False


class BallReport(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    center: Word
    vertices: VertexSet
    u_value: int
    target: int
    passed: bool = Field(alias="pass")

    def to_payload(self) -> Dict[str, Any]:
        return {
            "center": str(self.center),
            "vertices": self.vertices.texts(),
            "u_value": self.u_value,
            "target": self.target,
            "pass": self.passed,
        }


def kronecker_u(spins: Sequence[int], q: int) -> int:
    """|A| minus the number of distinct spin values on A"""
    if len(spins) == 0:
        raise DomainError("Generalized Kronecker symbol needs at least one spin")
    for spin in spins:
        if not 1 <= spin <= q:
            raise InvalidSpinError(spin, q)
    return len(spins) - len(set(spins))


def u_extremes(ball_size: int, q: int) -> Tuple[int, int]:
    if ball_size < 1:
        raise DomainError(f"Ball size must be positive, got {ball_size}")
    return ball_size - min(ball_size, q), ball_size - 1


def ball_target(ball_size: int, params: ModelParams) -> int:
    """Per-ball U value that minimizes -J·U: the maximum for J > 0, the minimum for J < 0"""
    u_min, u_max = u_extremes(ball_size, params.q)
    return u_max if params.J > 0 else u_min


def interior_ball_family(n: int, params: ModelParams) -> BallFamily:
    """Balls of radius r' centred at every x with |x| <= n - r', so each lies inside V_n"""
    if n < 0:
        raise DomainError(f"Volume radius must be non-negative, got {n}")
    tree = params.tree
    radius = params.r_prime
    if n < radius:
        logger.warning(f"⚠️ V_{n} holds no ball of radius {radius}; family is empty")
        return BallFamily(n=n, radius=radius, empty=True)
    centers = volume(n - radius, tree).members
    return BallFamily(
        n=n,
        radius=radius,
        centers=centers,
        balls=tuple(ball(center, radius, tree) for center in centers),
    )


def _require_support(config: SpinConfiguration, params: ModelParams, n: int) -> None:
    if config.k != params.k:
        raise ParameterMismatchError(f"Configuration is on k={config.k}, model on k={params.k}")
    if config.q != params.q:
        raise ParameterMismatchError(f"Configuration uses q={config.q}, model uses q={params.q}")
    for word in volume(n, params.tree):
        if word not in config.values:
            raise MissingVertexError(word)


def _ball_spins(config: SpinConfiguration, vertices: VertexSet) -> List[int]:
    return [config.values[word] for word in vertices]


def hamiltonian(config: SpinConfiguration, params: ModelParams, n: int) -> Fraction:
    """-J times the sum of U over the balls wholly inside V_n (free boundary)"""
    _require_support(config, params, n)
    family = interior_ball_family(n, params)
    total = sum(kronecker_u(_ball_spins(config, vertices), params.q) for vertices in family.balls)
    return -params.J * total


def is_ground_state(
    config: SpinConfiguration, params: ModelParams, n: int
) -> Tuple[bool, List[BallReport]]:
    _require_support(config, params, n)
    family = interior_ball_family(n, params)
    reports = []
    for center, vertices in zip(family.centers, family.balls):
        u_value = kronecker_u(_ball_spins(config, vertices), params.q)
        target = ball_target(len(vertices), params)
        reports.append(BallReport(
            center=center, vertices=vertices, u_value=u_value, target=target, passed=u_value == target
        ))
    # failing balls first, canonical center order within each group
    reports.sort(key=lambda report: report.passed)
    passed = all(report.passed for report in reports)
    logger.debug(f"📊 Checked {len(reports)} balls in V_{n}: {'pass' if passed else 'fail'}")
    return passed, reports


def ground_state_bound(params: ModelParams, n: int) -> Fraction:
    """-J times the summed per-ball targets; the energy of any configuration passing the checker"""
    family = interior_ball_family(n, params)
    return -params.J * sum(ball_target(len(vertices), params) for vertices in family.balls)


def energy_delta(
    config: SpinConfiguration, params: ModelParams, n: int, vertex: Word, new_spin: int
) -> Fraction:
    """Change of H when `vertex` takes `new_spin`, summed over the balls containing it"""
    _require_support(config, params, n)
    if not 1 <= new_spin <= params.q:
        raise InvalidSpinError(new_spin, params.q, where=str(vertex))
    family = interior_ball_family(n, params)
    delta = 0
    for vertices in family.balls:
        if vertex not in vertices:
            continue
        before = _ball_spins(config, vertices)
        after = [new_spin if word == vertex else config.values[word] for word in vertices]
        delta += kronecker_u(after, params.q) - kronecker_u(before, params.q)
    return -params.J * delta


def constant_configuration(support: VertexSet, spin: int, q: int, k: int) -> SpinConfiguration:
    return SpinConfiguration(k=k, q=q, values={word: spin for word in support})


def ball_positions(family: BallFamily, support: VertexSet) -> np.ndarray:
    """Ball membership as column indices into a spins matrix ordered like `support`"""
    if family.empty or not family.balls:
        return np.zeros((0, 1), dtype=np.int64)
    return np.array(
        [[support.index_of(word) for word in vertices] for vertices in family.balls],
        dtype=np.int64,
    )


def batch_u_values(spins: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """U of every ball for every row of `spins`; returns shape (rows, balls)"""
    rows = spins.shape[0]
    if positions.shape[0] == 0:
        return np.zeros((rows, 0), dtype=np.int64)
    gathered = np.sort(spins[:, positions], axis=2)
    distinct = 1 + np.count_nonzero(np.diff(gathered, axis=2), axis=2)
    return positions.shape[1] - distinct


def configuration_payload(config: SpinConfiguration, params: ModelParams, n: int) -> Dict[str, Any]:
    return {
        "k": params.k,
        "r": params.r,
        "q": params.q,
        "J": str(params.J),
        "n": n,
        "values": {str(word): spin for word, spin in sorted(config.values.items(), key=lambda item: item[0].sort_key)},
    }


def configuration_from_payload(
    payload: Mapping[str, Any], J: Optional[Any] = None
) -> Tuple[SpinConfiguration, ModelParams, int]:
    """Read the JSON form; `J` overrides the stored coupling when given"""
    if not isinstance(payload, Mapping):
        raise DomainError("Configuration JSON must be an object")
    try:
        params = ModelParams(
            k=payload["k"],
            r=payload.get("r", 2),
            q=payload["q"],
            J=J if J is not None else payload["J"],
        )
        n = parse_int(payload["n"], "n")
        raw_values = payload["values"]
    except KeyError as e:
        raise DomainError(f"Configuration JSON lacks field {e}") from None
    if not isinstance(raw_values, Mapping):
        raise DomainError("Configuration JSON field values must map vertex text to a spin")
    values = {
        parse_word(str(text), params.tree): parse_int(spin, f"values[{text!r}]") for text, spin in raw_values.items()
    }
    if len(values) != len(raw_values):
        raise DomainError("Configuration JSON lists the same vertex twice (after reduction)")
    return SpinConfiguration(k=params.k, q=params.q, values=values), params, n
