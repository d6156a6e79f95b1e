"""Parity subgroups F = F_{A_1} ∩ ... ∩ F_{A_m} of the tree group and F-periodic configurations.

A word x maps to an m-bit coset label whose bit i is the parity of the number of
letters of x drawn from A_i. Bit 1 is the most significant, so label "110" is the
integer 6. The map is a homomorphism onto (Z/2)^m: the label of x·a_j is the label
of x XOR v_j, where v_j marks the sets A_i containing j.
"""
import itertools
import logging
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import (
    DomainError,
    InvalidSpecError,
    InvalidSpinError,
    ParameterMismatchError,
    PigeonholeError,
    RegimeError,
)
from spin_config import SpinConfiguration, parse_int
from tree_group import TreeParams, VertexSet, Word, volume

logger = logging.getLogger(__name__)


class Parity(str, Enum):
    EVEN = "e"
    ODD = "o"


class ParityPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    letters: Tuple[Parity, ...]

    @property
    def m(self) -> int:
        return len(self.letters)

    @property
    def odd_count(self) -> int:
        return sum(1 for letter in self.letters if letter is Parity.ODD)

    def __str__(self) -> str:
        return "".join(letter.value for letter in self.letters)


def label_text(value: int, m: int) -> str:
    return format(value, f"0{m}b")


def parse_label(text: str, m: int) -> int:
    cleaned = text.strip()
    if len(cleaned) != m or any(ch not in "01" for ch in cleaned):
        raise DomainError(f"'{text}' is not an {m}-bit label")
    return int(cleaned, 2)


class CosetLabel(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    value: int = Field(ge=0)

    @model_validator(mode="after")
    def _fits(self) -> "CosetLabel":
        if self.value >= 1 << self.m:
            raise DomainError(f"Label {self.value} needs more than {self.m} bits")
        return self

    @property
    def bits(self) -> Tuple[int, ...]:
        return tuple(int(ch) for ch in label_text(self.value, self.m))

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def __str__(self) -> str:
        return label_text(self.value, self.m)


class SubgroupSpec(BaseModel):
    """The family A_1..A_m of generator-index sets; F is the kernel of the parity map"""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    k: int = Field(ge=1)
    a_sets: Tuple[Tuple[int, ...], ...]

    @field_validator("a_sets")
    @classmethod
    def _sorted_sets(cls, a_sets: Tuple[Tuple[int, ...], ...]) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(sorted(set(members))) for members in a_sets)

    @model_validator(mode="after")
    def _sets_within_generators(self) -> "SubgroupSpec":
        if len(self.a_sets) != self.m:
            raise InvalidSpecError(f"Expected {self.m} sets A_i, got {len(self.a_sets)}")
        for i, members in enumerate(self.a_sets, start=1):
            for j in members:
                if not 1 <= j <= self.k + 1:
                    raise InvalidSpecError(f"A_{i} contains {j}, outside generators 1..{self.k + 1}")
        return self

    @property
    def generator_vectors(self) -> Tuple[int, ...]:
        """v_1..v_{k+1} as integers; bit for A_1 is the most significant"""
        vectors = []
        for j in range(1, self.k + 2):
            value = 0
            for i, members in enumerate(self.a_sets):
                if j in members:
                    value |= 1 << (self.m - 1 - i)
            vectors.append(value)
        return tuple(vectors)

    @property
    def vector_texts(self) -> List[str]:
        return [label_text(v, self.m) for v in self.generator_vectors]

    @property
    def is_valid(self) -> bool:
        vectors = self.generator_vectors
        return 0 not in vectors and len(set(vectors)) == len(vectors)

    @property
    def rank(self) -> int:
        return gf2_rank(self.generator_vectors, self.m)

    @property
    def is_full_index(self) -> bool:
        return self.rank == self.m


class CosetColoring(BaseModel):
    """Spin for each of the 2^m coset labels, indexed by label value"""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    colors: Tuple[int, ...]

    @model_validator(mode="after")
    def _total(self) -> "CosetColoring":
        if len(self.colors) != 1 << self.m:
            raise DomainError(f"Coloring must cover all {1 << self.m} labels, got {len(self.colors)}")
        return self

    def color_of(self, label: Union[CosetLabel, int]) -> int:
        value = label.value if isinstance(label, CosetLabel) else label
        return self.colors[value]


def gf2_rank(vectors: Sequence[int], m: int) -> int:
    """Rank over GF(2) of m-bit vectors given as integers"""
    if not vectors:
        return 0
    matrix = np.array([[(v >> (m - 1 - c)) & 1 for c in range(m)] for v in vectors], dtype=np.uint8)
    rank = 0
    rows = matrix.shape[0]
    for col in range(m):
        if rank >= rows:
            break
        hits = np.where(matrix[rank:, col] == 1)[0]
        if hits.size == 0:
            continue
        pivot = rank + int(hits[0])
        if pivot != rank:
            matrix[[rank, pivot], :] = matrix[[pivot, rank], :]
        others = np.where(matrix[:, col] == 1)[0]
        others = others[others != rank]
        if others.size:
            matrix[others, :] ^= matrix[rank, :]
        rank += 1
    return rank


def build_alpha_patterns(m: int) -> List[ParityPattern]:
    """Half of the 2^m even/odd patterns: more evens than odds, plus one of each balanced complementary pair"""
    if m < 1:
        raise DomainError(f"Pattern length m must be at least 1, got {m}")
    chosen = []
    for letters in itertools.product((Parity.EVEN, Parity.ODD), repeat=m):
        odd = sum(1 for letter in letters if letter is Parity.ODD)
        if 2 * odd < m or (2 * odd == m and letters[0] is Parity.ODD):
            chosen.append(ParityPattern(letters=letters))
    # all-even first, then by odd count; within a count "odd" sorts before "even"
    chosen.sort(key=lambda p: (p.odd_count, tuple(0 if letter is Parity.ODD else 1 for letter in p.letters)))
    return chosen


def build_a_sets(k: int, m: int) -> SubgroupSpec:
    """A_i = {j <= k : pattern j is odd at position i} ∪ {k+1}, for k = 2^(m-1) - 1"""
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")
    expected_k = (1 << (m - 1)) - 1
    if k != expected_k:
        raise RegimeError(
            f"Direct pattern construction needs k = 2^(m-1) - 1 = {expected_k}, got k={k}; "
            f"use generalize_a_sets for other k"
        )
    patterns = build_alpha_patterns(m)[1:]
    a_sets = []
    for i in range(m):
        members = [j for j, pattern in enumerate(patterns, start=1) if pattern.letters[i] is Parity.ODD]
        a_sets.append(tuple(members) + (k + 1,))
    spec = SubgroupSpec(m=m, k=k, a_sets=tuple(a_sets))
    logger.info(f"✅ Built A-sets for k={k}, m={m}: vectors {spec.vector_texts}")
    return spec


def _read_vector(raw: Union[str, int], m: int) -> int:
    if isinstance(raw, str):
        return parse_label(raw, m)
    if not 0 <= raw < 1 << m:
        raise DomainError(f"Vector {raw} does not fit in {m} bits")
    return raw


def spec_from_vectors(k: int, m: int, vectors: Sequence[int]) -> SubgroupSpec:
    a_sets = tuple(
        tuple(j for j, v in enumerate(vectors, start=1) if v & (1 << (m - 1 - i)))
        for i in range(m)
    )
    return SubgroupSpec(m=m, k=k, a_sets=a_sets)


def generalize_a_sets(
    k: int, m: int, vectors: Optional[Sequence[Union[str, int]]] = None
) -> SubgroupSpec:
    """Assign distinct nonzero m-bit vectors to the k+1 generators and read the A-sets off them"""
    if m < 1 or k < 1:
        raise DomainError(f"Need k >= 1 and m >= 1, got k={k}, m={m}")
    available = (1 << m) - 1
    if k + 1 > available:
        raise PigeonholeError(
            f"{k + 1} generators need distinct nonzero {m}-bit vectors but only {available} exist"
        )
    if vectors is not None:
        if len(vectors) != k + 1:
            raise DomainError(f"Expected {k + 1} generator vectors, got {len(vectors)}")
        chosen = [_read_vector(raw, m) for raw in vectors]
        if 0 in chosen or len(set(chosen)) != len(chosen):
            raise InvalidSpecError(f"Generator vectors must be distinct and nonzero, got {chosen}")
    else:
        chosen = list(range(1, k + 1))
        all_ones = available
        if all_ones not in chosen:
            chosen.append(all_ones)
        else:
            chosen.append(min(v for v in range(1, available + 1) if v not in chosen))
    return spec_from_vectors(k, m, chosen)


def _check_tree(x: Word, spec: SubgroupSpec) -> None:
    if x.k != spec.k:
        raise ParameterMismatchError(f"Word lives on k={x.k}, subgroup spec on k={spec.k}")


def label_value(x: Word, spec: SubgroupSpec) -> int:
    _check_tree(x, spec)
    vectors = spec.generator_vectors
    value = 0
    for letter in x.letters:
        value ^= vectors[letter - 1]
    return value


def parity_vector(x: Word, spec: SubgroupSpec) -> CosetLabel:
    return CosetLabel(m=spec.m, value=label_value(x, spec))


def in_subgroup(x: Word, spec: SubgroupSpec) -> bool:
    return label_value(x, spec) == 0


def subgroup_index(spec: SubgroupSpec) -> int:
    return 1 << spec.rank


def _volume_labels(spec: SubgroupSpec, n: int) -> Tuple[VertexSet, Dict[Word, int]]:
    region = volume(n, TreeParams(k=spec.k))
    vectors = spec.generator_vectors
    labels: Dict[Word, int] = {}
    by_letters: Dict[Tuple[int, ...], int] = {}
    # canonical order visits every parent before its children
    for word in region:
        if word.is_identity:
            value = 0
        else:
            value = by_letters[word.letters[:-1]] ^ vectors[word.letters[-1] - 1]
        by_letters[word.letters] = value
        labels[word] = value
    return region, labels


def coset_balls(spec: SubgroupSpec) -> List[Tuple[int, ...]]:
    """Label-level unit balls {g, g⊕v_1, ..., g⊕v_{k+1}} for every g"""
    vectors = spec.generator_vectors
    return [(g,) + tuple(g ^ v for v in vectors) for g in range(1 << spec.m)]


def gamma_check(spec: SubgroupSpec, region_radius: int) -> Tuple[bool, Optional[Word]]:
    """Every unit ball centred in V_radius meets each coset at most once"""
    if region_radius < 0:
        raise DomainError(f"Region radius must be non-negative, got {region_radius}")
    region, labels = _volume_labels(spec, region_radius)
    vectors = spec.generator_vectors
    for x in region:
        own = labels[x]
        ball_labels = {own} | {own ^ v for v in vectors}
        if len(ball_labels) < spec.k + 2:
            logger.info(f"❌ Unit ball at '{x}' repeats a coset label")
            return False, x
    logger.info(f"✅ Unit balls over V_{region_radius} ({len(region)} centers) hit distinct cosets")
    return True, None


def coset_partition(spec: SubgroupSpec, n: int) -> Dict[CosetLabel, VertexSet]:
    region, labels = _volume_labels(spec, n)
    classes: Dict[int, List[Word]] = {}
    for word in region:
        classes.setdefault(labels[word], []).append(word)
    return {
        CosetLabel(m=spec.m, value=value): VertexSet(members=tuple(words))
        for value, words in sorted(classes.items())
    }


def periodic_config(coloring: CosetColoring, spec: SubgroupSpec, n: int, q: int) -> SpinConfiguration:
    """σ(x) = coloring(label of x) on V_n; constant on every coset of F"""
    if coloring.m != spec.m:
        raise ParameterMismatchError(f"Coloring has m={coloring.m}, subgroup spec m={spec.m}")
    for value, spin in enumerate(coloring.colors):
        if not 1 <= spin <= q:
            raise InvalidSpinError(spin, q, where=f"label {label_text(value, spec.m)}")
    _, labels = _volume_labels(spec, n)
    return SpinConfiguration(
        k=spec.k, q=q, values={word: coloring.colors[value] for word, value in labels.items()}
    )


def is_periodic(config: SpinConfiguration, spec: SubgroupSpec) -> Tuple[bool, Optional[Tuple[Word, Word]]]:
    """Spins agree on each coset class of the support; the witness is a disagreeing pair"""
    first_seen: Dict[int, Word] = {}
    for word in config.support:
        value = label_value(word, spec)
        if value not in first_seen:
            first_seen[value] = word
        elif config.values[first_seen[value]] != config.values[word]:
            return False, (first_seen[value], word)
    return True, None


def constant_coloring(m: int, spin: int) -> CosetColoring:
    return CosetColoring(m=m, colors=tuple([spin] * (1 << m)))


def injective_coloring(m: int, q: int, order: Optional[Sequence[int]] = None) -> CosetColoring:
    """Distinct spins on the 2^m labels; `order` is a permutation of 1..2^m, identity by default"""
    size = 1 << m
    if q < size:
        raise PigeonholeError(f"An injective coloring of {size} labels needs q >= {size}, got q={q}")
    colors = tuple(order) if order is not None else tuple(range(1, size + 1))
    if sorted(set(colors)) != sorted(colors) or len(colors) != size:
        raise DomainError(f"Injective coloring needs {size} distinct spins, got {colors}")
    return CosetColoring(m=m, colors=colors)


def spec_payload(spec: SubgroupSpec) -> Dict[str, Any]:
    return {"m": spec.m, "k": spec.k, "A": [list(members) for members in spec.a_sets]}


def spec_from_payload(payload: Mapping[str, Any]) -> SubgroupSpec:
    if not isinstance(payload, Mapping):
        raise DomainError("Subgroup JSON must be an object")
    try:
        raw_sets = payload["A"]
        m, k = payload["m"], payload["k"]
    except KeyError as e:
        raise DomainError(f"Subgroup JSON lacks field {e}") from None
    if isinstance(raw_sets, (str, Mapping)) or not isinstance(raw_sets, Sequence):
        raise DomainError(f"Subgroup JSON field A must be a list of index lists, got {raw_sets!r}")
    try:
        a_sets = tuple(
            tuple(parse_int(j, "A") for j in members) for members in raw_sets if not isinstance(members, str)
        )
    except TypeError:
        raise DomainError(f"Subgroup JSON field A must be a list of index lists, got {raw_sets!r}") from None
    if len(a_sets) != len(raw_sets):
        raise DomainError(f"Subgroup JSON field A must be a list of index lists, got {raw_sets!r}")
    return SubgroupSpec(m=m, k=k, a_sets=a_sets)


def coloring_payload(coloring: CosetColoring) -> Dict[str, Any]:
    return {
        "m": coloring.m,
        "colors": {label_text(value, coloring.m): spin for value, spin in enumerate(coloring.colors)},
    }


def coloring_from_payload(payload: Mapping[str, Any]) -> CosetColoring:
    if not isinstance(payload, Mapping):
        raise DomainError("Coloring JSON must be an object")
    try:
        m = parse_int(payload["m"], "m")
        raw = payload["colors"]
    except KeyError as e:
        raise DomainError(f"Coloring JSON lacks field {e}") from None
    if m < 1:
        raise DomainError(f"Coloring JSON needs m >= 1, got {m}")
    if not isinstance(raw, Mapping):
        raise DomainError("Coloring JSON field colors must map labels to spins")
    colors: Dict[int, int] = {
        parse_label(str(text), m): parse_int(spin, f"colors[{text!r}]") for text, spin in raw.items()
    }
    missing = [label_text(v, m) for v in range(1 << m) if v not in colors]
    if missing:
        raise DomainError(f"Coloring leaves labels uncolored: {', '.join(missing)}")
    return CosetColoring(m=m, colors=tuple(colors[v] for v in range(1 << m)))
