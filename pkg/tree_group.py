"""Cayley tree of order k as the group of reduced words over k+1 involutions.

A vertex is a reduced word in a_1..a_{k+1}; the root is the empty word e.
Neighbours of x are x·a_j, so the tree metric is the length of x^-1·y.
"""
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from errors import DomainError, InvalidGeneratorError, ParameterMismatchError


IDENTITY_TEXT = "e"


class TreeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)

    @property
    def generators(self) -> range:
        return range(1, self.k + 2)


class Word(BaseModel):
    """Reduced word; build through reduce() or parse_word() so the form stays canonical"""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    letters: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _reduced_in_range(self) -> "Word":
        for position, letter in enumerate(self.letters):
            if not 1 <= letter <= self.k + 1:
                raise InvalidGeneratorError(letter, self.k)
            if position and self.letters[position - 1] == letter:
                raise DomainError(
                    f"Letters {self.letters} are not reduced: a_{letter} repeats at position {position}; "
                    f"use reduce() or parse_word()"
                )
        return self

    @property
    def length(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    @property
    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (len(self.letters), self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return IDENTITY_TEXT
        return " ".join(str(letter) for letter in self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return multiply(self, other)


class VertexSet(BaseModel):
    """Duplicate-free collection of words kept in canonical order (length, then letters)"""

    model_config = ConfigDict(frozen=True)

    members: Tuple[Word, ...] = ()

    _positions: Dict[Word, int] = PrivateAttr(default_factory=dict)

    @field_validator("members")
    @classmethod
    def _canonical_order(cls, members: Tuple[Word, ...]) -> Tuple[Word, ...]:
        return tuple(sorted(set(members), key=lambda w: w.sort_key))

    def model_post_init(self, __context) -> None:
        self._positions = {word: i for i, word in enumerate(self.members)}

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Word]:  # type: ignore[override]
        return iter(self.members)

    def __contains__(self, word: object) -> bool:
        return word in self._positions

    def index_of(self, word: Word) -> int:
        return self._positions[word]

    def texts(self) -> List[str]:
        return [str(word) for word in self.members]


def _word(k: int, letters: Sequence[int]) -> Word:
    # letters already reduced and in range
    return Word.model_construct(k=k, letters=tuple(letters))


def identity(params: TreeParams) -> Word:
    return _word(params.k, ())


def generator(j: int, params: TreeParams) -> Word:
    if j not in params.generators:
        raise InvalidGeneratorError(j, params.k)
    return _word(params.k, (j,))


def reduce(letters: Iterable[int], params: TreeParams) -> Word:
    """Cancel adjacent equal letters (a_i^2 = e) until the word is reduced"""
    stack: List[int] = []
    for letter in letters:
        if letter not in params.generators:
            raise InvalidGeneratorError(letter, params.k)
        if stack and stack[-1] == letter:
            stack.pop()
        else:
            stack.append(letter)
    return _word(params.k, stack)


def _check_same_tree(x: Word, y: Word) -> None:
    if x.k != y.k:
        raise ParameterMismatchError(f"Words live on different trees (k={x.k} and k={y.k})")


def multiply(x: Word, y: Word) -> Word:
    _check_same_tree(x, y)
    # both operands are reduced, so cancellation happens only at the seam
    stack = list(x.letters)
    for letter in y.letters:
        if stack and stack[-1] == letter:
            stack.pop()
        else:
            stack.append(letter)
    return _word(x.k, stack)


def inverse(x: Word) -> Word:
    return _word(x.k, x.letters[::-1])


def distance(x: Word, y: Word) -> int:
    return multiply(inverse(x), y).length


def letter_count(x: Word, j: int) -> int:
    if j < 1 or j > x.k + 1:
        raise InvalidGeneratorError(j, x.k)
    return x.letters.count(j)


def sphere_size(n: int, k: int) -> int:
    if n == 0:
        return 1
    return (k + 1) * k ** (n - 1)


def ball_size(radius: int, k: int) -> int:
    if k == 1:
        return 1 + 2 * radius
    return 1 + (k + 1) * (k ** radius - 1) // (k - 1)


def _spheres(n: int, params: TreeParams) -> List[List[Tuple[int, ...]]]:
    layers: List[List[Tuple[int, ...]]] = [[()]]
    for _ in range(n):
        layers.append([
            word + (letter,)
            for word in layers[-1]
            for letter in params.generators
            if not word or word[-1] != letter
        ])
    return layers


def sphere(n: int, params: TreeParams) -> VertexSet:
    """W_n: every reduced word of length exactly n"""
    if n < 0:
        raise DomainError(f"Sphere radius must be non-negative, got {n}")
    return VertexSet(members=tuple(_word(params.k, w) for w in _spheres(n, params)[n]))


def volume(n: int, params: TreeParams) -> VertexSet:
    """V_n: every reduced word of length at most n"""
    if n < 0:
        raise DomainError(f"Volume radius must be non-negative, got {n}")
    return VertexSet(members=tuple(
        _word(params.k, w) for layer in _spheres(n, params) for w in layer
    ))


def ball(center: Word, radius: int, params: TreeParams) -> VertexSet:
    """All words within `radius` of `center`; the left translate center·V_radius"""
    if center.k != params.k:
        raise ParameterMismatchError(f"Center lives on k={center.k}, ball requested for k={params.k}")
    if radius < 0:
        raise DomainError(f"Ball radius must be non-negative, got {radius}")
    return VertexSet(members=tuple(multiply(center, w) for w in volume(radius, params)))


def neighbors(x: Word) -> VertexSet:
    params = TreeParams(k=x.k)
    return VertexSet(members=tuple(multiply(x, generator(j, params)) for j in params.generators))


def unit_ball(x: Word) -> VertexSet:
    """S_1(x) as listed in the ground-state construction: x together with its k+1 neighbours"""
    return VertexSet(members=(x,) + neighbors(x).members)


def edges(n: int, params: TreeParams) -> List[Tuple[Word, Word]]:
    """L_n as (parent, child) pairs, the child one letter longer, in canonical child order"""
    pairs = []
    for child in volume(n, params):
        if child.is_identity:
            continue
        pairs.append((_word(params.k, child.letters[:-1]), child))
    return pairs


def parse_word(text: str, params: TreeParams) -> Word:
    """Read the textual form ("1 2 1", or "e" for the identity) and reduce it"""
    cleaned = text.strip()
    if cleaned in ("", IDENTITY_TEXT):
        return identity(params)
    try:
        letters = [int(token) for token in cleaned.replace(",", " ").split()]
    except ValueError:
        raise DomainError(f"Cannot read '{text}' as a word; expected indices like '1 2 1' or 'e'") from None
    return reduce(letters, params)
