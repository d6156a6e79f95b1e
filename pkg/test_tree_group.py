import random

import pytest

from errors import DomainError, InvalidGeneratorError, ParameterMismatchError
from tree_group import (
    TreeParams,
    Word,
    ball,
    ball_size,
    distance,
    edges,
    generator,
    identity,
    inverse,
    letter_count,
    multiply,
    neighbors,
    parse_word,
    reduce,
    sphere,
    sphere_size,
    unit_ball,
    volume,
)

K2 = TreeParams(k=2)
K3 = TreeParams(k=3)


def w(text, params=K2):
    return parse_word(text, params)


def random_letters(rng, params, max_len=8):
    return [rng.choice(list(params.generators)) for _ in range(rng.randint(0, max_len))]


def random_word(rng, params, max_len=8):
    return reduce(random_letters(rng, params, max_len), params)


def test_reduce_examples():
    assert reduce([1, 1], K2) == identity(K2)
    assert reduce([1, 2, 2, 3], K2).letters == (1, 3)
    assert reduce([1, 2, 1], K2).letters == (1, 2, 1)
    assert reduce([1, 2, 3, 3, 2, 1], K2).is_identity


def test_reduce_rejects_generator_out_of_range():
    with pytest.raises(InvalidGeneratorError):
        reduce([1, 4], K2)
    with pytest.raises(InvalidGeneratorError):
        reduce([0], K2)


def test_multiply_examples():
    assert multiply(w("1"), w("1")) == identity(K2)
    assert multiply(w("1 2"), w("2 3")) == w("1 3")
    assert multiply(identity(K2), w("1 2")) == w("1 2")
    assert w("1 2") * w("2 1") == identity(K2)


def test_multiply_rejects_words_from_different_trees():
    with pytest.raises(ParameterMismatchError):
        multiply(w("1", K2), w("1", K3))


def test_distance_examples():
    e = identity(K2)
    assert distance(e, e) == 0
    assert distance(e, w("1 2 3")) == 3
    assert distance(w("1"), w("1 2")) == 1
    assert distance(w("1 2"), w("3")) == 3


def test_ball_examples():
    assert ball(identity(K2), 0, K2).members == (identity(K2),)
    unit = ball(identity(K2), 1, K2)
    assert unit.texts() == ["e", "1", "2", "3"]
    around_a1 = ball(w("1", K3), 1, K3)
    assert set(around_a1.texts()) == {"1", "e", "1 2", "1 3", "1 4"}
    assert len(around_a1) == 5


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("radius", [0, 1, 2, 3])
def test_ball_size_matches_closed_form(k, radius):
    params = TreeParams(k=k)
    assert len(ball(identity(params), radius, params)) == ball_size(radius, k)
    off_center = reduce([1, 2], params)
    assert len(ball(off_center, radius, params)) == ball_size(radius, k)


def test_sphere_examples():
    assert sphere(0, K2).texts() == ["e"]
    assert sphere(1, K2).texts() == ["1", "2", "3"]
    assert len(sphere(2, K2)) == 6
    for n in range(5):
        assert len(sphere(n, K3)) == sphere_size(n, 3)


def test_volume_is_in_canonical_order():
    words = volume(2, K2).members
    keys = [word.sort_key for word in words]
    assert keys == sorted(keys)
    assert len(words) == 10
    assert words[0].is_identity


def test_letter_count_examples():
    assert letter_count(w("1 2 1"), 1) == 2
    assert letter_count(identity(K2), 3) == 0
    assert letter_count(w("1 2"), 2) == 1
    with pytest.raises(InvalidGeneratorError):
        letter_count(w("1 2"), 4)


def test_unit_ball_and_neighbors():
    x = w("2 1")
    assert len(neighbors(x)) == 3
    assert all(distance(x, y) == 1 for y in neighbors(x))
    listed = unit_ball(x)
    assert len(listed) == K2.k + 2
    assert x in listed


def test_edges_form_a_spanning_tree_of_the_volume():
    for n in range(4):
        pairs = edges(n, K2)
        assert len(pairs) == len(volume(n, K2)) - 1
        assert all(distance(parent, child) == 1 for parent, child in pairs)


def test_word_text_form():
    assert str(identity(K2)) == "e"
    assert str(w("1 2 1")) == "1 2 1"
    assert parse_word("e", K2).is_identity
    assert parse_word(" 1 3 3 2 ", K2) == w("1 2")


def test_words_are_hashable_values():
    assert len({w("1 2"), reduce([1, 2], K2), Word(k=2, letters=(1, 2))}) == 1
    assert w("1 2") != w("1 2", K3)


def test_word_constructor_keeps_reduced_form():
    with pytest.raises(DomainError):
        Word(k=2, letters=(1, 1))
    with pytest.raises(DomainError):
        Word(k=3, letters=(2, 1, 4, 4))
    with pytest.raises(InvalidGeneratorError):
        Word(k=2, letters=(9,))
    with pytest.raises(InvalidGeneratorError):
        Word(k=2, letters=(1, 0))
    built = Word(k=2, letters=(1, 2, 1))
    assert built == reduce([1, 2, 1], K2)
    assert distance(built, identity(K2)) == 3


def test_reduction_is_confluent():
    rng = random.Random(20240101)
    for _ in range(1000):
        params = TreeParams(k=rng.randint(1, 4))
        left = random_letters(rng, params)
        right = random_letters(rng, params)
        assert reduce(list(reduce(left, params).letters) + right, params) == reduce(left + right, params)


def test_group_axioms():
    rng = random.Random(7)
    for _ in range(1000):
        params = TreeParams(k=rng.randint(1, 4))
        x, y, z = (random_word(rng, params) for _ in range(3))
        e = identity(params)
        assert multiply(multiply(x, y), z) == multiply(x, multiply(y, z))
        assert multiply(e, x) == x == multiply(x, e)
        assert multiply(x, inverse(x)) == e == multiply(inverse(x), x)
        assert inverse(x).letters == x.letters[::-1]


def test_distance_is_a_metric():
    rng = random.Random(11)
    for _ in range(1000):
        params = TreeParams(k=rng.randint(1, 4))
        x, y, z = (random_word(rng, params) for _ in range(3))
        assert distance(x, y) >= 0
        assert distance(x, y) == distance(y, x)
        assert distance(x, z) <= distance(x, y) + distance(y, z)
        assert (distance(x, y) == 0) == (x == y)
        assert distance(identity(params), x) == x.length


def test_letter_count_parity_is_multiplicative():
    rng = random.Random(13)
    for _ in range(1000):
        params = TreeParams(k=rng.randint(1, 4))
        x, y = random_word(rng, params), random_word(rng, params)
        product = multiply(x, y)
        for j in params.generators:
            assert letter_count(product, j) % 2 == (letter_count(x, j) + letter_count(y, j)) % 2


def test_generator_rejects_out_of_range():
    assert generator(3, K2).letters == (3,)
    with pytest.raises(InvalidGeneratorError):
        generator(4, K2)
