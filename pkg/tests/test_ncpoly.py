import numpy as np
import pytest

from brownlab.ncpoly import (
    NcPoly,
    ParseError,
    StarWord,
    circular_word_traces,
    evaluate,
    free_moment,
    parse,
    parse_star_word,
    quadratic_data,
    star_word_matrix,
)


# ---------------------------------------------------------------- parsing

def test_parse_anticommutator():
    p = parse("x1*x2 + x2*x1")
    assert p.num_vars == 2
    assert p.terms == {(1, 2): 1.0, (2, 1): 1.0}


def test_parse_zero():
    p = parse("0")
    assert p.terms == {}
    assert p.degree == 0


def test_parse_figure_poly():
    p = parse("x1*x2 - 0.3*x2*x3 + 0.1*x3*x1")
    assert p.num_vars == 3
    assert p.terms == {(1, 2): 1.0, (2, 3): -0.3, (3, 1): 0.1}


def test_parse_complex_coefficients():
    p = parse("(1+2i)*x1 + 0.5i*x2*x2 - 3")
    assert p.terms[(1,)] == 1 + 2j
    assert p.terms[(2, 2)] == 0.5j
    assert p.terms[()] == -3


def test_parse_parentheses_and_precedence():
    p = parse("(x1 + x2)*x1")
    assert p.terms == {(1, 1): 1.0, (2, 1): 1.0}


def test_parse_like_terms_collect():
    assert parse("x1*x2 - x1*x2").terms == {}


@pytest.mark.parametrize(
    "text",
    [
        "x1*x2 + x2*x1",
        "x1*x2 - 0.3*x2*x3 + 0.1*x3*x1",
        "(1+2i)*x1*x1 - 0.25i*x2 + (0.5-1i)",
        "0",
        "-x1 + 2*x2*x2",
    ],
)
def test_print_parse_round_trip(text):
    p = parse(text)
    assert parse(str(p), num_vars=p.num_vars) == p
    # printing is canonical: a second round trip gives the same string
    assert str(parse(str(p), num_vars=p.num_vars)) == str(p)


def test_parse_error_offsets():
    with pytest.raises(ParseError) as err:
        parse("x1*x2 + @")
    assert err.value.offset == 8
    with pytest.raises(ParseError):
        parse("x1 + ")


def test_parse_rejects_variable_zero():
    with pytest.raises(ParseError, match="index 0"):
        parse("x0 + x1")


def test_parse_rejects_index_above_declared_n():
    with pytest.raises(ParseError, match="exceeds"):
        parse("x1*x3", num_vars=2)
    # fine without a declaration
    assert parse("x1*x3").num_vars == 3


# ---------------------------------------------------------- quadratic data

def test_quadratic_anticommutator():
    qd = quadratic_data(parse("x1*x2 + x2*x1"))
    assert np.array_equal(qd.A, np.array([[0, 1], [1, 0]]))
    assert np.all(qd.b == 0)
    assert qd.gamma == 0
    assert qd.rank == 2


def test_quadratic_linear_poly():
    qd = quadratic_data(parse("x1", num_vars=2))
    assert np.all(qd.A == 0)
    assert qd.rank == 0
    assert np.array_equal(qd.b, np.array([1, 0]))
    assert qd.gamma == 0


def test_quadratic_rank_one():
    qd = quadratic_data(parse("x1*x2"))
    assert np.array_equal(qd.A, np.array([[0, 1], [0, 0]]))
    # oracle: rank by direct SVD of the 2x2 coefficient matrix
    sv = np.linalg.svd(np.array([[0.0, 1.0], [0.0, 0.0]]), compute_uv=False)
    assert qd.rank == int(np.sum(sv > 1e-10 * sv[0])) == 1


def test_quadratic_rejects_degree_three():
    with pytest.raises(ValueError, match="degree"):
        quadratic_data(parse("x1*x2*x1"))


def test_quadratic_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = rng.integers(1, 4)
        terms = {(): complex(*rng.normal(size=2))}
        for l in range(1, n + 1):
            terms[(l,)] = complex(*rng.normal(size=2))
            for m in range(1, n + 1):
                terms[(l, m)] = complex(*rng.normal(size=2))
        p = NcPoly(n, terms)
        qd = quadratic_data(p)
        qd2 = quadratic_data(qd.to_poly())
        assert np.array_equal(qd.A, qd2.A)
        assert np.array_equal(qd.b, qd2.b)
        assert qd.gamma == qd2.gamma


# ---------------------------------------------------------------- evaluate

def test_evaluate_identity():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(evaluate(parse("x1"), [M]), M)


def test_evaluate_commutator_of_equal_matrices():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 4))
    out = evaluate(parse("x1*x2 - x2*x1"), [M, M])
    assert np.allclose(out, 0)


def test_evaluate_anticommutator_hand_product():
    X1 = np.array([[0.0, 1.0], [0.0, 0.0]])
    X2 = np.array([[0.0, 0.0], [1.0, 0.0]])
    out = evaluate(parse("x1*x2 + x2*x1"), [X1, X2])
    assert np.allclose(out, np.eye(2))


def test_evaluate_constant_contributes_identity():
    out = evaluate(parse("2 + x1", num_vars=1), [np.zeros((3, 3))])
    assert np.allclose(out, 2 * np.eye(3))


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(parse("x1*x2"), [np.eye(2), np.eye(3)])
    with pytest.raises(ValueError):
        evaluate(parse("x1*x2"), [np.eye(2)])


def test_evaluate_linearity():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n, N = 3, int(rng.integers(2, 9))
        X = [rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)) for _ in range(n)]

        def rand_poly():
            terms = {}
            for _ in range(6):
                w = tuple(rng.integers(1, n + 1, size=rng.integers(0, 4)))
                terms[w] = complex(*rng.normal(size=2))
            return NcPoly(n, terms)

        p, q = rand_poly(), rand_poly()
        lhs = evaluate(p + q, X)
        rhs = evaluate(p, X) + evaluate(q, X)
        assert np.allclose(lhs, rhs, atol=1e-10)


# ------------------------------------------------------------ free moments

def _all_pairings(positions):
    if not positions:
        yield []
        return
    first = positions[0]
    for k in range(1, len(positions)):
        partner = positions[k]
        rest = positions[1:k] + positions[k + 1:]
        for tail in _all_pairings(rest):
            yield [(first, partner)] + tail


def _brute_moment(letters):
    """Independent oracle: enumerate all (k-1)!! pairings, then filter."""
    k = len(letters)
    if k % 2:
        return 0
    total = 0
    for pairing in _all_pairings(tuple(range(k))):
        crossing = any(
            a < c < b < d or c < a < d < b
            for (a, b) in pairing
            for (c, d) in pairing
        )
        if crossing:
            continue
        ok = all(
            letters[a][0] == letters[b][0] and letters[a][1] != letters[b][1]
            for (a, b) in pairing
        )
        total += ok
    return total


def test_free_moment_single_pair():
    assert free_moment(parse_star_word("c1 c1*")) == 1


def test_free_moment_no_adjoint():
    assert free_moment(parse_star_word("c1 c1")) == 0


def test_free_moment_two_pairs():
    w = parse_star_word("c1 c1* c1 c1*")
    assert _brute_moment(w.letters) == 2
    assert free_moment(w) == 2


def test_free_moment_odd_and_empty():
    assert free_moment(parse_star_word("c1")) == 0
    assert free_moment(StarWord(letters=())) == 1


def test_free_moment_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(60):
        k = int(rng.choice([2, 4, 6, 8, 10]))
        letters = tuple(
            (int(rng.integers(1, 3)), bool(rng.integers(0, 2))) for _ in range(k)
        )
        w = StarWord(letters=letters)
        assert free_moment(w) == _brute_moment(letters)


def test_free_moment_catalan_on_alternating_words():
    # c c* c c* ... has moment Catalan(k): all non-crossing pairings qualify
    catalan = [1, 1, 2, 5, 14, 42]
    for k in range(1, 6):
        letters = ((1, False), (1, True)) * k
        assert free_moment(StarWord(letters=letters)) == catalan[k]


def test_parse_star_word_errors():
    with pytest.raises(ParseError):
        parse_star_word("c1 d2")
    with pytest.raises(ParseError):
        parse_star_word("c0")


# -------------------------------------------------------- fast trace table

def test_circular_word_traces_match_direct_products():
    rng = np.random.default_rng(5)
    N = 6
    X = [rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)) for _ in range(2)]
    table = circular_word_traces(X, max_len=4)
    assert len(table) == sum(4**k for k in range(5))
    for letters, value in table.items():
        direct = np.trace(star_word_matrix(StarWord(letters=letters), X)) / N
        assert np.isclose(value, direct, rtol=1e-10, atol=1e-12)
