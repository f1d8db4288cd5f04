"""Non-commutative polynomials: parsing, matrix evaluation, free moments.

A polynomial in n non-commuting variables is stored sparsely as a map from
words (tuples over 1..n) to complex coefficients. The quadratic extraction
splits a degree <= 2 polynomial into its coefficient matrix A, linear
vector b, and constant gamma, which is what the linearization consumes.

Free moments of words in circular variables are counted by enumerating
non-crossing pairings in which every pair joins equal indices with opposite
adjoint markers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "NcPoly",
    "QuadraticData",
    "StarWord",
    "ParseError",
    "parse",
    "parse_star_word",
    "quadratic_data",
    "evaluate",
    "free_moment",
    "star_word_matrix",
    "circular_word_traces",
]

Word = tuple  # tuple of variable indices in 1..num_vars


class ParseError(ValueError):
    """Syntax or validation error in polynomial text, with byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class NcPoly:
    """Sparse non-commutative polynomial over complex coefficients.

    Immutable. Zero coefficients are never stored; the degree is the
    longest stored word (0 for the zero polynomial).
    """

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars, terms):
        num_vars = int(num_vars)
        if num_vars < 1:
            raise ValueError("num_vars must be a positive integer")
        clean = {}
        for word, coeff in terms.items():
            word = tuple(int(v) for v in word)
            coeff = complex(coeff)
            if coeff == 0:
                continue
            for letter in word:
                if not 1 <= letter <= num_vars:
                    raise ValueError(f"letter {letter} outside [1, {num_vars}]")
            clean[word] = clean.get(word, 0) + coeff
        object.__setattr__(self, "num_vars", num_vars)
        object.__setattr__(
            self, "terms", {w: c for w, c in clean.items() if c != 0}
        )

    def __setattr__(self, *a):
        raise AttributeError("NcPoly is immutable")

    @property
    def degree(self):
        return max((len(w) for w in self.terms), default=0)

    def __eq__(self, other):
        return (
            isinstance(other, NcPoly)
            and self.num_vars == other.num_vars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.num_vars, frozenset(self.terms.items())))

    def _binop(self, other, sign):
        if isinstance(other, (int, float, complex)):
            other = NcPoly(self.num_vars, {(): other})
        n = max(self.num_vars, other.num_vars)
        terms = dict(self.terms)
        for w, c in other.terms.items():
            terms[w] = terms.get(w, 0) + sign * c
        return NcPoly(n, terms)

    def __add__(self, other):
        return self._binop(other, 1)

    def __sub__(self, other):
        return self._binop(other, -1)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return NcPoly(self.num_vars, {w: c * other for w, c in self.terms.items()})
        n = max(self.num_vars, other.num_vars)
        terms = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                terms[w] = terms.get(w, 0) + c1 * c2
        return NcPoly(n, terms)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self * (-1)

    def with_num_vars(self, n):
        return NcPoly(n, self.terms)

    def sorted_terms(self):
        """Terms in the canonical order (by word length, then word)."""
        return sorted(self.terms.items(), key=lambda item: (len(item[0]), item[0]))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for word, coeff in self.sorted_terms():
            parts.append(_format_term(word, coeff, first=not parts))
        return " ".join(parts)

    def __repr__(self):
        return f"NcPoly(n={self.num_vars}, {str(self)!r})"

    @staticmethod
    def zero(num_vars=1):
        return NcPoly(num_vars, {})

    @staticmethod
    def variable(index, num_vars=None):
        return NcPoly(num_vars or index, {(index,): 1.0})


def _format_complex(c):
    # Shortest form accepted back by the grammar: float, float'i', or (a+bi).
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return repr(c.imag) + "i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def _format_term(word, coeff, first):
    vars_txt = "*".join(f"x{v}" for v in word)
    if not word:
        body = _format_complex(coeff)
        return body if first else f"+ {body}" if not body.startswith("-") else f"- {body[1:]}"
    lead, mag = "+", coeff
    negative_real = coeff.imag == 0 and coeff.real < 0
    negative_imag = coeff.real == 0 and coeff.imag < 0
    if negative_real or negative_imag:
        lead, mag = "-", -coeff
    if mag == 1 and mag.imag == 0:
        body = vars_txt
    else:
        body = f"{_format_complex(mag)}*{vars_txt}"
    if first:
        return body if lead == "+" else f"-{body}"
    return f"{lead} {body}"


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?"
    r"|(?P<var>x\d+)"
    r"|(?P<op>[+\-*()])"
    r")"
)


class _Parser:
    """Recursive descent over:  expr := term (('+'|'-') term)* ;
    term := factor ('*' factor)* ; factor := coeff | var | '(' expr ')'.
    """

    def __init__(self, text, num_vars):
        self.text = text
        self.num_vars = num_vars
        self.pos = 0
        self.tok = None
        self._advance()

    def _advance(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        if self.pos >= len(self.text):
            self.tok = ("end", None, self.pos)
            return
        m = _TOKEN_RE.match(self.text, self.pos)
        if not m or m.start() != self.pos:
            raise ParseError(f"unexpected character {self.text[self.pos]!r}", self.pos)
        start = m.start(m.lastgroup) if m.lastgroup else self.pos
        if m.group("num") is not None:
            value = float(m.group("num"))
            coeff = 1j * value if m.group("imag") else complex(value)
            self.tok = ("num", coeff, m.start("num"))
        elif m.group("var") is not None:
            self.tok = ("var", int(m.group("var")[1:]), m.start("var"))
        else:
            self.tok = ("op", m.group("op"), m.start("op"))
        self.pos = m.end()

    def parse(self):
        poly = self.expr()
        if self.tok[0] != "end":
            raise ParseError(f"trailing input {self.tok[1]!r}", self.tok[2])
        return poly

    def expr(self):
        sign = 1
        if self.tok[0] == "op" and self.tok[1] in "+-":
            sign = -1 if self.tok[1] == "-" else 1
            self._advance()
        poly = self.term() * sign
        while self.tok[0] == "op" and self.tok[1] in "+-":
            sign = -1 if self.tok[1] == "-" else 1
            self._advance()
            poly = poly + self.term() * sign
        return poly

    def term(self):
        poly = self.factor()
        while self.tok[0] == "op" and self.tok[1] == "*":
            self._advance()
            poly = poly * self.factor()
        return poly

    def factor(self):
        kind, value, offset = self.tok
        if kind == "num":
            self._advance()
            return NcPoly(self._n_default(), {(): value})
        if kind == "var":
            if value == 0:
                raise ParseError("variable index 0 is not allowed", offset)
            if self.num_vars is not None and value > self.num_vars:
                raise ParseError(
                    f"variable x{value} exceeds declared n={self.num_vars}", offset
                )
            self._advance()
            return NcPoly(max(value, self._n_default()), {(value,): 1.0})
        if kind == "op" and value == "(":
            self._advance()
            poly = self.expr()
            if not (self.tok[0] == "op" and self.tok[1] == ")"):
                raise ParseError("expected ')'", self.tok[2])
            self._advance()
            return poly
        raise ParseError("expected coefficient, variable, or '('", offset)

    def _n_default(self):
        return self.num_vars if self.num_vars is not None else 1


def parse(text, num_vars=None):
    """Parse polynomial text into canonical NcPoly form.

    If num_vars is given, variable indices above it are rejected;
    otherwise n is the largest index that occurs (n=1 for constants).
    """
    poly = _Parser(text, num_vars).parse()
    if num_vars is not None:
        return poly.with_num_vars(num_vars)
    top = max((max(w) for w in poly.terms if w), default=1)
    return poly.with_num_vars(top)


@dataclass(frozen=True)
class QuadraticData:
    """Coefficient split p = sum A[l,m] x_l x_m + sum b[l] x_l + gamma."""

    A: np.ndarray
    b: np.ndarray
    gamma: complex
    rank: int

    def to_poly(self):
        n = len(self.b)
        terms = {(): self.gamma}
        for l in range(n):
            terms[(l + 1,)] = self.b[l]
            for m in range(n):
                terms[(l + 1, m + 1)] = self.A[l, m]
        return NcPoly(n, terms)


# Rank cutoff relative to the top singular value. Coefficients are
# user-supplied exact-ish constants, so the cut sits far below any
# intentional scale separation.
RANK_TOL = 1e-10


def quadratic_data(p, rank_tol=RANK_TOL):
    """Extract (A, b, gamma, rank) from a polynomial of degree <= 2."""
    if p.degree > 2:
        raise ValueError(f"degree {p.degree} polynomial; quadratic_data needs degree <= 2")
    n = p.num_vars
    A = np.zeros((n, n), dtype=complex)
    b = np.zeros(n, dtype=complex)
    gamma = 0j
    for word, coeff in p.terms.items():
        if len(word) == 2:
            A[word[0] - 1, word[1] - 1] = coeff
        elif len(word) == 1:
            b[word[0] - 1] = coeff
        else:
            gamma = coeff
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return QuadraticData(A=A, b=b, gamma=gamma, rank=rank)


def evaluate(p, X):
    """Evaluate p on a tuple of square matrices (any degree).

    The empty word contributes gamma times the identity.
    """
    X = [np.asarray(M) for M in X]
    if len(X) < p.num_vars:
        raise ValueError(f"need {p.num_vars} matrices, got {len(X)}")
    if not X:
        raise ValueError("need at least one matrix to fix the dimension")
    N = X[0].shape[0]
    for M in X:
        if M.shape != (N, N):
            raise ValueError("all matrices must be square of equal size")
    out = np.zeros((N, N), dtype=complex)
    eye = np.eye(N)
    for word, coeff in p.terms.items():
        if not word:
            out += coeff * eye
            continue
        prod = X[word[0] - 1]
        for letter in word[1:]:
            prod = prod @ X[letter - 1]
        out += coeff * prod
    return out


@dataclass(frozen=True)
class StarWord:
    """Word in circular variables and their adjoints, e.g. c1 c1* c2 c2*.

    letters is a tuple of (index, starred) pairs; the empty word is the unit.
    """

    letters: tuple

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return " ".join(f"c{i}{'*' if s else ''}" for i, s in self.letters) or "1"


_STAR_RE = re.compile(r"c(\d+)(\*?)")


def parse_star_word(text):
    letters = []
    pos = 0
    for chunk in text.split():
        m = _STAR_RE.fullmatch(chunk)
        if not m:
            raise ParseError(f"bad star-word token {chunk!r}", text.find(chunk, pos))
        idx = int(m.group(1))
        if idx == 0:
            raise ParseError("variable index 0 is not allowed", text.find(chunk, pos))
        letters.append((idx, m.group(2) == "*"))
        pos = text.find(chunk, pos) + len(chunk)
    return StarWord(letters=tuple(letters))


def _pairable(a, b):
    return a[0] == b[0] and a[1] != b[1]


def free_moment(w):
    """Count non-crossing pairings with equal indices and opposite markers.

    This is the mixed moment of free circular elements on the word w.
    Non-crossing structure lets intervals be counted independently, so the
    recursion is over intervals with memoization; exact integers for any
    word length that fits in memory (intended for k <= 16 or so).
    """
    letters = w.letters if isinstance(w, StarWord) else tuple(w)
    k = len(letters)
    if k == 0:
        return 1
    if k % 2 == 1:
        return 0

    @lru_cache(maxsize=None)
    def count(i, j):
        # number of admissible non-crossing pairings of letters[i:j]
        if i >= j:
            return 1
        total = 0
        for m in range(i + 1, j, 2):
            if _pairable(letters[i], letters[m]):
                total += count(i + 1, m) * count(m + 1, j)
        return total

    return count(0, k)


def star_word_matrix(w, X):
    """Product matrix for a star word: c_i -> X[i-1], c_i* -> X[i-1]^H."""
    X = [np.asarray(M) for M in X]
    N = X[0].shape[0]
    out = np.eye(N, dtype=complex)
    for idx, starred in w.letters:
        M = X[idx - 1]
        out = out @ (M.conj().T if starred else M)
    return out


def circular_word_traces(X, max_len):
    """Normalized traces (1/N) tr for every star word of length <= max_len.

    Returns a dict keyed by letter tuples as in StarWord.letters. Words are
    split near the middle and all traces of a given split are contracted in
    one matrix product of flattened prefixes, which keeps the cost far below
    one matrix product per word.
    """
    X = [np.asarray(M) for M in X]
    n = len(X)
    N = X[0].shape[0]
    alphabet = [(i, False) for i in range(1, n + 1)] + [(i, True) for i in range(1, n + 1)]
    mats = {(i, False): X[i - 1] for i in range(1, n + 1)}
    mats.update({(i, True): X[i - 1].conj().T for i in range(1, n + 1)})

    half = (max_len + 1) // 2
    products = {(): np.eye(N, dtype=complex)}
    words_by_len = {0: [()]}
    for length in range(1, half + 1):
        words_by_len[length] = []
        for prefix in words_by_len[length - 1]:
            base = products[prefix]
            for letter in alphabet:
                w = prefix + (letter,)
                words_by_len[length].append(w)
                products[w] = base @ mats[letter]

    traces = {w: np.trace(P) / N for w, P in products.items() if len(w) <= max_len}
    for length in range(half + 1, max_len + 1):
        a = length // 2
        b = length - a
        left = words_by_len[a]
        right = words_by_len[b]
        L = np.stack([products[u].ravel() for u in left])
        R = np.stack([products[v].T.ravel() for v in right])
        T = (L @ R.T) / N
        for iu, u in enumerate(left):
            for iv, v in enumerate(right):
                traces[u + v] = T[iu, iv]
    return traces
