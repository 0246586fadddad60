"""
Binary symbolic dynamics of the Lorenz flow.

Orbits are coded by the lobe visited at each successive maximum of ``z``:
``A`` for ``x > 0`` and ``B`` for ``x < 0``. A periodic orbit corresponds to
a cyclic word (a necklace); we store the lexicographically smallest
rotation.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

from sympy import divisors, factorint

from .errors import NonPrimitiveOrbitError, PreconditionError

__all__ = [
    "ALPHABET",
    "canonical",
    "is_primitive",
    "primitive_root",
    "mirror_word",
    "mobius",
    "primitive_necklace_count",
    "complete_library_sizes",
    "primitive_necklaces",
    "words_up_to",
]

ALPHABET = "AB"
_SWAP = str.maketrans("AB", "BA")


def canonical(word: str) -> str:
    """
    Lexicographically smallest rotation of ``word``.
    """
    if not word:
        raise PreconditionError("empty symbol word")
    if set(word) - set(ALPHABET):
        raise PreconditionError(f"word {word!r} is not over the alphabet {ALPHABET}")
    return min(word[i:] + word[:i] for i in range(len(word)))


def primitive_root(word: str) -> str:
    """
    Shortest ``u`` such that ``word == u * k``.
    """
    n = len(word)
    for d in divisors(n):
        if word == word[:d] * (n // d):
            return word[:d]
    return word


def is_primitive(word: str) -> bool:
    return primitive_root(word) == word


def canonical_primitive(word: str) -> str:
    """
    Canonical form of a word that must not be a repetition.
    """
    word = canonical(word)
    if not is_primitive(word):
        raise NonPrimitiveOrbitError(
            f"word {word} repeats {primitive_root(word)}; the orbit is not prime"
        )
    return word


def mirror_word(word: str) -> str:
    """
    Word of the symmetric partner orbit: swap ``A`` and ``B``.
    """
    return canonical(word.translate(_SWAP))


def mobius(n: int) -> int:
    factors = factorint(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


@lru_cache(maxsize=None)
def primitive_necklace_count(n: int, k: int = 2) -> int:
    """
    Number of primitive necklaces of length ``n`` over ``k`` letters,
    ``(1/n) sum_{d | n} mu(d) k^(n/d)``.
    """
    total = sum(mobius(d) * k ** (n // d) for d in divisors(n))
    return total // n


def complete_library_sizes(l_max: int) -> list[int]:
    """
    Cumulative number of prime cycles of symbol length 2..``l_max``.

    The two fixed words ``A`` and ``B`` are excluded; for the Lorenz flow
    they would be the equilibria C+ and C-.
    """
    if l_max < 2:
        raise PreconditionError("l_max must be at least 2")
    sizes = []
    total = 0
    for n in range(2, l_max + 1):
        total += primitive_necklace_count(n)
        sizes.append(total)
    return sizes


@lru_cache(maxsize=None)
def primitive_necklaces(n: int) -> tuple[str, ...]:
    """
    All canonical primitive words of length ``n``, sorted.
    """
    words = {
        canonical(w)
        for w in ("".join(letters) for letters in product(ALPHABET, repeat=n))
    }
    return tuple(sorted(w for w in words if is_primitive(w)))


def words_up_to(l_max: int) -> list[str]:
    """
    Every word of a complete library, ordered by length then lexically.
    """
    return [w for n in range(2, l_max + 1) for w in primitive_necklaces(n)]
