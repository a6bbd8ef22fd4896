"""Substitution rules, their fixed points, and point-set realizations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .pointset import PointSet

GOLDEN_ALPHA = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SubstitutionRule:
    """Letter -> word map over single-character letters."""

    images: tuple  # ((letter, image), ...) in alphabet order

    def __post_init__(self):
        alphabet = [a for a, _ in self.images]
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise ConfigError("alphabet letters must be distinct and non-empty")
        for a, img in self.images:
            if len(a) != 1:
                raise ConfigError(f"letters must be single characters, got {a!r}")
            if not img:
                raise ConfigError(f"image of {a!r} is empty")
            bad = set(img) - set(alphabet)
            if bad:
                raise ConfigError(f"image of {a!r} uses letters outside the alphabet: {sorted(bad)}")

    @classmethod
    def from_dict(cls, images: dict) -> SubstitutionRule:
        return cls(tuple((str(k), str(v)) for k, v in images.items()))

    @property
    def alphabet(self) -> list[str]:
        return [a for a, _ in self.images]

    @property
    def mapping(self) -> dict:
        return dict(self.images)

    def __call__(self, word: str) -> str:
        return substitute(self, word)

    def compose(self, other: SubstitutionRule) -> SubstitutionRule:
        """The rule ``self o other`` (apply ``other`` first)."""
        return SubstitutionRule(tuple((a, substitute(self, img)) for a, img in other.images))

    def power(self, n: int) -> SubstitutionRule:
        if n < 1:
            raise ValueError("power must be >= 1")
        out = self
        for _ in range(n - 1):
            out = self.compose(out)
        return out

    def incidence_matrix(self) -> np.ndarray:
        """M[i, j] = number of letter i in the image of letter j."""
        alpha = self.alphabet
        m = np.zeros((len(alpha), len(alpha)), dtype=np.int64)
        for j, (_, img) in enumerate(self.images):
            for i, a in enumerate(alpha):
                m[i, j] = img.count(a)
        return m

    def is_primitive(self, max_power: int = 10) -> bool:
        m = self.incidence_matrix()
        p = m.copy()
        for _ in range(max_power):
            if np.all(p > 0):
                return True
            p = np.minimum(p @ m, 1)  # only positivity matters
        return False


THUE_MORSE = SubstitutionRule((("0", "01"), ("1", "10")))
FIBONACCI = SubstitutionRule((("0", "1"), ("1", "10")))


def substitute(rule: SubstitutionRule, word: str) -> str:
    mapping = rule.mapping
    try:
        return "".join(mapping[c] for c in word)
    except KeyError as exc:
        raise ConfigError(f"letter {exc.args[0]!r} is not in the alphabet {rule.alphabet}") from None


def letter_counts(rule: SubstitutionRule, word: str) -> np.ndarray:
    return np.array([word.count(a) for a in rule.alphabet], dtype=np.int64)


@dataclass(frozen=True)
class TwoSidedWord:
    """Letters on [-len(left), len(right)); the origin sits between them."""

    left: str
    right: str

    @property
    def lo(self) -> int:
        return -len(self.left)

    @property
    def hi(self) -> int:
        return len(self.right)

    def __getitem__(self, i: int) -> str:
        if not self.lo <= i < self.hi:
            raise IndexError(i)
        return self.right[i] if i >= 0 else self.left[len(self.left) + i]

    def restrict(self, lo: int, hi: int) -> TwoSidedWord:
        if lo < self.lo or hi > self.hi or lo > 0 or hi < 0:
            raise IndexError(f"[{lo}, {hi}) not inside [{self.lo}, {self.hi})")
        return TwoSidedWord(self.left[len(self.left) + lo :], self.right[:hi])

    def __str__(self):
        return f"{self.left}|{self.right}"

    def letters(self) -> str:
        return self.left + self.right

    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi)


def two_sided_fixed_point(rule: SubstitutionRule, seed_pair=("0", "0"), generations: int = 4) -> TwoSidedWord:
    """Grow ``left|right`` by ``generations`` applications of the squared rule."""
    left, right = seed_pair
    sq = rule.power(2)
    if not sq(left).endswith(left) or not sq(right).startswith(right):
        raise ConfigError(
            f"seed {left}|{right} is not legal: rule^2({left})={sq(left)!r}, rule^2({right})={sq(right)!r}"
        )
    for _ in range(generations):
        left, right = sq(left), sq(right)
    return TwoSidedWord(left, right)


def substitute_two_sided(rule: SubstitutionRule, word: TwoSidedWord) -> TwoSidedWord:
    return TwoSidedWord(rule(word.left), rule(word.right))


def one_sided_fixed_point(rule: SubstitutionRule, seed: str, length: int) -> str:
    """Prefix of length ``length`` of the fixed point starting with ``seed``."""
    w = seed
    if not rule(seed).startswith(seed):
        raise ConfigError(f"rule({seed!r}) does not start with {seed!r}")
    while len(w) < length:
        nxt = rule(w)
        if len(nxt) == len(w):
            raise ConfigError("word does not grow under the rule")
        w = nxt
    return w[:length]


def _binary_positions(letters: str, offset: int) -> np.ndarray:
    arr = np.frombuffer(letters.encode("ascii"), dtype=np.uint8)
    return np.flatnonzero(arr == ord("1")) + offset


def ones_positions(word, alphabet=None) -> PointSet:
    """Integer positions holding letter ``1``.  A plain string starts at index 0."""
    if isinstance(word, TwoSidedWord):
        letters, offset = word.letters(), word.lo
    else:
        letters, offset = str(word), 0
    letters_used = set(alphabet) if alphabet is not None else set(letters)
    if not letters_used <= {"0", "1"}:
        raise ConfigError(f"ones_positions needs a binary alphabet, got {sorted(letters_used)}")
    pos = _binary_positions(letters, offset)
    return PointSet(pos.astype(float).reshape(-1, 1), pos.reshape(-1, 1), 1)


def geometric_realization(word, lengths: dict) -> PointSet:
    """Left endpoints of consecutive tiles; tile at index 0 starts at 0."""
    for a, ell in lengths.items():
        if not ell > 0:
            raise ConfigError(f"tile length for {a!r} must be positive")
    if isinstance(word, TwoSidedWord):
        right = _tile_starts(word.right, lengths)
        left_len = np.array([lengths[c] for c in word.left[::-1]], dtype=float)
        left = -np.cumsum(left_len)[::-1]
        pts = np.concatenate([left, right])
    else:
        pts = _tile_starts(str(word), lengths)
    return PointSet(pts.reshape(-1, 1), dim=1)


def _tile_starts(letters: str, lengths: dict) -> np.ndarray:
    try:
        ell = np.array([lengths[c] for c in letters], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"no tile length for letter {exc.args[0]!r}") from None
    return np.concatenate([[0.0], np.cumsum(ell)[:-1]]) if len(ell) else np.zeros(0)


def _exact_floor_golden(n: int) -> int:
    """floor(n * (sqrt5 - 1) / 2) in integer arithmetic."""
    if n == 0:
        return 0
    s = math.isqrt(5 * n * n)
    floor_n_sqrt5 = s if n > 0 else -s - 1  # 5 n^2 is never a square for n != 0
    return (floor_n_sqrt5 - n) // 2


def _is_golden(alpha) -> bool:
    return abs(float(alpha) - GOLDEN_ALPHA) < 1e-15


def rotation_sequence(n_range, alpha: float = GOLDEN_ALPHA) -> np.ndarray:
    """v_n = 1 iff frac(n alpha) lies in [1 - alpha, 1), as a uint8 array.

    Values within float drift of the boundary are settled exactly: by integer
    arithmetic in Z[sqrt5] for the golden alpha, otherwise with the float's
    exact rational value.
    """
    if not 0.0 < float(alpha) < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    n = np.asarray(n_range, dtype=np.int64).reshape(-1)
    a = float(alpha)
    frac = np.mod(n.astype(float) * a, 1.0)
    v = (frac >= 1.0 - a).astype(np.uint8)
    tol = np.maximum(1e-9, 64.0 * np.abs(n) * np.finfo(float).eps)
    near = (np.abs(frac - (1.0 - a)) < tol) | (frac < tol) | (frac > 1.0 - tol)
    golden = _is_golden(alpha)
    exact = Fraction(a)
    for i in np.flatnonzero(near):
        k = int(n[i])
        if golden:
            # the sequence has a carry exactly when floor((n+1)alpha) > floor(n alpha)
            v[i] = _exact_floor_golden(k + 1) - _exact_floor_golden(k)
        else:
            f = k * exact - math.floor(k * exact)
            v[i] = 1 if f >= 1 - exact else 0
    return v


def word_from_bits(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def read_rule(config: dict) -> SubstitutionRule:
    """Build a rule from ``rule.<letter> = <image>`` config entries."""
    images = {}
    for key, value in config.items():
        if key.startswith("rule."):
            images[key[5:]] = value.strip().strip('"').strip("'")
    if not images:
        raise ConfigError("no rule.<letter> entries in config")
    return SubstitutionRule.from_dict(dict(sorted(images.items())))


def write_word(word, path) -> None:
    from pathlib import Path

    Path(path).write_text(f"{word}\n", newline="\n")
