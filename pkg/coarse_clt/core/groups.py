"""Groups that edge labels evaluate into.

Letters are generator names (lower case) and their inverses, obtained by
swapping case. The alphabet order is declaration order with every inverse
immediately after its generator; right-angled Coxeter groups use generators
only since each generator is an involution.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from coarse_clt.exceptions import GroupException
from coarse_clt.schemas.automaton import GroupSpec

logger = logging.getLogger(__name__)

Word = Tuple[str, ...]

IDENTITY_TOKENS = frozenset({"1", "e", "ε"})
INVERSE_SUFFIXES = ("^-1", "⁻¹")


class Group(ABC):
    """Alphabet plus whatever word problem the group supports."""

    kind = "opaque"
    has_word_problem = True

    def __init__(self, letters: Sequence[str], spec: Optional[GroupSpec] = None):
        self.letters: Tuple[str, ...] = tuple(letters)
        if len(set(self.letters)) != len(self.letters):
            raise GroupException(f"duplicate letters in alphabet {list(self.letters)}")
        self.letter_index: Dict[str, int] = {x: i for i, x in enumerate(self.letters)}
        self._spec = spec

    def check_letter(self, letter: str) -> str:
        if letter not in self.letter_index:
            raise GroupException(f"unknown letter '{letter}'")
        return letter

    @abstractmethod
    def inverse_letter(self, letter: str) -> str:
        """Return the inverse of a single letter."""

    def inverse(self, word: Sequence[str]) -> Word:
        return tuple(self.inverse_letter(x) for x in reversed(word))

    @abstractmethod
    def normal_form(self, word: Sequence[str]) -> Word:
        """Return the shortlex-least geodesic spelling of the element."""

    @abstractmethod
    def cyclic_reduce(self, word: Sequence[str]) -> Word:
        """Return a geodesic of minimal length in the conjugacy class."""

    def word_length(self, word: Sequence[str]) -> int:
        return len(self.normal_form(word))

    def distance(self, u: Sequence[str], v: Sequence[str]) -> int:
        """Word distance between the elements spelled by u and v."""
        return self.word_length(self.inverse(u) + tuple(v))

    def stable_length(self, word: Sequence[str]) -> int:
        """Translation length of the element in its Cayley graph."""
        return len(self.cyclic_reduce(word))

    @abstractmethod
    def generated_spec(self) -> GroupSpec:
        """Build a document spec describing this group."""

    def to_spec(self) -> GroupSpec:
        return self._spec if self._spec is not None else self.generated_spec()

    @cached_property
    def inverse_indices(self) -> np.ndarray:
        """Letter index of the inverse of every letter (-1 when undefined)."""
        out = np.full(len(self.letters), -1, dtype=np.int64)
        if self.has_word_problem:
            for i, x in enumerate(self.letters):
                out[i] = self.letter_index[self.inverse_letter(x)]
        return out

    def encode(self, word: Sequence[str]) -> np.ndarray:
        return np.array([self.letter_index[self.check_letter(x)] for x in word], dtype=np.int64)

    def decode(self, indices: Iterable[int]) -> Word:
        return tuple(self.letters[int(i)] for i in indices)


class OpaqueGroup(Group):
    """Alphabet with no group semantics; only path combinatorics apply."""

    kind = "opaque"
    has_word_problem = False

    def _unsupported(self, what: str) -> GroupException:
        return GroupException(f"opaque alphabet has no {what}")

    def inverse_letter(self, letter: str) -> str:
        raise self._unsupported("inverses")

    def normal_form(self, word: Sequence[str]) -> Word:
        raise self._unsupported("word problem")

    def cyclic_reduce(self, word: Sequence[str]) -> Word:
        raise self._unsupported("conjugacy problem")

    def generated_spec(self) -> GroupSpec:
        return GroupSpec(kind="opaque", letters=list(self.letters))


def _check_generator_names(generators: Sequence[str]) -> None:
    for g in generators:
        if not g.islower():
            raise GroupException(
                f"generator '{g}' must be lower case so its inverse is '{g.swapcase()}'"
            )
    if len(set(generators)) != len(generators):
        raise GroupException(f"duplicate generators {list(generators)}")


@dataclass(frozen=True)
class CommutationGraph:
    """Ordered generators with a symmetric commutation relation."""

    generators: Tuple[str, ...]
    commutations: FrozenSet[FrozenSet[str]] = frozenset()
    coxeter: bool = False

    def __post_init__(self):
        _check_generator_names(self.generators)
        known = set(self.generators)
        for pair in self.commutations:
            if len(pair) != 2:
                raise GroupException(f"self-adjacent generator in commutation {sorted(pair)}")
            unknown = pair - known
            if unknown:
                raise GroupException(f"commutation references unknown generator {sorted(unknown)}")

    @classmethod
    def from_pairs(
        cls,
        generators: Sequence[str],
        pairs: Iterable[Sequence[str]] = (),
        coxeter: bool = False,
    ) -> "CommutationGraph":
        edges = set()
        for pair in pairs:
            if len(pair) != 2:
                raise GroupException(f"commutation must be a pair, got {list(pair)}")
            edges.add(frozenset(pair))
        return cls(tuple(generators), frozenset(edges), coxeter)

    @property
    def kind(self) -> str:
        return "coxeter" if self.coxeter else "artin"

    def commute(self, x: str, y: str) -> bool:
        return frozenset((x, y)) in self.commutations

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.generators)
        g.add_edges_from(tuple(pair) for pair in self.commutations)
        return g

    def is_join(self) -> bool:
        """True when the generators split into two mutually commuting parts."""
        if len(self.generators) < 2:
            return False
        return not nx.is_connected(nx.complement(self.graph()))


class RightAngledGroup(Group):
    """Right-angled Artin or Coxeter group given by a commutation graph."""

    def __init__(self, graph: CommutationGraph, spec: Optional[GroupSpec] = None):
        self.graph = graph
        letters: List[str] = []
        self._base: Dict[str, str] = {}
        for g in graph.generators:
            letters.append(g)
            self._base[g] = g
            if not graph.coxeter:
                letters.append(g.swapcase())
                self._base[g.swapcase()] = g
        super().__init__(letters, spec)

    @property
    def kind(self) -> str:
        return "racg" if self.graph.coxeter else "raag"

    def base(self, letter: str) -> str:
        return self._base[self.check_letter(letter)]

    def inverse_letter(self, letter: str) -> str:
        self.check_letter(letter)
        return letter if self.graph.coxeter else letter.swapcase()

    def commute_letters(self, x: str, y: str) -> bool:
        """Distinct letters that can be swapped in any word."""
        bx, by = self._base[x], self._base[y]
        return bx != by and self.graph.commute(bx, by)

    def reduce(self, word: Sequence[str]) -> Word:
        """Cancel letters against the last inverse they can be shuffled next to."""
        out: List[str] = []
        for x in word:
            inv = self.inverse_letter(x)
            bx = self._base[x]
            j = len(out) - 1
            cancelled = False
            while j >= 0:
                y = out[j]
                if self._base[y] == bx:
                    if y == inv:
                        del out[j]
                        cancelled = True
                    break
                if not self.graph.commute(bx, self._base[y]):
                    break
                j -= 1
            if not cancelled:
                out.append(x)
        return tuple(out)

    def _front_available(self, word: Sequence[str]) -> List[int]:
        """Positions whose letter commutes with everything before it."""
        positions = []
        seen: List[str] = []
        for i, x in enumerate(word):
            if all(self.commute_letters(x, y) for y in seen):
                positions.append(i)
            if x not in seen:
                seen.append(x)
        return positions

    def _lex_least(self, word: Sequence[str]) -> Word:
        remaining = list(word)
        result: List[str] = []
        while remaining:
            candidates = self._front_available(remaining)
            best = min(candidates, key=lambda i: self.letter_index[remaining[i]])
            result.append(remaining.pop(best))
        return tuple(result)

    def normal_form(self, word: Sequence[str]) -> Word:
        return self._lex_least(self.reduce(word))

    def cyclic_reduce(self, word: Sequence[str]) -> Word:
        current = list(self.reduce(word))
        while True:
            front = self._front_available(current)
            back = [
                len(current) - 1 - i
                for i in self._front_available(list(reversed(current)))
            ]
            back_letters = {current[j]: j for j in back}
            pair = None
            for i in front:
                j = back_letters.get(self.inverse_letter(current[i]))
                if j is not None and j != i:
                    pair = (i, j)
                    break
            if pair is None:
                return self._lex_least(current)
            for k in sorted(pair, reverse=True):
                del current[k]

    def generated_spec(self) -> GroupSpec:
        pairs = sorted(sorted(pair) for pair in self.graph.commutations)
        return GroupSpec(
            kind=self.kind,
            generators=list(self.graph.generators),
            commutations=[list(pair) for pair in pairs],
        )


class FreeGroup(RightAngledGroup):
    """Free group; reductions run in linear time."""

    def __init__(self, generators: Sequence[str], spec: Optional[GroupSpec] = None):
        super().__init__(CommutationGraph(tuple(generators)), spec)

    @property
    def kind(self) -> str:
        return "free"

    def reduce(self, word: Sequence[str]) -> Word:
        out: List[str] = []
        for x in word:
            inv = self.inverse_letter(x)
            if out and out[-1] == inv:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def normal_form(self, word: Sequence[str]) -> Word:
        return self.reduce(word)

    def cyclic_reduce(self, word: Sequence[str]) -> Word:
        w = self.reduce(word)
        k = 0
        while 2 * k + 1 < len(w) and w[k] == self.inverse_letter(w[len(w) - 1 - k]):
            k += 1
        return w[k : len(w) - k]

    def distance(self, u: Sequence[str], v: Sequence[str]) -> int:
        ru, rv = self.reduce(u), self.reduce(v)
        common = 0
        for x, y in zip(ru, rv):
            if x != y:
                break
            common += 1
        return len(ru) + len(rv) - 2 * common

    def generated_spec(self) -> GroupSpec:
        return GroupSpec(kind="free", generators=list(self.graph.generators))


def parse_entry(value: Union[int, float, str]) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise GroupException(f"invalid matrix entry {value!r}: {e}")


def parse_matrix(rows: Sequence[Sequence[Union[int, float, str]]]) -> Tuple[Tuple[Fraction, ...], ...]:
    if len(rows) != 2 or any(len(row) != 2 for row in rows):
        raise GroupException(f"matrix must be 2x2, got {rows}")
    return tuple(tuple(parse_entry(v) for v in row) for row in rows)


class MatrixGroup(FreeGroup):
    """Free group on generators carrying 2x2 matrix images."""

    def __init__(
        self,
        generators: Sequence[str],
        matrices: Dict[str, Sequence[Sequence[Union[int, float, str]]]],
        spec: Optional[GroupSpec] = None,
    ):
        super().__init__(generators, spec)
        missing = [g for g in generators if g not in matrices]
        if missing:
            raise GroupException(f"no matrix given for generators {missing}")
        extra = sorted(set(matrices) - set(generators))
        if extra:
            raise GroupException(f"matrices given for unknown generators {extra}")
        self.raw_matrices = {g: [list(row) for row in matrices[g]] for g in generators}
        self.exact_matrices = {g: parse_matrix(matrices[g]) for g in generators}

    @property
    def kind(self) -> str:
        return "matrix"

    def generated_spec(self) -> GroupSpec:
        return GroupSpec(
            kind="matrix",
            generators=list(self.graph.generators),
            matrices=self.raw_matrices,
        )


def build_group(spec: GroupSpec) -> Group:
    """Instantiate the group described by a document's group field."""
    if spec.kind == "opaque":
        if not spec.letters:
            raise GroupException("opaque group needs a non-empty 'letters' list")
        return OpaqueGroup(spec.letters, spec)
    if not spec.generators:
        raise GroupException(f"{spec.kind} group needs a non-empty 'generators' list")
    if spec.kind == "free":
        return FreeGroup(spec.generators, spec)
    if spec.kind == "matrix":
        if not spec.matrices:
            raise GroupException("matrix group needs 'matrices'")
        return MatrixGroup(spec.generators, spec.matrices, spec)
    graph = CommutationGraph.from_pairs(
        spec.generators, spec.commutations or (), coxeter=spec.kind == "racg"
    )
    return RightAngledGroup(graph, spec)


def _split_compact(token: str) -> List[str]:
    parts: List[str] = []
    i = 0
    while i < len(token):
        for suffix in INVERSE_SUFFIXES:
            if parts and token.startswith(suffix, i):
                parts[-1] += suffix
                i += len(suffix)
                break
        else:
            parts.append(token[i])
            i += 1
    return parts


def parse_word(group: Group, text: Union[str, Sequence[str]]) -> Word:
    """Parse "a b b^-1", "a b b⁻¹" or compact "abB" into a tuple of letters."""
    if isinstance(text, str):
        tokens = text.split()
        if len(tokens) == 1 and tokens[0] not in group.letter_index:
            stem = tokens[0]
            for suffix in INVERSE_SUFFIXES:
                if stem.endswith(suffix):
                    stem = stem[: -len(suffix)]
                    break
            if stem not in group.letter_index and stem not in IDENTITY_TOKENS:
                tokens = _split_compact(tokens[0])
    else:
        tokens = list(text)
    word: List[str] = []
    for token in tokens:
        if token in IDENTITY_TOKENS and token not in group.letter_index:
            continue
        for suffix in INVERSE_SUFFIXES:
            if token.endswith(suffix) and len(token) > len(suffix):
                word.append(group.inverse_letter(group.check_letter(token[: -len(suffix)])))
                break
        else:
            word.append(group.check_letter(token))
    return tuple(word)


def format_word(word: Sequence[str]) -> str:
    return " ".join(word)
