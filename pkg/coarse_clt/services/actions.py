"""Isometric actions G ↷ X evaluated on words.

Every action answers three questions about a word g: the displacement
d(o, go), Gromov products at the basepoint, and the translation length. Batch
methods take integer letter matrices (one row per sample, letter indices of
the group) and are vectorized where the rows are known to be geodesic.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from coarse_clt.config import settings
from coarse_clt.core.graph import GraphStructure
from coarse_clt.core.groups import (
    FreeGroup,
    Group,
    RightAngledGroup,
    Word,
    build_group,
    format_word,
    parse_matrix,
    parse_word,
)
from coarse_clt.exceptions import ActionException, CombingException, GroupException
from coarse_clt.schemas.automaton import GroupSpec
from coarse_clt.schemas.experiment import ActionSpec
from coarse_clt.services.combings import (
    free_group_combing,
    geodesic_representative,
    raag_shortlex_combing,
)

logger = logging.getLogger(__name__)

WordLike = Union[str, Sequence[str]]

SANOV_MATRICES = {"a": [[1, 2], [0, 1]], "b": [[1, 0], [2, 1]]}
H2_DELTA = math.log(1.0 + math.sqrt(2.0))
RESCALE_THRESHOLD = 1e12
LOG_COSH_CUTOFF = 20.0


@dataclass(frozen=True)
class TranslationLength:
    """Kind-specific translation length plus the Gromov-product proxy d(g²) - d(g)."""

    value: float
    proxy: float
    estimated: bool = False
    monotone: Optional[bool] = None


class IsometricAction(ABC):
    kind: str = ""

    def __init__(self, group: Group, delta: float = 0.0):
        self.group = group
        self.delta = delta

    def word(self, g: WordLike) -> Word:
        try:
            return parse_word(self.group, g)
        except GroupException as e:
            raise ActionException(e.detail)

    def _inverse(self, w: Word) -> Word:
        if not self.group.has_word_problem:
            raise ActionException(f"{self.kind} action on an opaque alphabet has no inverses")
        return self.group.inverse(w)

    @abstractmethod
    def _displacement(self, w: Word) -> float:
        """d(o, go) for a parsed word."""

    @abstractmethod
    def _translation(self, w: Word) -> float:
        """Exact (or estimated) translation length for a parsed word."""

    def displacement(self, g: WordLike) -> float:
        return self._displacement(self.word(g))

    def distance(self, g: WordLike, h: WordLike) -> float:
        """d(go, ho) = d(o, g⁻¹h o)."""
        return self._displacement(self._inverse(self.word(g)) + self.word(h))

    def _gromov(self, g: Word, h: Word) -> float:
        value = 0.5 * (
            self._displacement(g) + self._displacement(h)
            - self._displacement(self._inverse(g) + h)
        )
        return max(value, 0.0)

    def gromov_product(self, g: WordLike, h: WordLike) -> float:
        """(go, ho)_o, clamped at zero against rounding."""
        return self._gromov(self.word(g), self.word(h))

    def translation_length(self, g: WordLike) -> TranslationLength:
        w = self.word(g)
        proxy = self._displacement(w) - 2.0 * self._gromov(w, self._inverse(w))
        return TranslationLength(self._translation(w), proxy)

    def _rows(self, letters: np.ndarray) -> List[Word]:
        return [self.group.decode(row) for row in np.asarray(letters)]

    def displacements(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        """Displacement of every row of a letter matrix."""
        return np.array([self._displacement(w) for w in self._rows(letters)], dtype=float)

    def translation_lengths(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        return np.array([self._translation(w) for w in self._rows(letters)], dtype=float)

    def return_gromov_products(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        """(go, g⁻¹o)_o for every row."""
        return np.array(
            [self._gromov(w, self._inverse(w)) for w in self._rows(letters)], dtype=float
        )

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "delta": self.delta}


def _require_free(group: Group, kind: str) -> FreeGroup:
    if not isinstance(group, FreeGroup):
        raise ActionException(f"{kind} action needs a free group, got {group.kind}")
    return group


def _cancellation_depth(letters: np.ndarray, inverse_indices: np.ndarray) -> np.ndarray:
    """Number of letters stripped from each end by cyclic reduction of reduced rows."""
    half = letters.shape[1] // 2
    if half == 0:
        return np.zeros(letters.shape[0], dtype=np.int64)
    matches = letters[:, :half] == inverse_indices[letters[:, ::-1][:, :half]]
    return np.cumprod(matches, axis=1).sum(axis=1)


class CayleyTreeAction(IsometricAction):
    """Free group acting on its Cayley tree; d(o, go) = ‖g‖."""

    kind = "cayley-tree"

    def __init__(self, group: Group):
        super().__init__(_require_free(group, self.kind), 0.0)

    def _displacement(self, w: Word) -> float:
        return float(len(self.group.reduce(w)))

    def _translation(self, w: Word) -> float:
        return float(len(self.group.cyclic_reduce(w)))

    def displacements(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not geodesic:
            return super().displacements(letters)
        return np.full(letters.shape[0], float(letters.shape[1]))

    def translation_lengths(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not geodesic:
            return super().translation_lengths(letters)
        k = _cancellation_depth(letters, self.group.inverse_indices)
        return (letters.shape[1] - 2 * k).astype(float)

    def return_gromov_products(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not geodesic:
            return super().return_gromov_products(letters)
        return _cancellation_depth(letters, self.group.inverse_indices).astype(float)


class HyperplaneCountAction(IsometricAction):
    """Bass-Serre tree of the splitting dual to a generator v.

    d(o, go) is the number of v^{±1} in a geodesic spelling of g, which does
    not depend on the spelling chosen.
    """

    kind = "hyperplane-count"

    def __init__(self, group: Group, letter: str):
        if not isinstance(group, RightAngledGroup):
            raise ActionException(
                f"hyperplane-count action needs a free or right-angled group, got {group.kind}"
            )
        if letter not in group.graph.generators:
            raise ActionException(f"unknown hyperplane generator '{letter}'")
        super().__init__(group, 0.0)
        self.letter = letter
        self._targets = {letter, group.inverse_letter(letter)}
        self._mask = np.array([x in self._targets for x in group.letters])

    def _count(self, w: Sequence[str]) -> int:
        return sum(1 for x in w if x in self._targets)

    def _displacement(self, w: Word) -> float:
        return float(self._count(self.group.reduce(w)))

    def _translation(self, w: Word) -> float:
        return float(self._count(self.group.cyclic_reduce(w)))

    def _vectorized(self, geodesic: bool) -> bool:
        return geodesic and isinstance(self.group, FreeGroup)

    def displacements(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not geodesic:
            return super().displacements(letters)
        return self._mask[letters].sum(axis=1).astype(float)

    def translation_lengths(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not self._vectorized(geodesic):
            return super().translation_lengths(letters)
        hits = self._mask[letters]
        k = _cancellation_depth(letters, self.group.inverse_indices)
        positions = np.arange(letters.shape[1])
        n = letters.shape[1]
        inside = (positions[None, :] >= k[:, None]) & (positions[None, :] < (n - k)[:, None])
        return (hits & inside).sum(axis=1).astype(float)

    def return_gromov_products(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if not self._vectorized(geodesic):
            return super().return_gromov_products(letters)
        hits = self._mask[letters]
        k = _cancellation_depth(letters, self.group.inverse_indices)
        prefix = np.arange(letters.shape[1])[None, :] < k[:, None]
        return (hits & prefix).sum(axis=1).astype(float)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "delta": self.delta, "letter": self.letter}


class WordLengthAction(IsometricAction):
    """G acting on its own Cayley graph; on opaque alphabets the path length."""

    kind = "word-length"

    def __init__(self, group: Group, delta: Optional[float] = None):
        if delta is None:
            delta = 0.0 if isinstance(group, FreeGroup) else math.inf
        super().__init__(group, delta)

    def _displacement(self, w: Word) -> float:
        if not self.group.has_word_problem:
            return float(len(w))
        return float(self.group.word_length(w))

    def _translation(self, w: Word) -> float:
        if not self.group.has_word_problem:
            raise ActionException("translation length needs a group with a word problem")
        return float(self.group.stable_length(w))

    def displacements(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        if geodesic or not self.group.has_word_problem:
            return np.full(letters.shape[0], float(letters.shape[1]))
        return super().displacements(letters)


def _check_unimodular(letter: str, matrix: Tuple[Tuple[Fraction, ...], ...]) -> None:
    (a, b), (c, d) = matrix
    det = a * d - b * c
    if det != 1:
        raise ActionException(f"matrix for '{letter}' has determinant {det}, expected 1")


def _log_cosh(sq_norm: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """log cosh d = 2s + log(‖P‖²/2) for P scaled down by e^s."""
    return 2.0 * scale + np.log(sq_norm / 2.0)


def _distance_from_log_cosh(log_x: np.ndarray) -> np.ndarray:
    far = log_x > LOG_COSH_CUTOFF
    out = np.empty_like(log_x)
    out[far] = log_x[far] + math.log(2.0)
    near = np.maximum(np.exp(log_x[~far]), 1.0)
    out[~far] = np.arccosh(near)
    return out


class MatrixH2Action(IsometricAction):
    """Free group acting on the upper half-plane through unit-determinant matrices.

    Basepoint i: cosh d(i, gi) = (a² + b² + c² + d²)/2. Long products are kept
    as a normalized matrix and a log scale, so words of length in the
    thousands stay finite.
    """

    kind = "matrix-H2"

    def __init__(self, group: Group, matrices: Dict[str, Sequence[Sequence[Union[int, float, str]]]]):
        free = _require_free(group, self.kind)
        super().__init__(free, H2_DELTA)
        try:
            exact = {g: parse_matrix(matrices[g]) for g in free.graph.generators if g in matrices}
        except GroupException as e:
            raise ActionException(e.detail)
        missing = [g for g in free.graph.generators if g not in exact]
        if missing:
            raise ActionException(f"no matrix for generators {missing}")
        stack = np.zeros((len(free.letters), 2, 2))
        for g, m in exact.items():
            _check_unimodular(g, m)
            (a, b), (c, d) = m
            stack[free.letter_index[g]] = [[float(a), float(b)], [float(c), float(d)]]
            stack[free.letter_index[free.inverse_letter(g)]] = [
                [float(d), float(-b)],
                [float(-c), float(a)],
            ]
        self.exact_matrices = exact
        self.letter_matrices = stack

    def _products(self, letters: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Row products P with log scales s, true product = e^s P."""
        letters = np.atleast_2d(letters)
        rows = letters.shape[0]
        product = np.broadcast_to(np.eye(2), (rows, 2, 2)).copy()
        scale = np.zeros(rows)
        for j in range(letters.shape[1]):
            product = product @ self.letter_matrices[letters[:, j]]
            top = np.abs(product).max(axis=(1, 2))
            big = top > RESCALE_THRESHOLD
            if big.any():
                product[big] /= top[big][:, None, None]
                scale[big] += np.log(top[big])
        return product, scale

    @staticmethod
    def _distances(product: np.ndarray, scale: np.ndarray) -> np.ndarray:
        sq_norm = (product**2).sum(axis=(1, 2))
        exact = scale == 0.0
        out = np.empty(len(scale))
        out[exact] = np.arccosh(np.maximum(sq_norm[exact] / 2.0, 1.0))
        if (~exact).any():
            out[~exact] = _distance_from_log_cosh(_log_cosh(sq_norm[~exact], scale[~exact]))
        return out

    @staticmethod
    def _translations(product: np.ndarray, scale: np.ndarray) -> np.ndarray:
        trace = np.abs(product[:, 0, 0] + product[:, 1, 1])
        out = np.zeros(len(scale))
        exact = scale == 0.0
        hyperbolic = exact & (trace > 2.0)
        out[hyperbolic] = 2.0 * np.arccosh(trace[hyperbolic] / 2.0)
        scaled = ~exact & (trace > 0.0)
        if scaled.any():
            log_half = np.log(trace[scaled] / 2.0) + scale[scaled]
            out[scaled] = np.where(
                log_half > LOG_COSH_CUTOFF,
                2.0 * (log_half + math.log(2.0)),
                2.0 * np.arccosh(np.maximum(np.exp(log_half), 1.0)),
            )
        return out

    def _encode(self, w: Word) -> np.ndarray:
        return np.array([[self.group.letter_index[x] for x in w]], dtype=np.int64).reshape(1, len(w))

    def _displacement(self, w: Word) -> float:
        return float(self._distances(*self._products(self._encode(w)))[0])

    def _translation(self, w: Word) -> float:
        return float(self._translations(*self._products(self._encode(w)))[0])

    def displacements(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        return self._distances(*self._products(letters))

    def translation_lengths(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        return self._translations(*self._products(letters))

    def return_gromov_products(self, letters: np.ndarray, geodesic: bool = False) -> np.ndarray:
        """½(2d(g) - d(g²)), using d(g⁻¹) = d(g) and d(g, g⁻¹) = d(g²)."""
        product, scale = self._products(letters)
        once = self._distances(product, scale)
        twice = self._distances(product @ product, 2.0 * scale)
        return np.maximum(0.5 * (2.0 * once - twice), 0.0)

    def describe(self) -> Dict[str, Any]:
        matrices = {
            g: [[str(v) for v in row] for row in m] for g, m in self.exact_matrices.items()
        }
        return {"kind": self.kind, "delta": self.delta, "matrices": matrices}


def target_combing(group: Group) -> GraphStructure:
    """Built-in geodesic combing for a free or right-angled target group."""
    if isinstance(group, FreeGroup):
        return free_group_combing(len(group.graph.generators), group.graph.generators)
    if isinstance(group, RightAngledGroup):
        return raag_shortlex_combing(group.graph)
    raise ActionException(f"no built-in combing for {group.kind} target groups")


class HomomorphismAction(IsometricAction):
    """G → H followed by the word metric of H read off H's built-in combing."""

    kind = "homomorphism-word-metric"

    def __init__(
        self,
        group: Group,
        mapping: Dict[str, str],
        target: GroupSpec,
        delta: Optional[float] = None,
        cycle_power: Optional[int] = None,
    ):
        if not group.has_word_problem:
            raise ActionException("homomorphism action needs a source group with inverses")
        try:
            self.target = build_group(target)
        except GroupException as e:
            raise ActionException(f"invalid target group: {e.detail}")
        if delta is None:
            delta = 0.0 if isinstance(self.target, FreeGroup) else math.inf
        super().__init__(group, delta)
        self.combing = target_combing(self.target)
        self.cycle_power = settings.CYCLE_POWER if cycle_power is None else cycle_power
        self.images: Dict[str, Word] = {}
        for letter, image in mapping.items():
            if letter not in group.letter_index:
                raise ActionException(f"map references unknown letter '{letter}'")
            try:
                self.images[letter] = parse_word(self.target, image)
            except GroupException as e:
                raise ActionException(f"invalid image of '{letter}': {e.detail}")
        for letter, image in list(self.images.items()):
            inverse = group.inverse_letter(letter)
            self.images.setdefault(inverse, self.target.inverse(image))
        self._check_relations(group)

    def _check_relations(self, group: Group) -> None:
        """Raise unless the images satisfy the defining relators of the source."""
        if not isinstance(group, RightAngledGroup) or isinstance(group, FreeGroup):
            return
        relators: List[Tuple[str, Word]] = []
        for pair in sorted(sorted(pair) for pair in group.graph.commutations):
            x, y = pair
            if x in self.images and y in self.images:
                commutator = (x, y, group.inverse_letter(x), group.inverse_letter(y))
                relators.append((f"[{x}, {y}]", self.image(commutator)))
        if group.graph.coxeter:
            for g in group.graph.generators:
                if g in self.images:
                    relators.append((f"{g}^2", self.image((g, g))))
        for name, word in relators:
            try:
                residue = self.target.normal_form(word)
            except GroupException as e:
                raise ActionException(f"cannot check relator {name} in the target: {e.detail}")
            if residue:
                raise ActionException(
                    f"map is not a homomorphism: relator {name} goes to {format_word(residue)}"
                )

    def image(self, w: Sequence[str]) -> Word:
        out: List[str] = []
        for x in w:
            if x not in self.images:
                raise ActionException(f"unmapped letter '{x}'")
            out.extend(self.images[x])
        return tuple(out)

    def _displacement(self, w: Word) -> float:
        try:
            return float(geodesic_representative(self.combing, self.image(w)).length)
        except CombingException as e:
            raise ActionException(e.detail)

    def power_profile(self, w: Word) -> List[float]:
        """d(o, g^(2^k) o)/2^k for 2^k up to the cycle power."""
        profile = []
        power = 1
        while power <= self.cycle_power:
            profile.append(self._displacement(w * power) / power)
            power *= 2
        return profile

    def _translation(self, w: Word) -> float:
        return self.power_profile(w)[-1]

    def translation_length(self, g: WordLike) -> TranslationLength:
        w = self.word(g)
        profile = self.power_profile(w)
        proxy = self._displacement(w) - 2.0 * self._gromov(w, self._inverse(w))
        monotone = all(b <= a + 1e-12 for a, b in zip(profile, profile[1:]))
        if not monotone:
            logger.warning(f"power profile {profile} is not nonincreasing")
        return TranslationLength(profile[-1], proxy, estimated=True, monotone=monotone)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "delta": self.delta,
            "target": self.target.to_spec().model_dump(exclude_none=True),
            "cycle_power": self.cycle_power,
        }


def stable_translation_ratio(action: IsometricAction, g: WordLike) -> float:
    """τ_X(g)/τ_G(g); constant in g when the displacement has zero variance."""
    w = action.word(g)
    word_translation = action.group.stable_length(w)
    if word_translation == 0:
        raise ActionException(f"'{' '.join(w)}' has zero stable word length")
    return action._translation(w) / word_translation


def _matrices_param(group: Group, params: Dict[str, Any]) -> Dict[str, Any]:
    if "matrices" in params:
        return params["matrices"]
    preset = params.get("preset")
    if preset == "sanov":
        generators = getattr(getattr(group, "graph", None), "generators", ())
        if len(generators) != 2:
            raise ActionException("the sanov preset needs a rank 2 free group")
        return {g: SANOV_MATRICES[s] for g, s in zip(generators, ("a", "b"))}
    if preset is not None:
        raise ActionException(f"unknown matrix preset '{preset}'")
    matrices = getattr(group, "raw_matrices", None)
    if not matrices:
        raise ActionException("matrix-H2 action needs 'matrices', a preset, or a matrix group")
    return matrices


def build_action(spec: ActionSpec, group: Group) -> IsometricAction:
    """Instantiate the action an experiment config asks for."""
    params = spec.params
    if spec.kind == "cayley-tree":
        return CayleyTreeAction(group)
    if spec.kind == "hyperplane-count":
        letter = params.get("letter", params.get("v"))
        if letter is None:
            raise ActionException("hyperplane-count action needs a 'letter' parameter")
        return HyperplaneCountAction(group, letter)
    if spec.kind == "matrix-H2":
        return MatrixH2Action(group, _matrices_param(group, params))
    if spec.kind == "homomorphism-word-metric":
        if "map" not in params or "target" not in params:
            raise ActionException("homomorphism action needs 'map' and 'target' parameters")
        try:
            target = GroupSpec.model_validate(params["target"])
        except ValidationError as e:
            raise ActionException(f"invalid target group: {e.errors()[0]['msg']}")
        return HomomorphismAction(group, params["map"], target, params.get("delta"))
    if spec.kind == "word-length":
        return WordLengthAction(group, params.get("delta"))
    raise ActionException(f"unknown action kind '{spec.kind}'")
