import math
from fractions import Fraction

import numpy as np
import pytest

from coarse_clt.core.groups import (
    CommutationGraph,
    FreeGroup,
    OpaqueGroup,
    RightAngledGroup,
    build_group,
)
from coarse_clt.exceptions import ActionException
from coarse_clt.schemas.automaton import GroupSpec
from coarse_clt.schemas.experiment import ActionSpec
from coarse_clt.services.actions import (
    H2_DELTA,
    SANOV_MATRICES,
    CayleyTreeAction,
    HomomorphismAction,
    HyperplaneCountAction,
    MatrixH2Action,
    WordLengthAction,
    build_action,
    stable_translation_ratio,
)

F2 = FreeGroup("ab")
Z2_SPEC = GroupSpec(kind="raag", generators=["x", "y"], commutations=[["x", "y"]])


def letters(group, *words):
    return np.array([group.encode(w.split()) for w in words], dtype=np.int64)


def test_cayley_tree_scalar_values():
    action = CayleyTreeAction(F2)
    assert action.displacement("a b A") == 3.0
    assert action.distance("a", "b") == 2.0
    assert action.gromov_product("a b", "a B") == 1.0
    tau = action.translation_length("a b A")
    assert tau.value == 1.0
    assert tau.proxy == 1.0


def test_cayley_tree_batch_matches_scalar():
    action = CayleyTreeAction(F2)
    rows = letters(F2, "a b A", "a b b", "B a a b")
    words = ["a b A", "a b b", "B a a b"]
    assert list(action.displacements(rows, geodesic=True)) == [3.0, 3.0, 4.0]
    expected = [action.translation_length(w).value for w in words]
    assert list(action.translation_lengths(rows, geodesic=True)) == expected
    assert list(action.translation_lengths(rows)) == expected
    gromov = [action.gromov_product(w, " ".join(F2.inverse(w.split()))) for w in words]
    assert list(action.return_gromov_products(rows, geodesic=True)) == gromov


def test_cayley_tree_needs_free_group():
    with pytest.raises(ActionException):
        CayleyTreeAction(RightAngledGroup(CommutationGraph.from_pairs("ab", [("a", "b")])))


def test_hyperplane_count():
    action = HyperplaneCountAction(F2, "a")
    assert action.displacement("a b a") == 2.0
    assert action.displacement("a A b") == 0.0
    assert action.translation_length("a b A").value == 0.0
    rows = letters(F2, "a b A", "a a b", "b B b")
    assert list(action.displacements(rows, geodesic=True)) == [2.0, 2.0, 0.0]
    assert list(action.translation_lengths(rows, geodesic=True)) == [0.0, 2.0, 0.0]
    assert list(action.return_gromov_products(rows, geodesic=True)) == [1.0, 0.0, 0.0]
    assert action.describe() == {"kind": "hyperplane-count", "delta": 0.0, "letter": "a"}


def test_hyperplane_count_on_raag():
    group = RightAngledGroup(CommutationGraph.from_pairs("abc", [("a", "b")]))
    action = HyperplaneCountAction(group, "a")
    assert action.displacement("a b A") == 0.0
    assert action.displacement("a c A") == 2.0
    with pytest.raises(ActionException):
        HyperplaneCountAction(group, "d")


def test_stable_translation_ratio():
    assert stable_translation_ratio(HyperplaneCountAction(F2, "a"), "a b") == 0.5
    assert stable_translation_ratio(CayleyTreeAction(F2), "a b") == 1.0
    with pytest.raises(ActionException):
        stable_translation_ratio(CayleyTreeAction(F2), "a A")


def test_sanov_matrix_action():
    action = MatrixH2Action(F2, SANOV_MATRICES)
    assert action.delta == H2_DELTA
    assert action.displacement("a") == pytest.approx(math.acosh(3.0), abs=1e-12)
    assert action.displacement("a A") == pytest.approx(0.0, abs=1e-7)
    assert action.translation_length("a").value == 0.0
    assert action.translation_length("a b").value == pytest.approx(2 * math.acosh(3.0), abs=1e-12)


def test_diagonal_matrix_translation():
    action = MatrixH2Action(F2, {"a": [[2, 0], [0, "1/2"]], "b": [[1, 0], [0, 1]]})
    assert action.translation_length("a").value == pytest.approx(2 * math.log(2), abs=1e-12)
    assert action.displacement("a") == pytest.approx(2 * math.log(2), abs=1e-12)


def test_matrix_determinant_is_checked():
    with pytest.raises(ActionException):
        MatrixH2Action(F2, {"a": [[2, 0], [0, 1]], "b": [[1, 0], [0, 1]]})
    with pytest.raises(ActionException):
        MatrixH2Action(F2, {"a": [[1, 0], [0, 1]]})


def test_long_matrix_products_stay_exact():
    action = MatrixH2Action(F2, SANOV_MATRICES)
    product = [[1, 0], [0, 1]]
    ab = [[5, 2], [2, 1]]
    for _ in range(20):
        product = [
            [sum(product[i][k] * ab[k][j] for k in range(2)) for j in range(2)] for i in range(2)
        ]
    exact = math.acosh(sum(v * v for row in product for v in row) / 2)
    row = letters(F2, " ".join(["a b"] * 20))
    assert action.displacements(row)[0] == pytest.approx(exact, rel=1e-9)
    assert action.translation_lengths(row)[0] == pytest.approx(40 * math.acosh(3.0), rel=1e-9)
    long_row = letters(F2, " ".join(["a b"] * 1000))
    assert np.isfinite(action.displacements(long_row)).all()


def test_matrix_batch_gromov_matches_scalar():
    action = MatrixH2Action(F2, SANOV_MATRICES)
    words = ["a b", "a a B", "b A b a"]
    batch = action.return_gromov_products(letters(F2, *words))
    scalar = [action.gromov_product(w, " ".join(F2.inverse(w.split()))) for w in words]
    assert batch == pytest.approx(scalar, abs=1e-9)


def test_homomorphism_to_free_abelian_target():
    action = HomomorphismAction(F2, {"a": "x", "b": "y"}, Z2_SPEC)
    assert action.delta == math.inf
    assert action.image(("a", "B")) == ("x", "Y")
    assert action.displacement("a b A B") == 0.0
    assert action.displacement("a b a") == 3.0
    tau = action.translation_length("a b")
    assert tau.value == 2.0
    assert tau.estimated and tau.monotone


def test_homomorphism_to_free_target():
    target = GroupSpec(kind="free", generators=["x", "y"])
    action = HomomorphismAction(F2, {"a": "x", "b": "x y"}, target)
    assert action.delta == 0.0
    assert action.displacement("A b") == 1.0
    assert action.power_profile(("a", "b")) == [3.0, 3.0, 3.0, 3.0, 3.0, 3.0]


def test_homomorphism_rejects_unknown_letters():
    with pytest.raises(ActionException):
        HomomorphismAction(F2, {"c": "x"}, Z2_SPEC)
    with pytest.raises(ActionException):
        HomomorphismAction(F2, {"a": "z"}, Z2_SPEC)
    action = HomomorphismAction(F2, {"a": "x"}, Z2_SPEC)
    with pytest.raises(ActionException):
        action.displacement("b")


def test_homomorphism_checks_commutation_relators():
    free_target = GroupSpec(kind="free", generators=["a", "b"])
    z2 = build_group(Z2_SPEC)
    with pytest.raises(ActionException, match=r"relator \[x, y\]"):
        HomomorphismAction(z2, {"x": "a", "y": "b"}, free_target)
    action = HomomorphismAction(z2, {"x": "a", "y": "a a"}, free_target)
    assert action.displacement("x Y") == 1.0
    # a relator with an unmapped letter cannot be checked here
    HomomorphismAction(z2, {"x": "a"}, free_target)


def test_homomorphism_checks_coxeter_relators():
    source = build_group(GroupSpec(kind="racg", generators=["s", "t"]))
    with pytest.raises(ActionException, match=r"relator s\^2"):
        HomomorphismAction(source, {"s": "a", "t": "b"}, GroupSpec(kind="free", generators=["a", "b"]))
    target = GroupSpec(kind="racg", generators=["u", "v"], commutations=[["u", "v"]])
    action = HomomorphismAction(source, {"s": "u", "t": "v"}, target)
    assert action.displacement("s t s") == 1.0
    commuting = build_group(GroupSpec(kind="racg", generators=["s", "t"], commutations=[["s", "t"]]))
    with pytest.raises(ActionException, match=r"relator \[s, t\]"):
        HomomorphismAction(
            commuting, {"s": "u", "t": "v"}, GroupSpec(kind="racg", generators=["u", "v"])
        )


def test_word_length_on_opaque_alphabet():
    action = WordLengthAction(OpaqueGroup("xyz"))
    assert action.delta == math.inf
    assert action.displacement("x y z") == 3.0
    rows = np.zeros((2, 5), dtype=np.int64)
    assert list(action.displacements(rows)) == [5.0, 5.0]
    with pytest.raises(ActionException):
        action.translation_length("x")


@pytest.mark.parametrize(
    "spec, kind",
    [
        (ActionSpec(kind="cayley-tree"), "cayley-tree"),
        (ActionSpec(kind="hyperplane-count", params={"v": "b"}), "hyperplane-count"),
        (ActionSpec(kind="matrix-H2", params={"preset": "sanov"}), "matrix-H2"),
        (
            ActionSpec(
                kind="homomorphism-word-metric",
                params={"map": {"a": "x", "b": "y"}, "target": Z2_SPEC.model_dump(exclude_none=True)},
            ),
            "homomorphism-word-metric",
        ),
        (ActionSpec(kind="word-length"), "word-length"),
    ],
)
def test_build_action(spec, kind):
    assert build_action(spec, F2).kind == kind


@pytest.mark.parametrize(
    "spec",
    [
        ActionSpec(kind="horocycle"),
        ActionSpec(kind="hyperplane-count"),
        ActionSpec(kind="matrix-H2"),
        ActionSpec(kind="matrix-H2", params={"preset": "modular"}),
        ActionSpec(kind="homomorphism-word-metric", params={"map": {"a": "x"}}),
        ActionSpec(kind="homomorphism-word-metric", params={"map": {}, "target": {"kind": "lattice"}}),
    ],
)
def test_build_action_errors(spec):
    with pytest.raises(ActionException):
        build_action(spec, F2)


SANOV_EXACT = {
    "a": ((1, 2), (0, 1)),
    "A": ((1, -2), (0, 1)),
    "b": ((1, 0), (2, 1)),
    "B": ((1, 0), (-2, 1)),
}


def random_reduced(rng, length):
    word = []
    while len(word) < length:
        x = F2.letters[int(rng.integers(len(F2.letters)))]
        if not word or x != F2.inverse_letter(word[-1]):
            word.append(x)
    return tuple(word)


def exact_product(word):
    product = ((1, 0), (0, 1))
    for x in word:
        m = SANOV_EXACT[x]
        product = tuple(
            tuple(sum(product[i][k] * m[k][j] for k in range(2)) for j in range(2)) for i in range(2)
        )
    return product


def mobius_distance(matrix):
    """d(i, g·i) from the image point g·i = x + iy and cosh d = (x² + y² + 1)/2y."""
    (a, b), (c, d) = matrix
    q = c * c + d * d
    x, y = Fraction(a * c + b * d, q), Fraction(1, q)
    cosh = (x * x + y * y + 1) / (2 * y)
    if cosh < 2**40:
        return math.acosh(float(cosh))
    return math.log(2) + math.log(cosh.numerator) - math.log(cosh.denominator)


def test_matrix_distance_matches_moebius_images():
    action = MatrixH2Action(F2, SANOV_MATRICES)
    rng = np.random.default_rng(11)
    words = [random_reduced(rng, int(rng.integers(1, 41))) for _ in range(60)]
    for word in words:
        expected = mobius_distance(exact_product(word))
        assert action.displacement(word) == pytest.approx(expected, rel=1e-9, abs=1e-9)
    same_length = [random_reduced(rng, 12) for _ in range(5)]
    batch = action.displacements(letters(F2, *(" ".join(w) for w in same_length)))
    assert batch == pytest.approx([mobius_distance(exact_product(w)) for w in same_length], rel=1e-9)


def tree_and_plane_actions():
    return [CayleyTreeAction(F2), HyperplaneCountAction(F2, "a"), MatrixH2Action(F2, SANOV_MATRICES)]


def test_translation_length_is_conjugation_invariant():
    rng = np.random.default_rng(5)
    for action in tree_and_plane_actions():
        for _ in range(40):
            g = random_reduced(rng, int(rng.integers(1, 9)))
            h = random_reduced(rng, int(rng.integers(1, 5)))
            conjugate = h + g + F2.inverse(h)
            tau = action.translation_length(g).value
            assert action.translation_length(conjugate).value == pytest.approx(tau, abs=1e-9)
            assert tau <= action.displacement(g) + 1e-9


def test_displacement_is_subadditive_and_distance_is_a_metric():
    rng = np.random.default_rng(6)
    for action in tree_and_plane_actions() + [WordLengthAction(F2)]:
        for _ in range(40):
            g, h, k = (random_reduced(rng, int(rng.integers(1, 7))) for _ in range(3))
            assert action.displacement(g + h) <= action.displacement(g) + action.displacement(h) + 1e-9
            assert action.distance(g, h) == pytest.approx(action.distance(h, g), abs=1e-9)
            assert action.distance(g, h) <= action.distance(g, k) + action.distance(k, h) + 1e-9
