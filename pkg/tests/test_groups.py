import pytest

from coarse_clt.core.groups import (
    CommutationGraph,
    FreeGroup,
    MatrixGroup,
    OpaqueGroup,
    RightAngledGroup,
    build_group,
    parse_word,
)
from coarse_clt.exceptions import GroupException
from coarse_clt.schemas.automaton import GroupSpec


def z2():
    return RightAngledGroup(CommutationGraph.from_pairs("ab", [("a", "b")]))


def dihedral():
    return RightAngledGroup(CommutationGraph.from_pairs("ab", coxeter=True))


def test_free_group_alphabet_order():
    group = FreeGroup("ab")
    assert group.letters == ("a", "A", "b", "B")
    assert group.inverse_letter("B") == "b"
    assert group.kind == "free"


def test_free_reduction_and_cyclic_reduction():
    group = FreeGroup("ab")
    assert group.reduce(("a", "b", "B", "A", "b")) == ("b",)
    assert group.cyclic_reduce(("a", "b", "A")) == ("b",)
    assert group.stable_length(("a", "b", "b", "A")) == 2
    assert group.distance(("a", "b"), ("a", "B")) == 2


def test_raag_normal_form_is_shortlex():
    group = z2()
    assert group.kind == "raag"
    assert group.normal_form(("b", "a")) == ("a", "b")
    assert group.reduce(("a", "b", "A")) == ("b",)
    assert group.word_length(("b", "a", "B", "A")) == 0


def test_raag_cyclic_reduction_uses_commutation():
    group = RightAngledGroup(CommutationGraph.from_pairs("abc", [("a", "b")]))
    assert group.cyclic_reduce(("a", "c", "b", "A")) == ("c", "b")


def test_coxeter_generators_are_involutions():
    group = dihedral()
    assert group.kind == "racg"
    assert group.letters == ("a", "b")
    assert group.normal_form(("a", "a")) == ()
    assert group.stable_length(("a", "b", "a")) == 1


def test_join_detection():
    assert CommutationGraph.from_pairs("ab", [("a", "b")]).is_join()
    assert not CommutationGraph.from_pairs("abc", [("a", "b")]).is_join()
    assert not CommutationGraph.from_pairs("a").is_join()


def test_commutation_graph_rejects_bad_input():
    with pytest.raises(GroupException):
        CommutationGraph.from_pairs("ab", [("a", "c")])
    with pytest.raises(GroupException):
        CommutationGraph.from_pairs("aB")
    with pytest.raises(GroupException):
        CommutationGraph.from_pairs("aa")


def test_parse_word_formats():
    group = FreeGroup("ab")
    assert parse_word(group, "a b^-1") == ("a", "B")
    assert parse_word(group, "a b⁻¹") == ("a", "B")
    assert parse_word(group, "abB") == ("a", "b", "B")
    assert parse_word(group, "1") == ()
    assert parse_word(group, ["a", "A"]) == ("a", "A")
    with pytest.raises(GroupException):
        parse_word(group, "a c")


def test_opaque_group_has_no_word_problem():
    group = OpaqueGroup("xy")
    with pytest.raises(GroupException):
        group.normal_form(("x",))
    assert list(group.inverse_indices) == [-1, -1]


def test_build_group_dispatch():
    assert build_group(GroupSpec(kind="free", generators=["a", "b"])).kind == "free"
    racg = build_group(GroupSpec(kind="racg", generators=["a", "b"], commutations=[["a", "b"]]))
    assert racg.kind == "racg"
    matrix = build_group(
        GroupSpec(kind="matrix", generators=["a"], matrices={"a": [[1, 2], [0, 1]]})
    )
    assert isinstance(matrix, MatrixGroup)
    with pytest.raises(GroupException):
        build_group(GroupSpec(kind="opaque"))
    with pytest.raises(GroupException):
        build_group(GroupSpec(kind="matrix", generators=["a", "b"], matrices={"a": [[1, 0], [0, 1]]}))


def test_to_spec_round_trips_generated_groups():
    spec = z2().to_spec()
    assert spec.kind == "raag"
    assert spec.commutations == [["a", "b"]]
