import pytest

from coarse_clt.core.graph import (
    Edge,
    GraphStructure,
    Path,
    count_paths,
    count_table,
    induced_substructure,
    iter_paths,
    make_path,
    path_count_matrix,
    period,
    power_graph,
    reachable_from,
    relabel_vertices,
    strongly_connected_components,
)
from coarse_clt.core.groups import FreeGroup
from coarse_clt.exceptions import (
    AutomatonFormatException,
    BudgetExceededException,
    GraphStructureException,
)

FIBONACCI = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]


def test_golden_mean_counts_are_fibonacci(golden_mean):
    table = count_table(golden_mean, 10)
    assert [row[0] for row in table] == FIBONACCI


def test_free_group_sphere_sizes(free_rank_two):
    for n in range(1, 21):
        assert count_paths(free_rank_two, 0, n) == 4 * 3 ** (n - 1)


def test_counts_stay_exact_past_64_bits(free_rank_two):
    assert count_paths(free_rank_two, 0, 60) == 4 * 3**59


def test_path_count_matrix_matches_table(golden_mean):
    m5 = path_count_matrix(golden_mean, 5)
    assert sum(m5[0]) == FIBONACCI[5]
    assert path_count_matrix(golden_mean, 0) == [[1, 0], [0, 1]]


def test_iter_paths_enumerates_the_sphere_in_order(golden_mean):
    paths = list(iter_paths(golden_mean, 0, 4))
    assert len(paths) == FIBONACCI[4]
    assert [p.edge_indices for p in paths] == sorted(p.edge_indices for p in paths)
    assert all(p.length == 4 and p.start == 0 for p in paths)
    assert all("b b" not in " ".join(p.word()) for p in paths)


def test_iter_paths_length_zero(golden_mean):
    assert list(iter_paths(golden_mean, 1, 0)) == [Path(1)]


def test_path_rejects_non_composable_edges(golden_mean):
    with pytest.raises(GraphStructureException):
        make_path(golden_mean, [1, 1])


def test_path_end_and_word(golden_mean):
    path = make_path(golden_mean, [1, 2, 0])
    assert path.end == 0
    assert path.word() == ("b", "a", "a")


def test_components_and_period(two_cycle, jordan, period_two):
    assert strongly_connected_components(jordan) == [frozenset({0}), frozenset({1})]
    assert period(two_cycle, {0, 1}) == 2
    assert period(period_two, {0, 1, 2}) == 2
    assert reachable_from(jordan, 1) == frozenset({1})


def test_period_of_transient_component_raises(free_rank_two):
    with pytest.raises(GraphStructureException):
        period(free_rank_two, {0})


def test_power_graph_of_two_cycle(two_cycle):
    squared = power_graph(two_cycle, 2)
    assert len(squared.edges) == 2
    assert all(e.source == e.target for e in squared.edges)
    assert squared.edges[0].label == ("a", "b")


def test_power_graph_respects_budget(free_rank_two):
    with pytest.raises(BudgetExceededException):
        power_graph(free_rank_two, 6, budget=100)


def test_induced_substructure_renumbers(doubled_free):
    copy = induced_substructure(doubled_free, range(5, 9))
    assert copy.num_vertices == 4
    assert copy.initial_vertex == 0
    assert len(copy.edges) == 12


def test_relabel_vertices_preserves_counts(golden_mean):
    swapped = relabel_vertices(golden_mean, [1, 0])
    assert swapped.initial_vertex == 1
    assert count_paths(swapped, 1, 8) == count_paths(golden_mean, 0, 8)


def test_structure_rejects_dangling_vertices():
    group = FreeGroup("ab")
    with pytest.raises(AutomatonFormatException):
        GraphStructure(2, 0, (Edge(0, 0, 2, ("a",)),), group)
    with pytest.raises(AutomatonFormatException):
        GraphStructure(2, 3, (), group)


def test_structure_rejects_misnumbered_edges():
    with pytest.raises(GraphStructureException):
        GraphStructure(1, 0, (Edge(1, 0, 0, ("a",)),), FreeGroup("ab"))


def multiply(a, b):
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


@pytest.mark.parametrize("name", ["golden_mean", "free_rank_two", "period_two", "doubled_free"])
def test_path_counts_compose(name, request):
    structure = request.getfixturevalue(name)
    powers = {k: path_count_matrix(structure, k) for k in range(25)}
    for m in range(13):
        for n in range(13):
            assert powers[m + n] == multiply(powers[m], powers[n])


@pytest.mark.parametrize("name", ["golden_mean", "free_rank_two", "two_cycle", "period_two"])
def test_power_graph_counts(name, request):
    structure = request.getfixturevalue(name)
    for p in range(1, 5):
        powered = power_graph(structure, p)
        for v in structure.vertices:
            for n in range(7):
                assert count_paths(powered, v, n) == count_paths(structure, v, p * n)
