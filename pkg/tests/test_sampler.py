from collections import Counter

import numpy as np
import pytest
from scipy import stats

from coarse_clt.core.graph import Edge, GraphStructure, count_table, iter_paths
from coarse_clt.core.groups import OpaqueGroup
from coarse_clt.core.markov import parry_chain, reversed_parry_chain
from coarse_clt.core.spectral import analyze
from coarse_clt.exceptions import BudgetExceededException, SamplingException
from coarse_clt.services.sampler import (
    SamplerState,
    enumerate_sphere,
    index_dtype,
    letter_matrix,
    letters_per_path,
    map_prefix_stratified,
    map_sphere_blocks,
    paths_from_matrix,
    sample_markov,
    sample_prefix_stratified,
    sample_sphere_block,
    sample_sphere_uniform,
    sphere_matrix,
    unrank_path,
)


def test_block_rows_are_accepted_paths(free_rank_two):
    edges = sample_sphere_block(free_rank_two, 12, 500, seed=3)
    assert edges.shape == (500, 12)
    paths = paths_from_matrix(free_rank_two, edges)
    assert all(path.start == 0 for path in paths)
    group = free_rank_two.group
    assert all(group.reduce(path.word()) == path.word() for path in paths)


def test_block_sampling_is_independent_of_jobs(free_rank_two, monkeypatch):
    monkeypatch.setattr("coarse_clt.services.sampler.settings.SAMPLE_BLOCK_SIZE", 256)
    single = sample_sphere_block(free_rank_two, 20, 2000, seed=11, jobs=1)
    threaded = sample_sphere_block(free_rank_two, 20, 2000, seed=11, jobs=4)
    np.testing.assert_array_equal(single, threaded)


def test_streams_and_seeds_differ(free_rank_two):
    base = sample_sphere_block(free_rank_two, 10, 100, seed=1, stream=0)
    assert not np.array_equal(base, sample_sphere_block(free_rank_two, 10, 100, seed=1, stream=1))
    assert not np.array_equal(base, sample_sphere_block(free_rank_two, 10, 100, seed=2, stream=0))
    np.testing.assert_array_equal(base, sample_sphere_block(free_rank_two, 10, 100, seed=1, stream=0))


def test_block_sampling_is_uniform(golden_mean):
    edges = sample_sphere_block(golden_mean, 4, 16_000, seed=5)
    counts = Counter(tuple(row) for row in edges.tolist())
    assert len(counts) == 8
    assert stats.chisquare(list(counts.values())).pvalue > 1e-4


def test_sampling_at_huge_lengths_stays_exact(free_rank_two):
    edges = sample_sphere_block(free_rank_two, 2000, 50, seed=9)
    assert edges.shape == (50, 2000)
    first_letters = Counter(int(row[0]) for row in edges)
    assert set(first_letters) <= {0, 1, 2, 3}


def test_empty_sphere_raises():
    structure = GraphStructure(2, 0, (Edge(0, 0, 1, ("x",)),), OpaqueGroup("x"))
    with pytest.raises(SamplingException):
        sample_sphere_block(structure, 2, 10, seed=0)
    assert sample_sphere_block(structure, 1, 3, seed=0).tolist() == [[0], [0], [0]]


def test_sphere_matrix_matches_enumeration(golden_mean, free_rank_two):
    for structure, n in ((golden_mean, 6), (free_rank_two, 4)):
        matrix = sphere_matrix(structure, n)
        expected = [list(path.edge_indices) for path in enumerate_sphere(structure, n)]
        assert matrix.tolist() == expected


def test_enumeration_budget(free_rank_two):
    with pytest.raises(BudgetExceededException):
        sphere_matrix(free_rank_two, 10, budget=1000)
    with pytest.raises(BudgetExceededException):
        enumerate_sphere(free_rank_two, 10, budget=1000)


def test_unrank_path_is_lexicographic(golden_mean):
    table = count_table(golden_mean, 5)
    expected = list(iter_paths(golden_mean, 0, 5))
    for rank, path in enumerate(expected):
        assert unrank_path(golden_mean, table, 0, 5, rank) == path


def test_single_path_sampler(golden_mean):
    state = SamplerState(golden_mean, seed=4)
    paths = [sample_sphere_uniform(state, 6) for _ in range(50)]
    assert state.position == 50
    assert state.depth == 6
    assert all(p.length == 6 for p in paths)
    again = SamplerState(golden_mean, seed=4)
    assert [sample_sphere_uniform(again, 6) for _ in range(50)] == paths


def test_letter_matrix_handles_empty_input(free_rank_two):
    empty = np.empty((0, 5), dtype=np.int64)
    assert letter_matrix(free_rank_two, empty).shape == (0, 5)
    rows = sample_sphere_block(free_rank_two, 5, 4, seed=0)
    letters = letter_matrix(free_rank_two, rows)
    assert letters.shape == (4, 5)


def test_prefix_stratified_sampling(period_two):
    data = analyze(period_two)
    edges = sample_prefix_stratified(period_two, data, 5, 6000, seed=2)
    assert edges.shape == (6000, 5)
    first = edges[:, 0]
    assert np.mean(first == 1) == pytest.approx(2 / 3, abs=0.03)
    paths = paths_from_matrix(period_two, edges)
    assert all(path.start == 0 for path in paths)


def test_markov_sampling_visits_match_parry_law(golden_mean):
    chain = parry_chain(golden_mean, analyze(golden_mean))
    path = sample_markov(chain, 100_000, seed=8)
    visits = np.bincount([e.source for e in path.edges], minlength=2) / path.length
    assert visits == pytest.approx(chain.pi, abs=0.01)


def test_reversed_markov_sampling_returns_forward_paths(golden_mean):
    chain = reversed_parry_chain(golden_mean, analyze(golden_mean))
    path = sample_markov(chain, 1000, seed=np.random.default_rng(1))
    assert path.length == 1000
    assert "b b" not in " ".join(path.word())


def test_index_dtype_picks_the_smallest_width():
    assert index_dtype(5) == np.int16
    assert index_dtype(40_000) == np.int32
    assert index_dtype(2**31) == np.int64


def test_edge_and_letter_matrices_use_small_integers(free_rank_two):
    edges = sample_sphere_block(free_rank_two, 50, 10, seed=0)
    assert edges.dtype == np.int16
    assert letter_matrix(free_rank_two, edges).dtype == np.int16
    assert sphere_matrix(free_rank_two, 3).dtype == np.int16
    assert letters_per_path(free_rank_two, 50) == 50


def test_mapped_blocks_follow_block_order(free_rank_two, monkeypatch):
    monkeypatch.setattr("coarse_clt.services.sampler.settings.SAMPLE_BLOCK_SIZE", 256)
    shapes = map_sphere_blocks(free_rank_two, 20, 600, seed=4, reduce=lambda e: e.shape)
    assert shapes == [(256, 20), (256, 20), (88, 20)]
    whole = sample_sphere_block(free_rank_two, 20, 600, seed=4)
    for jobs in (1, 3):
        firsts = map_sphere_blocks(free_rank_two, 20, 600, seed=4, reduce=lambda e: e[:, 0], jobs=jobs)
        np.testing.assert_array_equal(np.concatenate(firsts), whole[:, 0])


def test_prefix_blocks_keep_heads_aligned(period_two, monkeypatch):
    monkeypatch.setattr("coarse_clt.services.sampler.settings.SAMPLE_BLOCK_SIZE", 256)
    data = analyze(period_two)
    blocks = map_prefix_stratified(period_two, data, 7, 1000, seed=3, reduce=lambda e: e)
    assert [len(b) for b in blocks] == [256, 256, 256, 232]
    edges = np.concatenate(blocks)
    assert edges.dtype == np.int16
    # composability of every row is checked when the paths are built
    paths = paths_from_matrix(period_two, edges)
    assert all(path.start == 0 and path.length == 7 for path in paths)
    np.testing.assert_array_equal(edges, sample_prefix_stratified(period_two, data, 7, 1000, seed=3))
