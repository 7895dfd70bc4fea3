"""Tests for dictionary learning on residual matrices."""

import logging

import numpy as np
import pytest

from sbmca.dictionaries import Dictionary, dct_dictionary
from sbmca.dictlearn import (
    INIT_DCT,
    INIT_RESIDUAL,
    DictLearnOptions,
    _update_atoms,
    dct_atoms,
    init_atoms,
    learn_dictionary,
)
from sbmca.errors import InvalidArgumentError


def _planted(seed, m=20, q=200):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((m, 2))
    atoms /= np.linalg.norm(atoms, axis=0)
    which = rng.integers(0, 2, size=q)
    values = rng.choice([-1.0, 1.0], size=q) * rng.uniform(1.0, 2.0, size=q)
    A = np.zeros((2, q))
    A[which, np.arange(q)] = values
    return atoms, atoms @ A


def _matched_cosines(learned, planted):
    """Greedy one-to-one matching by |cosine|."""
    sims = np.abs(learned.T @ planted)
    out = []
    for _ in range(planted.shape[1]):
        i, j = np.unravel_index(np.argmax(sims), sims.shape)
        out.append(sims[i, j])
        sims[i, :] = -1
        sims[:, j] = -1
    return out


def _monotone_outside_replacements(trace):
    for prev, cur in zip(trace, trace[1:]):
        if cur.dead_atoms == 0 and cur.objective > prev.objective * (1 + 1e-9) + 1e-12:
            return False
    return True


def test_options_validation():
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(num_atoms=0)
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(inner_iters=0)
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(lambda2=0.0)
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(init="ksvd")
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(max_coherence=0.0)
    with pytest.raises(InvalidArgumentError):
        DictLearnOptions(max_coherence=1.5)
    assert DictLearnOptions(max_coherence=None).max_coherence is None
    assert DictLearnOptions().init == INIT_DCT


def test_init_atoms_permutes_columns():
    """With as many atoms as columns, atoms are the normalized columns in some order."""
    rng = np.random.default_rng(0)
    R = rng.standard_normal((5, 4))
    D = init_atoms(R, 4, seed=1)

    normalized = R / np.linalg.norm(R, axis=0)
    matches = np.isclose(np.abs(D.atoms.T @ normalized), 1.0)
    assert matches.sum(axis=1).tolist() == [1, 1, 1, 1]
    assert matches.sum(axis=0).tolist() == [1, 1, 1, 1]


def test_init_atoms_is_seeded():
    R = np.random.default_rng(0).standard_normal((6, 10))
    np.testing.assert_array_equal(init_atoms(R, 3, seed=9).atoms, init_atoms(R, 3, seed=9).atoms)


def test_init_atoms_zero_column_becomes_random_unit():
    """A zero column cannot be normalized, so its atom is a random unit vector."""
    R = np.zeros((4, 1))
    D = init_atoms(R, 1, seed=0)
    assert np.linalg.norm(D.atoms[:, 0]) == pytest.approx(1.0)


def test_zero_residual_is_degenerate():
    """R = 0 returns zero codes and flags the result."""
    result = learn_dictionary(np.zeros((4, 6)), DictLearnOptions(num_atoms=2))
    assert result.degenerate
    assert not np.any(result.code.coeffs)
    assert result.dictionary.d == 2
    assert result.trace == []


def test_rank_one_residual_recovers_direction():
    """R = u v^T with one atom learns +/- u / ||u||."""
    rng = np.random.default_rng(2)
    u = rng.standard_normal(12)
    v = rng.uniform(1.0, 2.0, size=30) * rng.choice([-1.0, 1.0], size=30)
    R = np.outer(u, v)

    result = learn_dictionary(R, DictLearnOptions(num_atoms=1, lambda2=1e-3, inner_iters=5))
    cosine = abs(result.dictionary.atoms[:, 0] @ u) / np.linalg.norm(u)
    assert cosine == pytest.approx(1.0, abs=1e-3)


def test_planted_atoms_are_recovered():
    """Two planted atoms with 1-sparse codes are found in at least 45 of 50 seeded trials."""
    recovered = 0
    for seed in range(50):
        planted, R = _planted(seed)
        opts = DictLearnOptions(num_atoms=2, lambda2=0.05, inner_iters=50, seed=seed, init=INIT_RESIDUAL)
        result = learn_dictionary(R, opts)

        assert _monotone_outside_replacements(result.trace), f"seed {seed}"
        if min(_matched_cosines(result.dictionary.atoms, planted)) >= 0.99:
            recovered += 1
    assert recovered >= 45


def test_atoms_stay_unit_norm():
    rng = np.random.default_rng(3)
    R = rng.standard_normal((10, 40))
    result = learn_dictionary(R, DictLearnOptions(num_atoms=6, lambda2=0.5, inner_iters=5))
    np.testing.assert_allclose(np.linalg.norm(result.dictionary.atoms, axis=0), 1.0, atol=1e-10)
    assert _monotone_outside_replacements(result.trace)


def test_learning_is_deterministic():
    R = np.random.default_rng(4).standard_normal((8, 30))
    opts = DictLearnOptions(num_atoms=4, lambda2=0.2, inner_iters=4, seed=11)
    a = learn_dictionary(R, opts)
    b = learn_dictionary(R, opts)
    np.testing.assert_array_equal(a.dictionary.atoms, b.dictionary.atoms)
    np.testing.assert_array_equal(a.code.coeffs, b.code.coeffs)


def test_dead_atoms_are_reseeded_from_worst_columns():
    """With a huge penalty every code dies and atoms take the largest residual columns."""
    rng = np.random.default_rng(5)
    R = rng.standard_normal((8, 20))
    result = learn_dictionary(R, DictLearnOptions(num_atoms=4, lambda2=1e6, inner_iters=3))

    assert result.replacement_rounds == [1, 2, 3]
    order = np.argsort(-np.sum(R * R, axis=0), kind="stable")
    for k in range(4):
        j = order[k]
        np.testing.assert_allclose(result.dictionary.atoms[:, k], R[:, j] / np.linalg.norm(R[:, j]))


def test_warm_start_dictionary_shape_checked():
    R = np.ones((4, 5))
    wrong = Dictionary(atoms=np.eye(3), labels=("a", "b", "c"))
    with pytest.raises(InvalidArgumentError):
        learn_dictionary(R, DictLearnOptions(num_atoms=3), init_dictionary=wrong)


def test_warns_when_atoms_exceed_columns(caplog):
    R = np.random.default_rng(6).standard_normal((4, 2))
    with caplog.at_level(logging.WARNING, logger="sbmca"):
        learn_dictionary(R, DictLearnOptions(num_atoms=3, inner_iters=1))
    assert any("only 2 columns" in r.message for r in caplog.records)


def test_dct_atoms_pick_heaviest_frequencies_in_order():
    basis = dct_dictionary(16).atoms
    R = np.hstack([
        np.outer(basis[:, 7], [3.0, -1.0]),
        np.outer(basis[:, 3], [0.5, 0.5]),
        np.outer(basis[:, 11], [0.1, 0.0]),
    ])
    D = dct_atoms(R, 2, seed=0)
    np.testing.assert_allclose(D.atoms, basis[:, [3, 7]])


def test_dct_atoms_beyond_block_length_are_unit_norm():
    R = np.random.default_rng(7).standard_normal((4, 12))
    D = dct_atoms(R, 6, seed=0)
    assert D.atoms.shape == (4, 6)
    np.testing.assert_allclose(np.linalg.norm(D.atoms, axis=0), 1.0)
    np.testing.assert_allclose(np.abs(D.atoms[:, :4].T @ D.atoms[:, :4]), np.eye(4), atol=1e-12)


def test_atom_update_rescale_preserves_product():
    """With the rescale applied the atom's contribution equals the least-squares update."""
    rng = np.random.default_rng(8)
    R = rng.standard_normal((6, 9))
    row = rng.uniform(0.5, 2.0, size=9)
    D = np.eye(6)[:, :1].copy()
    A = row[None, :].copy()
    E = R - D @ A

    dead = _update_atoms(D, A, E, lam=0.0, threshold=1e-8)

    direction = R @ row / (row @ row)
    assert dead == []
    np.testing.assert_allclose(np.outer(D[:, 0], A[0]), np.outer(direction, row), atol=1e-12)
    np.testing.assert_allclose(E, R - D @ A, atol=1e-12)


def test_atom_update_keeps_row_when_rescale_raises_objective():
    """A growing scale with a large penalty keeps the row; only the direction moves."""
    u = np.array([0.6, 0.8, 0.0])
    q = 5
    R = 3.0 * np.outer(u, np.ones(q))
    D = np.array([[0.0], [0.0], [1.0]])
    A = np.ones((1, q))
    E = R - D @ A

    before = np.sum(E * E) + 5.0 * np.sum(np.abs(A))
    _update_atoms(D, A, E, lam=5.0, threshold=1e-8)
    after = np.sum(E * E) + 5.0 * np.sum(np.abs(A))

    np.testing.assert_allclose(D[:, 0], u)
    np.testing.assert_array_equal(A, np.ones((1, q)))
    np.testing.assert_allclose(E, 2.0 * np.outer(u, np.ones(q)))
    assert after <= before


def test_coherence_guard_rejects_atom_drifting_into_reference():
    reference = np.eye(4)[:, :1]
    target = np.array([1.0, 0.1, 0.0, 0.0])
    R = np.outer(target, np.ones(6))
    D = np.eye(4)[:, 1:2].copy()
    A = np.ones((1, 6))
    E = R - D @ A
    E_before, D_before = E.copy(), D.copy()

    _update_atoms(D, A, E, lam=0.0, threshold=1e-8, reference=reference, max_coherence=0.5)

    np.testing.assert_array_equal(D, D_before)
    np.testing.assert_array_equal(A, np.ones((1, 6)))
    np.testing.assert_array_equal(E, E_before)


def test_learned_atoms_stay_incoherent_with_reference():
    """Atoms learned next to a reference dictionary respect max_coherence."""
    rng = np.random.default_rng(9)
    m, q = 16, 120
    spike = np.zeros(m)
    spike[5] = 1.0
    smooth = dct_dictionary(m).atoms[:, :4] @ rng.standard_normal((4, q))
    R = smooth + np.outer(spike, rng.uniform(0.5, 1.5, size=q) * (rng.random(q) < 0.3))
    reference = Dictionary(atoms=spike[:, None], labels=("spike",))

    opts = DictLearnOptions(num_atoms=6, lambda2=0.05, inner_iters=10, max_coherence=0.5)
    result = learn_dictionary(R, opts, reference=reference)

    assert np.max(np.abs(reference.atoms.T @ result.dictionary.atoms)) <= 0.5 + 1e-12
    assert _monotone_outside_replacements(result.trace)


def test_reference_row_count_checked():
    wrong = Dictionary(atoms=np.eye(3), labels=("a", "b", "c"))
    with pytest.raises(InvalidArgumentError):
        learn_dictionary(np.ones((4, 5)), DictLearnOptions(num_atoms=2), reference=wrong)
