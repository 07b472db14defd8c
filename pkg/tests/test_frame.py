import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import ortho_group

from axitomo.frame import (
    FilterBank,
    analysis,
    extract_patches,
    frame_objective,
    hard_threshold,
    learn_filter_bank,
    procrustes_update,
    spectral_initial_bank,
    synthesis,
)


def random_bank(r, seed):
    Q = ortho_group.rvs(r * r, random_state=seed)
    return FilterBank(r, Q / r)


def piecewise_image(shape=(32, 32)):
    img = np.zeros(shape)
    img[4:20, 6:26] = 1.0
    img[10:14, 10:30] = 0.5
    img[24:, :8] = 2.0
    return img


def test_patches_constant_and_r1():
    G = extract_patches(np.full((5, 6), 3.5), 3)
    assert G.shape == (9, 30) and np.all(G == 3.5)
    img = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(extract_patches(img, 1), img.reshape(1, -1))


def test_patch_corner_oracle():
    img = np.arange(16.0).reshape(4, 4)
    G = extract_patches(img, 3)
    # pixel (0, 0) is column 0; neighbourhood rows -1..1, cols -1..1 with wrap
    expected = [img[(a) % 4, (b) % 4] for a in (-1, 0, 1) for b in (-1, 0, 1)]
    assert np.array_equal(G[:, 0], expected)
    # every column, by index arithmetic
    for pix in range(16):
        i, j = divmod(pix, 4)
        ref = [img[(i + a) % 4, (j + b) % 4] for a in (-1, 0, 1) for b in (-1, 0, 1)]
        assert np.array_equal(G[:, pix], ref)


@pytest.mark.parametrize("r,shape", [(2, (5, 5)), (0, (5, 5)), (7, (5, 9))])
def test_patch_errors(r, shape):
    with pytest.raises(ValueError):
        extract_patches(np.zeros(shape), r)


def test_averaging_bank_on_constant_image():
    r = 3
    bank = spectral_initial_bank(r)
    V = analysis(bank, np.full((6, 6), 2.0))
    for ch in V:
        assert np.allclose(ch, ch.flat[0], atol=1e-14)
    # channel 0 is the 3x3 mean filter; every other channel has zero sum
    assert np.allclose(V[0], 2.0, rtol=1e-13)
    assert np.allclose(V[1:], 0.0, atol=1e-13)
    assert np.all(analysis(bank, np.zeros((6, 6))) == 0)


def test_analysis_is_matrix_product():
    rng = np.random.default_rng(1)
    img = rng.standard_normal((8, 8))
    bank = random_bank(3, 2)
    V = analysis(bank, img)
    ref = (bank.B @ extract_patches(img, 3)).reshape(9, 8, 8)
    assert np.max(np.abs(V - ref)) <= 1e-12
    # correlation form, channel by channel
    for i, filt in enumerate(bank.filters):
        corr = np.zeros((8, 8))
        for a in range(3):
            for b in range(3):
                corr += filt[a, b] * np.roll(img, (1 - a, 1 - b), axis=(0, 1))
        assert np.max(np.abs(corr - V[i])) <= 1e-12


def test_synthesis_adjoint_pairs():
    rng = np.random.default_rng(4)
    bank = random_bank(3, 5)
    for _ in range(20):
        g = rng.standard_normal((9, 7))
        v = rng.standard_normal((9, 9, 7))
        lhs = np.sum(analysis(bank, g) * v)
        rhs = np.sum(g * synthesis(bank, v))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_synthesis_explicit_form():
    rng = np.random.default_rng(9)
    bank = random_bank(3, 3)
    v = rng.standard_normal((9, 8, 8))
    P = bank.B.T @ v.reshape(9, -1)
    ref = np.zeros((8, 8))
    for pix in range(64):
        i, j = divmod(pix, 8)
        for k, (a, b) in enumerate((a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)):
            ref[(i + a) % 8, (j + b) % 8] += P[k, pix]
    assert np.max(np.abs(synthesis(bank, v) - ref)) <= 1e-12


def test_synthesis_errors_and_zero():
    bank = spectral_initial_bank(3)
    with pytest.raises(ValueError):
        synthesis(bank, np.zeros((4, 5, 5)))
    with pytest.raises(ValueError):
        synthesis(bank, np.zeros((9, 5)))
    assert np.all(synthesis(bank, np.zeros((9, 5, 5))) == 0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1, 3, 5]), st.integers(5, 20), st.integers(5, 20), st.integers(0, 2 ** 31 - 1))
def test_perfect_reconstruction(r, h, w, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((h, w))
    bank = random_bank(r, seed % 1000) if r > 1 else FilterBank(1, np.ones((1, 1)))
    rec = synthesis(bank, analysis(bank, g))
    assert np.max(np.abs(rec - g)) <= 1e-10 * np.max(np.abs(g))


def test_threshold_examples():
    out = hard_threshold(np.array([0.5, -0.2, 0.05]), 0.1)
    assert np.array_equal(out, [0.5, -0.2, 0.0])
    x = np.array([0.0, 1.0, -3.0, 1e-300])
    assert np.array_equal(hard_threshold(x, 0.0), x)
    assert np.array_equal(hard_threshold(hard_threshold(x, 0.5), 0.5), hard_threshold(x, 0.5))
    assert hard_threshold(np.array([0.1]), 0.1)[0] == 0.0
    with pytest.raises(ValueError):
        hard_threshold(x, -1.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-2, 2)), st.floats(0.0, 1.5))
def test_threshold_is_l0_prox(w, thresh):
    out = hard_threshold(w, thresh)
    cost = lambda v: np.sum((v - w) ** 2) + thresh ** 2 * np.count_nonzero(v)
    best = min(cost(np.where(np.array(mask), w, 0.0))
               for mask in itertools.product([False, True], repeat=w.size))
    assert cost(out) <= best + 1e-12


def test_procrustes_exact_recovery():
    rng = np.random.default_rng(0)
    B0 = random_bank(3, 7)
    G = rng.standard_normal((9, 200))
    V = B0.B @ G
    bank = procrustes_update(V, G)
    assert bank.constraint_error() <= 1e-10
    obj = np.sum((V - bank.B @ G) ** 2)
    assert obj <= 1e-9
    assert np.allclose(bank.B, B0.B, atol=1e-10)


def test_procrustes_degenerate_g():
    V = np.random.default_rng(1).standard_normal((9, 20))
    bank = procrustes_update(V, np.zeros((9, 20)))
    assert bank.constraint_error() <= 1e-10
    assert np.sum((V - bank.B @ np.zeros((9, 20))) ** 2) == pytest.approx(np.sum(V ** 2))


def test_procrustes_random_search():
    rng = np.random.default_rng(2)
    G = rng.standard_normal((4, 30))
    V = rng.standard_normal((4, 30))
    best = procrustes_update(V, G)
    assert best.r == 2 and best.constraint_error() <= 1e-10
    obj = np.sum((V - best.B @ G) ** 2)
    for k in range(1000):
        Q = ortho_group.rvs(4, random_state=k) / 2
        assert obj <= np.sum((V - Q @ G) ** 2) + 1e-12


def test_procrustes_shape_error():
    with pytest.raises(ValueError):
        procrustes_update(np.zeros((9, 5)), np.zeros((9, 6)))
    with pytest.raises(ValueError):
        procrustes_update(np.zeros((5, 5)), np.zeros((5, 5)))


def test_learning_zero_threshold_single_step():
    img = piecewise_image((12, 12))
    bank0 = random_bank(3, 11)
    learned = learn_filter_bank(img, bank0, 0.0, n_alt=1)
    G = extract_patches(img, 3)
    ref = procrustes_update(bank0.B @ G, G)
    assert np.allclose(learned.B, ref.B, atol=1e-12)
    # V = B0 G is already attainable, so the objective reaches zero
    assert frame_objective(bank0.B @ G, learned, G, 0.0) <= 1e-9


def test_learning_n_alt_one_and_zero():
    img = piecewise_image((12, 12))
    bank0 = spectral_initial_bank(3)
    G = extract_patches(img, 3)
    ref = procrustes_update(hard_threshold(bank0.B @ G, 0.1), G)
    assert np.array_equal(learn_filter_bank(img, bank0, 0.1, n_alt=1).B, ref.B)
    with pytest.raises(ValueError):
        learn_filter_bank(img, bank0, 0.1, n_alt=0)


def test_learning_monotone_and_sparser():
    img = piecewise_image()
    bank0 = spectral_initial_bank(7)
    thresh = 0.05
    history = []
    learned = learn_filter_bank(img, bank0, thresh, n_alt=20, history=history)
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
    assert learned.constraint_error() <= 1e-10
    zeros = lambda bank: np.mean(hard_threshold(analysis(bank, img), thresh) == 0)
    assert zeros(learned) > zeros(bank0)


def test_spectral_bank():
    assert np.array_equal(spectral_initial_bank(1).B, [[1.0]])
    for r in (1, 3, 5, 7, 9):
        assert spectral_initial_bank(r).constraint_error() <= 1e-12
    b3 = spectral_initial_bank(3)
    assert np.allclose(b3.filters[0], np.full((3, 3), 1.0 / 9.0), atol=1e-15)
    with pytest.raises(ValueError):
        spectral_initial_bank(4)


def test_bank_json_round_trip():
    bank = random_bank(3, 13)
    back = FilterBank.from_json(bank.to_json())
    assert back.r == 3 and np.array_equal(back.B, bank.B)
    with pytest.raises(ValueError):
        FilterBank(3, np.eye(4))
