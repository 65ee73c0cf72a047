import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfectsim.wavelets import FILTERS, CoefficientTree, dwt, highpass, idwt


@pytest.mark.parametrize("wavelet", ["haar", "la10"])
def test_filters_orthonormal(wavelet):
    h = FILTERS[wavelet]
    g = highpass(h)
    assert h.sum() == pytest.approx(np.sqrt(2), abs=1e-12)
    assert np.dot(h, h) == pytest.approx(1.0, abs=1e-12)
    assert np.dot(h, g) == pytest.approx(0.0, abs=1e-12)
    # double-shift orthogonality
    for m in range(2, len(h), 2):
        assert np.dot(h[m:], h[:-m]) == pytest.approx(0.0, abs=1e-12)


def test_la10_has_ten_vanishing_moments():
    g = highpass(FILTERS["la10"])
    k = np.arange(len(g), dtype=float)
    for p in range(10):
        # relative to the size of the unsigned moment
        assert abs(np.sum(g * k**p)) < 1e-8 * np.sum(np.abs(g) * k**p)


def test_haar_constant_signal_has_zero_details():
    tree = dwt(np.full(64, 3.7), "haar")
    assert np.allclose(tree.flat(), 0.0, atol=1e-13)
    assert tree.scaling[0] == pytest.approx(3.7 * 8)


@pytest.mark.parametrize("wavelet", ["haar", "la10"])
def test_round_trip_and_energy(wavelet):
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.standard_normal(256)
        tree = dwt(x, wavelet)
        assert np.max(np.abs(idwt(tree, wavelet) - x)) < 1e-10 * np.max(np.abs(x))
        energy = tree.scaling @ tree.scaling + tree.flat() @ tree.flat()
        assert energy == pytest.approx(x @ x, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(J=st.integers(1, 9), seed=st.integers(0, 2**32 - 1), wavelet=st.sampled_from(["haar", "la10"]))
def test_round_trip_property(J, seed, wavelet):
    x = np.random.default_rng(seed).standard_normal(2**J)
    tree = dwt(x, wavelet)
    assert tree.J == J and [len(d) for d in tree.details] == [2**j for j in range(J)]
    assert np.allclose(idwt(tree, wavelet), x, atol=1e-10)


def test_flat_layout():
    tree = dwt(np.arange(16.0), "haar")
    flat = tree.flat()
    for j in range(4):
        for k in range(2**j):
            assert flat[2**j - 1 + k] == tree.details[j][k]
    back = CoefficientTree.from_flat(tree.scaling, flat)
    assert all(np.array_equal(a, b) for a, b in zip(back.details, tree.details))


def test_la10_localisation():
    """A spike maps mainly onto the finest coefficient sitting over it in time."""
    x = np.zeros(256)
    x[100] = 1.0
    fine = dwt(x, "la10").details[-1]
    assert abs(np.argmax(np.abs(fine)) - 50) <= 1


@pytest.mark.parametrize("bad", [np.zeros(0), np.zeros(1), np.zeros(12), np.zeros((4, 4))])
def test_bad_length_rejected(bad):
    with pytest.raises(ValueError):
        dwt(bad)


def test_unknown_wavelet():
    with pytest.raises(ValueError, match="unknown wavelet"):
        dwt(np.zeros(8), "db4")
