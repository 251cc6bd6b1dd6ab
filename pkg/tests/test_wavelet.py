import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emwave import SignalSet
from emwave.errors import InsufficientLengthError, ValidationError
from emwave.wavelet import (
    band_energy_fractions,
    band_frequencies,
    db4_filter_bank,
    decompose,
    decompose_set,
    reconstruct,
    reconstruct_bands,
)

from oracles import db4_closed_form, periodized_pyramid

EXTENSIONS = ["symmetric", "periodic", "zero"]


def test_filter_bank_matches_closed_form():
    bank = db4_filter_bank()
    assert bank.length == 4
    np.testing.assert_allclose(bank.low_pass, db4_closed_form(), rtol=0, atol=1e-15)


def test_filter_bank_sums():
    bank = db4_filter_bank()
    assert abs(sum(db4_closed_form()) - math.sqrt(2)) < 1e-12
    assert abs(bank.low_pass.sum() - math.sqrt(2)) < 1e-12
    assert abs(bank.high_pass.sum()) < 1e-12


def test_filter_bank_orthogonality():
    h = np.asarray(db4_closed_form())
    g = db4_filter_bank().high_pass
    assert abs(h @ h - 1) < 1e-12
    assert abs(h[:2] @ h[2:]) < 1e-12  # double shift
    assert abs(g @ g - 1) < 1e-12
    assert abs(h @ g) < 1e-12
    assert abs(h[2:] @ g[:2]) < 1e-12 and abs(h[:2] @ g[2:]) < 1e-12
    for n in range(4):
        assert g[n] == pytest.approx((-1) ** n * h[3 - n], abs=1e-15)


@pytest.mark.parametrize("extension", ["symmetric", "periodic"])
@pytest.mark.parametrize("levels", [1, 3, 5])
def test_constant_has_no_detail(extension, levels):
    pyr = decompose(np.full(256, 2.5), 10.0, levels, extension)
    for d in pyr.details:
        assert np.max(np.abs(d)) < 1e-10
    np.testing.assert_allclose(pyr.approximation, 2.5 * math.sqrt(2) ** levels, atol=1e-10)


def test_ramp_interior_details_vanish():
    x = 0.3 * np.arange(512) - 7.0
    pyr = decompose(x, 10.0, 4, "symmetric")
    for d in pyr.details:
        # boundary coefficients see the reflected (non-linear) extension
        assert np.max(np.abs(d[3:-3])) < 1e-9


def test_depth_bound():
    x = np.random.default_rng(1).standard_normal(16)
    with pytest.raises(InsufficientLengthError, match="insufficient length"):
        decompose(x, 10.0, 5)
    decompose(np.zeros(19), 10.0, 5)  # shortest symmetric record that supports 5 levels


def test_periodic_matches_matrix_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(128)
    pyr = decompose(x, 10.0, 4, "periodic")
    details, approx = periodized_pyramid(x, 4, db4_closed_form())
    for ours, ref in zip(pyr.details, details):
        np.testing.assert_allclose(ours, ref, atol=1e-12)
    np.testing.assert_allclose(pyr.approximation, approx, atol=1e-12)


@pytest.mark.parametrize("extension", EXTENSIONS)
def test_inverse_transform(extension):
    x = np.random.default_rng(3).standard_normal(333)
    pyr = decompose(x, 10.0, 5, extension)
    np.testing.assert_allclose(reconstruct(pyr), x, atol=1e-12)


@pytest.mark.parametrize("extension", EXTENSIONS)
def test_bands_sum_to_input_white_noise(extension):
    x = np.random.default_rng(11).standard_normal(1024)
    bands = reconstruct_bands(decompose(x, 10.0, 5, extension))
    assert bands.shape == (6, 1024)
    assert np.sqrt(np.mean((x - bands.sum(axis=0)) ** 2)) < 1e-9


def test_reconstruct_rejects_other_extension():
    pyr = decompose(np.arange(64.0), 10.0, 2, "symmetric")
    with pytest.raises(ValidationError, match="extension mismatch"):
        reconstruct_bands(pyr, "periodic")


def test_band_isolation():
    # a band component re-decomposed lives in its own band only
    x = np.random.default_rng(5).standard_normal(512)
    bands = reconstruct_bands(decompose(x, 10.0, 3, "periodic"))
    again = reconstruct_bands(decompose(bands[1], 10.0, 3, "periodic"))
    np.testing.assert_allclose(again[1], bands[1], atol=1e-12)
    assert np.max(np.abs(np.delete(again, 1, axis=0))) < 1e-12


def tone_fractions(freq, n=1024, fs=10.0, extension="symmetric"):
    t = np.arange(n) / fs
    bands = reconstruct_bands(decompose(np.sin(2 * np.pi * freq * t), fs, 5, extension))
    return band_energy_fractions(bands)


def test_high_tone_lands_in_d1():
    assert tone_fractions(3.5)[0] >= 0.70


def test_low_tone_lands_in_d5():
    # DFT oracle: nearly all of the tone's energy lies inside the D5 band.
    from oracles import dft_band_fraction

    t = np.arange(1024) / 10.0
    assert dft_band_fraction(np.sin(2 * np.pi * 0.2 * t), 10.0, 0.15625, 0.3125) > 0.9
    frac = tone_fractions(0.2)
    assert np.argmax(frac) == 4
    assert frac[4] >= 0.70


def test_band_map_published_table():
    bm = band_frequencies(10, 5)
    expected = [
        ("D1", 2.5, 5.0), ("D2", 1.25, 2.5), ("D3", 0.625, 1.25),
        ("D4", 0.3125, 0.625), ("D5", 0.15625, 0.3125), ("A5", 0.0, 0.15625),
    ]
    assert [(b.label, b.f_low, b.f_high) for b in bm.entries] == expected
    # the published table rounds to three decimals
    published = [(2.5, 5.0), (1.25, 2.5), (0.625, 1.25), (0.312, 0.625), (0.156, 0.312), (0.0, 0.156)]
    for b, (lo, hi) in zip(bm.entries, published):
        assert math.floor(b.f_low * 1000) / 1000 == lo
        assert math.floor(b.f_high * 1000) / 1000 == hi


def test_band_map_single_level():
    bm = band_frequencies(10, 1)
    assert [(b.label, b.f_low, b.f_high) for b in bm.entries] == [("D1", 2.5, 5.0), ("A1", 0.0, 2.5)]


@given(fs=st.floats(0.5, 2000), levels=st.integers(1, 12))
def test_band_map_tiles_nyquist(fs, levels):
    entries = sorted(band_frequencies(fs, levels).entries, key=lambda b: b.f_low)
    assert entries[0].f_low == 0.0
    assert entries[-1].f_high == fs / 2
    for lo, hi in zip(entries, entries[1:]):
        assert lo.f_high == hi.f_low


def test_decompose_set_structure():
    rng = np.random.default_rng(2)
    sig = SignalSet(10.0, 0.0, tuple(f"b{i}" for i in range(12)), rng.standard_normal((12, 300)))
    dec = decompose_set(sig)
    assert dec.components.shape == (12, 6, 300)
    assert dec.band_map.labels == ("D1", "D2", "D3", "D4", "D5", "A5")
    np.testing.assert_allclose(dec.components.sum(axis=1), sig.data, atol=1e-12)


def test_decompose_set_empty():
    sig = SignalSet(10.0, 0.0, (), np.zeros((0, 100)))
    dec = decompose_set(sig)
    assert dec.components.shape == (0, 6, 100)


def test_decompose_set_names_failing_channel():
    sig = SignalSet(10.0, 0.0, ("bus9", "bus14"), np.zeros((2, 12)))
    with pytest.raises(InsufficientLengthError, match="channel bus9"):
        decompose_set(sig)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(64, 2048),
    levels=st.integers(1, 5),
    extension=st.sampled_from(EXTENSIONS),
    seed=st.integers(0, 2**32 - 1),
)
def test_perfect_reconstruction_property(n, levels, extension, seed):
    x = np.random.default_rng(seed).standard_normal(n) * 10
    bands = reconstruct_bands(decompose(x, 10.0, levels, extension))
    assert np.sqrt(np.mean((x - bands.sum(axis=0)) ** 2)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 64), levels=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_parseval_periodic(k, levels, seed):
    n = k * 2**levels
    x = np.random.default_rng(seed).standard_normal(n)
    pyr = decompose(x, 10.0, levels, "periodic")
    coeff_energy = sum(d @ d for d in pyr.details) + pyr.approximation @ pyr.approximation
    assert coeff_energy == pytest.approx(x @ x, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(4, 32), levels=st.integers(1, 4), shifts=st.integers(1, 3),
       seed=st.integers(0, 2**32 - 1))
def test_shift_covariance_periodic(k, levels, shifts, seed):
    n = k * 2**levels
    x = np.random.default_rng(seed).standard_normal(n)
    base = decompose(x, 10.0, levels, "periodic")
    moved = decompose(np.roll(x, shifts * 2**levels), 10.0, levels, "periodic")
    for j, (d0, d1) in enumerate(zip(base.details, moved.details), start=1):
        np.testing.assert_allclose(d1, np.roll(d0, shifts * 2 ** (levels - j)), atol=1e-10)
    np.testing.assert_allclose(moved.approximation, np.roll(base.approximation, shifts), atol=1e-10)


@pytest.mark.parametrize("band", [1, 2, 3, 4, 5])
def test_band_selectivity_mid_band(band):
    """Tone at the middle of each detail band carries most of its energy there."""
    bm = band_frequencies(10.0, 5)
    b = bm.entries[band - 1]
    f = 0.5 * (b.f_low + b.f_high)
    frac = tone_fractions(f, n=2048)
    assert np.argmax(frac) == band - 1
    assert frac[band - 1] >= 0.70
