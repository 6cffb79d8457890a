import math

import numpy as np
import pytest

from gabor_lattice.reconstruction import (
    CardinalSeries,
    CompactConfig,
    InconsistentMeasurements,
    NoPhaseAnchorError,
    RankDeficientDesign,
    ReconstructionError,
    RegConfig,
    SpectrogramSamples,
    freq_correlation,
    invert_gaussian_translates,
    lag_window,
    lift_sis_fit,
    periodic_gaussian_signal,
    reconstruct_compact,
    reconstruct_periodic_gaussian,
    reconstruct_sis,
    sample_sis,
    sample_spectrogram,
    shannon_interpolate,
    sis_design,
)
from gabor_lattice.sampling import SequenceDescriptor, build_sampling_set
from gabor_lattice.signals import (
    CompactClassSpec,
    ComplexSignal,
    Grid,
    SisSpec,
    random_in_class,
    relative_phase_distance,
    synthesize_sis,
)
from gabor_lattice.transforms import frft, gabor_points

A = SequenceDescriptor.affine
SQ2 = math.sqrt(2)
C2 = CompactClassSpec(2.0)
X_COMPACT = build_sampling_set(A(1, 0, 16), A(0.25, 0, 12))
X_SIS = build_sampling_set(A(SQ2 / 2.5, 0, 14), A(1, 0, 3))
SPEC3 = SisSpec(SQ2, -1, [1, 0.5 - 0.3j, -0.2])


def rel_misfit(pred, vals):
    return float(np.linalg.norm(pred - vals) / np.linalg.norm(vals))


# samples container ---------------------------------------------------------

def test_samples_validate():
    X = build_sampling_set(A(1, 0, 1), A(1, 0, 1))
    with pytest.raises(ValueError):
        SpectrogramSamples(X, np.ones(4))
    with pytest.raises(ValueError):
        SpectrogramSamples(X, -np.ones(9))


def test_samples_csv_round_trip():
    s = sample_sis(SPEC3, X_SIS)
    back = SpectrogramSamples.from_csv(s.to_csv(), X_SIS)
    np.testing.assert_array_equal(back.values, s.values)
    assert s.to_csv().splitlines()[0] == "x,omega,value"
    mod = SpectrogramSamples.from_csv(s.to_csv(), X_SIS, squared=False)
    np.testing.assert_allclose(mod.values, s.values ** 2)


def test_sample_noise_is_seeded_and_clipped():
    a = sample_sis(SPEC3, X_SIS, noise_sigma=1e-3, seed=5)
    b = sample_sis(SPEC3, X_SIS, noise_sigma=1e-3, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values.min() >= 0
    assert np.any(a.values != sample_sis(SPEC3, X_SIS).values)


# cardinal series -----------------------------------------------------------

def test_shannon_examples():
    nodes = np.arange(-40, 41) * 0.25
    g = 0.5 * np.exp(-np.pi * nodes ** 2)
    assert shannon_interpolate(g, nodes, 0.5, 2.0).value == pytest.approx(g[42], abs=1e-15)
    v = shannon_interpolate(g, nodes, 0.25 / 2, 2.0)
    assert abs(v.value - 0.5 * math.exp(-math.pi / 64)) < 1e-6 and not v.edge_warning
    assert shannon_interpolate(np.zeros(81), nodes, 0.3, 2.0).value == 0.0


def test_shannon_edge_and_nyquist():
    nodes = np.arange(-4, 5) * 0.25
    v = shannon_interpolate(np.exp(-nodes ** 2), nodes, 0.1, 2.0)
    assert v.edge_warning and v.edge_bound > 1e-8
    with pytest.raises(ValueError, match="Nyquist"):
        shannon_interpolate(np.ones(5), np.arange(5) * 0.5, 0.1, 2.0)
    with pytest.raises(ValueError):
        CardinalSeries.from_nodes([0, 0.25, 0.75], [1, 2, 3])


def test_freq_correlation_gaussian():
    nodes = np.arange(-192, 193) / 32.0  # c = 16
    s = CardinalSeries.from_nodes(nodes, 0.5 * np.exp(-np.pi * nodes ** 2), x=0.0)
    assert freq_correlation(s, 0.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("profile", ["smooth", "rough", "nonvanishing"])
def test_freq_correlation_matches_direct(profile):
    f = random_in_class(C2, 1, profile)
    x = 0.3
    # a grid signal has a 1/step-periodic slice: take exactly one period of nodes
    nodes = np.arange(-128, 128) * 0.25
    slice_vals = np.abs(gabor_points(f, np.full(nodes.size, x), nodes)) ** 2
    s = CardinalSeries.from_nodes(nodes, slice_vals, x=x)
    t, v = f.t, f.values
    for lag in [0.0, 26 / 64, -70 / 64, 1.75]:
        # <f_lag, T_x phi_lag>, f_lag(t) = f(t - lag) conj(f(t))
        k = int(round(lag / f.grid.step))
        shifted = np.roll(v, k)
        direct = f.grid.step * np.sum(shifted * np.conj(v) * lag_window(lag, t - x))
        assert abs(freq_correlation(s, lag) - direct) < 1e-8 * max(1.0, abs(direct))
    for lag in [2.0, 2.5, -3.0]:
        assert abs(freq_correlation(s, lag)) < 1e-9


# translate inversion -------------------------------------------------------

def _translates(lag, nodes, t, step):
    return lag_window(lag, t[None, :] - nodes[:, None]) * step


def test_invert_recovers_span():
    # content carried by the translates themselves (33 nodes in [-16, 16], c = 1)
    nodes = np.arange(-16, 17.0)
    step = 1 / 64
    t = np.arange(-32, 33) * step
    M = _translates(0.0, nodes, t, step)
    rng = np.random.default_rng(0)
    u = M.conj().T @ rng.standard_normal(33) / step
    inv = invert_gaussian_translates(nodes, M @ u, 0.0, (-0.5, 0.5), RegConfig(lam_rel=1e-10), step)
    assert np.linalg.norm(inv.u.values - u) / np.linalg.norm(u) < 1e-3
    assert inv.cond > 1e10 and inv.residual < 1e-6


def test_invert_zero_and_refusal():
    nodes = np.arange(-4, 5.0)
    inv = invert_gaussian_translates(nodes, np.zeros(9), 0.3, (-0.5, 0.5))
    assert not np.any(inv.u.values)
    with pytest.raises(ReconstructionError):
        invert_gaussian_translates(nodes, np.ones(9), 0.0, (-0.5, 0.5), RegConfig(lam_rel=0.0))
    with pytest.raises(ValueError):
        invert_gaussian_translates(nodes, np.ones(9), 0.0, (0.1, 0.105))


def test_invert_norm_nonincreasing_in_lambda():
    nodes = np.arange(-8, 9.0)
    rng = np.random.default_rng(2)
    b = rng.standard_normal(17) + 1j * rng.standard_normal(17)
    norms = [invert_gaussian_translates(nodes, b, 0.5, (-0.5, 1.0), RegConfig(lam_rel=lam, tsvd_rel=0)).u.norm()
             for lam in 1e-12 * 2.0 ** np.arange(30)]
    assert all(b2 <= a2 * (1 + 1e-9) for a2, b2 in zip(norms, norms[1:]))


# compact pipeline ------------------------------------------------------------

@pytest.fixture(scope="module")
def compact_run():
    f = random_in_class(C2, 3, "nonvanishing")
    s = sample_spectrogram(f, X_COMPACT)
    g, d = reconstruct_compact(s, C2)
    return f, s, g, d


def test_compact_round_trip(compact_run):
    f, s, g, d = compact_run
    assert relative_phase_distance(f, g) < 1e-2
    assert d.phase_anchor is not None and -1 <= d.phase_anchor <= 1
    # slices are cut at |w| <= 3, well before they decay to 1e-8
    assert d.condition_estimates.size > 0 and d.edge_warning


def test_compact_consistency(compact_run):
    f, s, g, d = compact_run
    resim = sample_spectrogram(g, X_COMPACT, canonical_bits=None).values
    assert rel_misfit(resim, s.values) == pytest.approx(d.residual, rel=1e-3, abs=1e-12)
    assert d.residual < 1e-6


def test_compact_phase_invariance(compact_run):
    f, s, g, _ = compact_run
    for alpha in (0.1, math.pi / 3, 3.0):
        s2 = sample_spectrogram(f * np.exp(1j * alpha), X_COMPACT)
        np.testing.assert_array_equal(s2.values, s.values)
        np.testing.assert_array_equal(reconstruct_compact(s2, C2)[0].values, g.values)


@pytest.mark.parametrize("mode", ["tree", "average"])
def test_compact_propagation_modes(compact_run, mode):
    f, s, _, _ = compact_run
    g, _ = reconstruct_compact(s, C2, cfg=CompactConfig(propagation=mode))
    assert relative_phase_distance(f, g) < 1e-2
    with pytest.raises(ValueError):
        reconstruct_compact(s, C2, cfg=CompactConfig(propagation="spiral"))


def test_compact_zero_signal():
    z = ComplexSignal(C2.default_grid(), np.zeros(C2.default_grid().count))
    g, d = reconstruct_compact(sample_spectrogram(z, X_COMPACT), C2)
    assert not np.any(g.values) and "all samples vanish" in d.notes


def test_compact_no_anchor():
    # translates far from the support see nothing
    X = build_sampling_set(A(1, 100, 3), A(0.25, 0, 4))
    with pytest.raises(NoPhaseAnchorError, match="no valid phase anchor"):
        reconstruct_compact(SpectrogramSamples(X, np.ones(len(X))), C2)


def test_compact_rotated():
    theta = 0.5
    wide = Grid.centered(7.0)
    g = random_in_class(C2, 4, "nonvanishing", grid=wide)
    f = frft(g, -theta, method="chirp")
    X = build_sampling_set(A(1, 0, 16), A(0.25, 0, 12), theta)
    rec, _ = reconstruct_compact(sample_spectrogram(f, X), C2, cfg=CompactConfig(output_grid=wide))
    assert relative_phase_distance(f, rec) < 1e-2


def test_compact_convergence_ladder():
    f = random_in_class(C2, 3, "nonvanishing")
    floor = 1e-3
    dists = []
    for nx, nw in [(8, 8), (12, 10), (16, 12)]:
        X = build_sampling_set(A(1, 0, nx), A(0.25, 0, nw))
        dists.append(relative_phase_distance(f, reconstruct_compact(sample_spectrogram(f, X), C2)[0]))
    assert all(b <= a + floor for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 1e-2


def test_compact_undersampling_is_flagged():
    f = random_in_class(C2, 3, "nonvanishing")
    X = build_sampling_set(A(1, 0, 16), A(0.5, 0, 6))
    _, d = reconstruct_compact(sample_spectrogram(f, X), C2)
    assert any("exceeds the Nyquist step" in n for n in d.notes)


# lifted fit ------------------------------------------------------------------

def test_lift_three_coefficients():
    lg = lift_sis_fit(sample_sis(SPEC3, X_SIS, canonical_bits=None), SQ2, (-1, 1))
    c = SPEC3.coeffs
    assert lg.band == 2 and lg.observed.all()
    assert np.max(np.abs(lg.G - np.outer(np.conj(c), c))) < 1e-6
    assert np.max(np.abs(lg.G - lg.G.conj().T)) < 1e-10
    assert np.trace(lg.G).real >= 0


def test_lift_single_and_zero():
    one = SisSpec(SQ2, 0, [0.7 - 0.2j])
    lg = lift_sis_fit(sample_sis(one, X_SIS, canonical_bits=None), SQ2, (0, 0))
    assert lg.G.shape == (1, 1) and lg.G[0, 0] == pytest.approx(abs(0.7 - 0.2j) ** 2, abs=1e-12)
    z = SpectrogramSamples(X_SIS, np.zeros(len(X_SIS)))
    lg = lift_sis_fit(z, SQ2, (-1, 1))
    assert not np.any(lg.G)


def test_lift_rank_deficient():
    X = build_sampling_set(A(1, 0, 1), A(1, 0, 1))
    with pytest.raises(RankDeficientDesign):
        lift_sis_fit(SpectrogramSamples(X, np.ones(9)), SQ2, (-3, 3))


# SIS pipeline ----------------------------------------------------------------

def test_sis_three_coefficient_round_trip():
    spec, d = reconstruct_sis(sample_sis(SPEC3, X_SIS), SQ2, (-1, 1))
    g = spec.default_grid()
    assert relative_phase_distance(synthesize_sis(SPEC3, g), synthesize_sis(spec, g)) < 1e-6
    assert d.rank1_gap < 1e-6
    i = int(np.argmax(np.abs(spec.coeffs)))
    assert spec.coeffs[i].imag == 0 and spec.coeffs[i].real > 0


@pytest.fixture(scope="module")
def sis7():
    rng = np.random.default_rng(11)
    c = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    truth = SisSpec(SQ2, -3, c)
    s = sample_sis(truth, X_SIS)
    return truth, s, reconstruct_sis(s, SQ2, (-3, 3))


def test_sis_seven_coefficients(sis7):
    truth, s, (spec, d) = sis7
    g = truth.default_grid()
    assert relative_phase_distance(synthesize_sis(truth, g), synthesize_sis(spec, g)) < 1e-6
    assert 0 <= d.rank1_gap < 1e-6


def test_sis_consistency(sis7):
    truth, s, (spec, d) = sis7
    resim = sample_sis(spec, X_SIS, canonical_bits=None).values
    assert rel_misfit(resim, s.values) <= d.residual * (1 + 1e-6) + 1e-14
    W = sis_design(X_SIS.points, SQ2, (-3, 3))
    assert rel_misfit(np.abs(W @ spec.coeffs) ** 2, s.values) == pytest.approx(d.residual, rel=1e-6, abs=1e-15)


def test_sis_phase_invariance(sis7):
    truth, s, (spec, _) = sis7
    for alpha in (0.1, math.pi / 3, 3.0):
        s2 = sample_sis(truth.with_coeffs(np.exp(1j * alpha) * truth.coeffs), X_SIS)
        np.testing.assert_array_equal(s2.values, s.values)
        np.testing.assert_array_equal(reconstruct_sis(s2, SQ2, (-3, 3))[0].coeffs, spec.coeffs)


def test_sis_zero():
    spec, d = reconstruct_sis(SpectrogramSamples(X_SIS, np.zeros(len(X_SIS))), SQ2, (-3, 3))
    assert not np.any(spec.coeffs) and d.rank1_gap == 0


def test_sis_rejects_rank_two():
    a = SisSpec(SQ2, -3, [1, 0, 0, 0, 0, 0, 0])
    b = SisSpec(SQ2, -3, [0, 0, 0, 0, 0, 0, 1j])
    mixed = SpectrogramSamples(X_SIS, sample_sis(a, X_SIS).values + sample_sis(b, X_SIS).values)
    with pytest.raises(InconsistentMeasurements, match="rank-1"):
        reconstruct_sis(mixed, SQ2, (-3, 3))


def test_periodic_gaussian_mode():
    period = SQ2
    coeffs = np.array([0.4 + 0.1j, 1.0, -0.3j])
    grid = Grid.centered(6.0)
    f = periodic_gaussian_signal(coeffs, period, -1, grid)
    X = build_sampling_set(A(1, 0, 6), A(1 / (2.5 * SQ2), 0, 20))
    s = sample_spectrogram(f, X)
    g, spec_hat, d = reconstruct_periodic_gaussian(s, period, (-1, 1), grid)
    assert relative_phase_distance(f, g) < 1e-5
    assert spec_hat.beta == pytest.approx(1 / period)
