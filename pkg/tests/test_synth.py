import numpy as np
import pytest

import pagecast as pc
from pagecast.errors import InvalidParams
from pagecast.synth import PhiloxStream


class TestPhiloxStream:
    def test_deterministic(self):
        a = PhiloxStream(42, 3).uniforms(100)
        b = PhiloxStream(42, 3).uniforms(100)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = PhiloxStream(42, 0).uniforms(100)
        b = PhiloxStream(42, 1).uniforms(100)
        assert not np.array_equal(a, b)

    def test_uniform_range(self):
        u = PhiloxStream(1, 0).uniforms(200000)
        assert 0.0 <= u.min() and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.01

    def test_normals_moments(self):
        z = PhiloxStream(7, 2).normals(200000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_poisson_moments(self):
        lam = np.full(200000, 0.7)
        x = PhiloxStream(9, 5).poisson(lam)
        assert abs(x.mean() - 0.7) < 0.01
        assert abs(x.var() - 0.7) < 0.02
        assert np.all(x == np.floor(x)) and np.all(x >= 0)

    def test_bernoulli_support(self):
        p = PhiloxStream(3, 1).uniforms(10000)
        x = PhiloxStream(3, 2).bernoulli(p)
        assert set(np.unique(x)) <= {0.0, 1.0}
        assert abs(x.mean() - p.mean()) < 0.02


class TestSyntheticI:
    def test_default_dimensions(self):
        truth = pc.gen_synthetic_I(T=500, seed=1)
        assert truth.observations.values.shape == (400, 500)
        np.testing.assert_array_equal(truth.latent_var, 0.0)

    def test_rank_one_grid_identical_series(self):
        truth = pc.gen_synthetic_I(n=1, m=1, T=300, r=1, seed=2)
        assert truth.observations.values.shape == (1, 300)

    def test_r1_series_proportional(self):
        truth = pc.gen_synthetic_I(n=2, m=3, T=400, r=1, seed=5)
        vals = truth.observations.values
        # one temporal component: every pair of series is collinear
        c = np.corrcoef(vals)
        assert np.all(np.abs(np.abs(c) - 1.0) < 1e-10)

    def test_determinism(self):
        a = pc.gen_synthetic_I(n=3, m=3, T=200, seed=9)
        b = pc.gen_synthetic_I(n=3, m=3, T=200, seed=9)
        np.testing.assert_array_equal(a.observations.values,
                                      b.observations.values)

    def test_presets_differ(self):
        a = pc.gen_synthetic_I(n=2, m=2, T=200, seed=0, preset="default")
        b = pc.gen_synthetic_I(n=2, m=2, T=200, seed=0, preset="scaling")
        assert not np.array_equal(a.observations.values, b.observations.values)

    def test_invalid_params(self):
        with pytest.raises(InvalidParams):
            pc.gen_synthetic_I(n=0, seed=1)
        with pytest.raises(InvalidParams):
            pc.gen_synthetic_I(preset="bogus", seed=1)


@pytest.fixture(scope="module")
def synth2_data():
    return pc.gen_synthetic_II(seed=4, T=600, grid=4)


@pytest.fixture(scope="module")
def synth3_data():
    return pc.gen_synthetic_III(T=100000, seed=11)


class TestSyntheticII:

    def test_nine_sets(self, synth2_data):
        assert len(synth2_data) == 9
        assert {k[0] for k in synth2_data} == {"gaussian", "bernoulli", "poisson"}
        assert {k[1] for k in synth2_data} == {"har", "har_trend", "har_ar_trend"}

    def test_bernoulli_support(self, synth2_data):
        for dyn in ("har", "har_trend", "har_ar_trend"):
            obs = synth2_data[("bernoulli", dyn)].observations.values
            assert set(np.unique(obs)) <= {0.0, 1.0}

    def test_poisson_support(self, synth2_data):
        obs = synth2_data[("poisson", "har")].observations.values
        assert np.all(obs >= 0) and np.all(obs == np.floor(obs))

    def test_latents_normalized(self, synth2_data):
        for dyn in ("har", "har_trend", "har_ar_trend"):
            fq = synth2_data[("poisson", dyn)].latent_mean
            assert fq.min() >= 0.0 and fq.max() <= 1.0

    def test_variance_laws(self, synth2_data):
        bern = synth2_data[("bernoulli", "har")]
        f = bern.latent_mean
        np.testing.assert_allclose(bern.latent_var, f * (1 - f), atol=1e-12)
        pois = synth2_data[("poisson", "har_trend")]
        np.testing.assert_array_equal(pois.latent_var, pois.latent_mean)

    def test_gaussian_mean_is_harmonics_tensor(self, synth2_data):
        har_mean = synth2_data[("gaussian", "har")].latent_mean
        trend_mean = synth2_data[("gaussian", "har_trend")].latent_mean
        np.testing.assert_array_equal(har_mean, trend_mean)


class TestSyntheticIII:

    def test_shared_latent(self, synth3_data):
        f = synth3_data["gaussian"].latent_mean
        np.testing.assert_array_equal(synth3_data["bernoulli"].latent_mean, f)
        np.testing.assert_array_equal(synth3_data["poisson"].latent_mean, f)
        assert f.min() >= 0.0 and f.max() <= 1.0

    def test_supports(self, synth3_data):
        gauss = synth3_data["gaussian"].observations.values
        assert not np.all(gauss == np.floor(gauss))
        pois = synth3_data["poisson"].observations.values
        assert np.all(pois >= 0) and np.all(pois == np.floor(pois))
        bern = synth3_data["bernoulli"].observations.values
        assert set(np.unique(bern)) <= {0.0, 1.0}

    def test_poisson_mean_near_half_band(self, synth3_data):
        f = synth3_data["poisson"].latent_mean[0]
        x = synth3_data["poisson"].observations.values[0]
        band = np.abs(f - 0.5) < 0.02
        assert band.sum() > 500
        assert abs(x[band].mean() - f[band].mean()) < 0.02

    def test_sample_moments_match_latent_variance(self, synth3_data):
        for arm in ("gaussian", "bernoulli", "poisson"):
            st = synth3_data[arm]
            resid = st.observations.values[0] - st.latent_mean[0]
            expected = st.latent_var[0].mean()
            tol = 3.0 / np.sqrt(st.latent_mean.shape[1])
            assert abs(resid.var() - expected) < max(tol, 0.05 * expected), arm


class TestGenLrf:
    def test_rank_bounds_sweep(self):
        for seed, (K, R_max, N) in enumerate([(1, 2, 1), (2, 2, 3), (3, 1, 2),
                                              (1, 4, 1), (4, 4, 10)]):
            truth = pc.gen_lrf(K, R_max, N, 900, seed=seed)
            page = pc.build_stacked_page(truth.observations, L=25)
            s = np.linalg.svd(page.data, compute_uv=False)
            rank = int(np.count_nonzero(s > 1e-8 * s[0]))
            assert rank <= K * R_max

    def test_zero_theta(self):
        truth = pc.gen_lrf(2, 2, 3, 100, seed=0, theta=np.zeros((3, 2)))
        np.testing.assert_array_equal(truth.observations.values, 0.0)

    def test_determinism(self):
        a = pc.gen_lrf(2, 3, 2, 200, seed=8)
        b = pc.gen_lrf(2, 3, 2, 200, seed=8)
        np.testing.assert_array_equal(a.observations.values,
                                      b.observations.values)


class TestCorrupt:
    def test_masking_fraction(self):
        truth = pc.gen_synthetic_I(n=4, m=4, T=2000, seed=3)
        out = pc.corrupt(truth, p_obs=0.6, seed=1)
        frac = out.observations.observed.mean()
        assert abs(frac - 0.6) < 0.02

    def test_noise_added_to_variance(self):
        truth = pc.gen_synthetic_I(n=2, m=2, T=500, seed=3)
        out = pc.corrupt(truth, sigma=0.5, seed=1)
        np.testing.assert_allclose(out.latent_var, 0.25)
        resid = out.observations.values - truth.observations.values
        assert abs(resid.std() - 0.5) < 0.02
