"""Smoke tests for the gvf_core extension module."""

import math

import numpy as np
import pytest

gvf = pytest.importorskip("gvf_core")


def test_manifolds_and_metric_identity():
    sphere = gvf.manifold("sphere")
    assert sphere.dim == 2
    assert sphere.ambient_dim == 3
    assert sphere.compact

    x = np.array([math.pi / 2, 0.0])
    e = sphere.embed(x)
    np.testing.assert_allclose(e, [1.0, 0.0, 0.0], atol=1e-15)
    p = sphere.projection_matrix(x)
    np.testing.assert_allclose(p @ p.T, np.eye(2), atol=1e-12)

    cyl = gvf.manifold("cylinder")
    assert cyl.ambient_dim == 3
    assert not cyl.compact

    with pytest.raises(NotImplementedError):
        gvf.manifold("klein-bottle")


def test_kernel_and_eigenvalues():
    sphere = gvf.manifold("sphere")
    k = gvf.kernel(sphere, "matern32", [0.4], amplitude=2.0)
    x = np.array([1.0, 0.5])
    y = np.array([1.2, 0.7])
    assert k(x, x) == pytest.approx(2.0, rel=1e-6)
    assert k(x, y) == k(y, x)

    lams = gvf.laplacian_eigenvalues(sphere, 4)
    np.testing.assert_allclose(lams, [0.0, 2.0, 2.0, 2.0])

    assert gvf.spectral_weight(1.5, 1.0, 2, 0.0) == pytest.approx(3.0 ** -2.5)


def test_projected_kernel_and_prior_sampling():
    sphere = gvf.manifold("sphere")
    kernel = gvf.projected_kernel(sphere, gvf.kernel(sphere, "matern32", [0.4]))
    x = np.array([1.0, 0.5])
    block = kernel(x, x)
    np.testing.assert_allclose(block, np.eye(2), atol=1e-6)

    dev, trials = kernel.gauge_independence(5, 5, seed=1)
    assert trials == 25
    assert dev <= 1e-10

    f = gvf.sample_prior_field(kernel, feature_budget=16, seed=3)
    g = gvf.sample_prior_field(kernel, feature_budget=16, seed=3)
    v = f(x)
    assert v.shape == (2,)
    np.testing.assert_array_equal(v, g(x))
    # tangency of the ambient pushforward
    assert abs(np.dot(f.ambient(x), sphere.embed(x))) <= 1e-12


def test_exact_and_svgp_inference():
    sphere = gvf.manifold("sphere")
    kernel = gvf.projected_kernel(sphere, gvf.kernel(sphere, "matern32", [0.5]))
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0.5, 2.5, 8), rng.uniform(0.0, 6.0, 8)])
    vals = rng.normal(size=(8, 2))

    post = gvf.exact_posterior_fit(kernel, pts, vals, noise_variance=1e-10)
    for i in range(8):
        np.testing.assert_allclose(post.mean(pts[i]), vals[i], atol=1e-4)

    state = gvf.svgp_fit(kernel, pts, vals, noise_variance=0.1, inducing=8, steps=0)
    means, covs = gvf.svgp_predict(state, kernel, pts)
    assert len(means) == 8 and covs[0].shape == (2, 2)
    elbo = gvf.svgp_elbo(state, kernel, pts, vals, noise_variance=0.1)
    logz = gvf.exact_posterior_fit(kernel, pts, vals, noise_variance=0.1).log_marginal
    assert elbo <= logz + 1e-6

    text = state.to_json()
    back = gvf.SVGPState.from_json(text)
    assert back.manifold_name == "sphere"
    np.testing.assert_array_equal(back.mu, state.mu)


def test_pathwise_sampling():
    circle = gvf.manifold("circle")
    kernel = gvf.projected_kernel(circle, gvf.kernel(circle, "se", [0.5]))
    prior = gvf.sample_prior_field(kernel, seed=7)
    pts = np.array([[0.3], [2.0], [4.0]])
    vals = np.array([[prior(p)[0]] for p in pts])
    post = gvf.exact_posterior_fit(kernel, pts, vals, noise_variance=1e-10)
    sample = gvf.pathwise_posterior_sample(prior, post, seed=5)
    for p in pts:
        assert sample(p)[0] == pytest.approx(prior(p)[0], abs=1e-4)


def test_experiments_and_rollout():
    times, q, p = gvf.leapfrog_rollout(2.0, 0.0, steps=50)
    assert len(times) == 51
    assert all(math.isfinite(v) for v in q)

    track = gvf.synth_track(minutes=60)
    assert len(track) == 60

    metrics = gvf.wind_experiment(seed=0)
    assert metrics["manifold_track_cov"] <= 0.2
    assert metrics["baseline_seam"] >= 10 * metrics["manifold_seam"]
