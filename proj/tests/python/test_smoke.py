import math

import numpy as np
import pytest

import hdc


def test_gram_and_entropy():
    z = np.array([[0.0], [1.0]])
    k = hdc.gram_matrix(z, "rbf", bandwidth=1.0)
    assert k.shape == (2, 2)
    assert k[0, 1] == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert hdc.renyi_entropy(np.eye(4), 2.0) == pytest.approx(2.0, abs=1e-12)
    assert hdc.renyi_entropy(np.ones((3, 3)), 2.0) == pytest.approx(0.0, abs=1e-12)


def test_median_bandwidth_and_eigenvalues():
    assert hdc.median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == 2.0
    assert hdc.eigenvalues(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx([3.0, 1.0])


def test_mutual_information_matches_numpy():
    rng = np.random.default_rng(0)
    k1 = hdc.gram_matrix(rng.normal(size=(5, 3)), normalize=True)
    k2 = hdc.gram_matrix(rng.normal(size=(5, 3)), normalize=True)

    def h2(k):
        k = k / np.trace(k)
        ev = np.clip(np.linalg.eigvalsh(k), 0, None)
        return -math.log2(float(np.sum(ev**2)))

    want = h2(k1) + h2(k2) - h2(k1 * k2)
    assert hdc.mutual_information(k1, k2, 2.0) == pytest.approx(want, abs=1e-9)


def test_cg_loss_and_gradient():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(8, 4))
    value, grad = hdc.cg_loss(z, z)
    assert value == pytest.approx(math.log2(1e-8), abs=1e-9)
    assert grad.shape == z.shape

    zt = rng.normal(size=(8, 4))
    value, grad = hdc.cg_loss(z, zt)
    h = 1e-6
    zp, zm = z.copy(), z.copy()
    zp[2, 1] += h
    zm[2, 1] -= h
    numeric = (hdc.cg_loss(zp, zt)[0] - hdc.cg_loss(zm, zt)[0]) / (2 * h)
    assert grad[2, 1] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_metrics():
    a = np.zeros((8, 8), dtype=np.uint8)
    b = np.zeros((8, 8), dtype=np.uint8)
    a[0, 0] = 1
    b[3, 4] = 1
    assert hdc.hausdorff(a, b) == (5.0, False)
    assert hdc.asd(a, b)[0] == 5.0
    assert hdc.dice(a, a) == 1.0
    assert hdc.hausdorff(a, np.zeros_like(a))[1] is True


def test_generate_sample():
    img, mask = hdc.generate_sample(1, 0, 64, 64)
    assert img.shape == (64, 64) and img.dtype == np.float32
    assert 0.0 <= img.min() and img.max() <= 1.0
    assert 0.03 <= mask.mean() <= 0.5
    img2, _ = hdc.generate_sample(1, 0, 64, 64)
    assert np.array_equal(img, img2)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        hdc.gram_matrix(np.zeros((2, 2)), "nope")
    with pytest.raises(ValueError):
        hdc.renyi_entropy(np.eye(2), 0.0)


def test_property_suites_quick():
    results = hdc.run_property_suites(gradient_seeds=1, entropy_matrices=10, metric_pairs=50)
    assert {r["name"] for r in results} >= {"gradient", "entropy", "metrics"}
    assert all(r["pass"] for r in results), results
