import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import hamming, unit_coords
from depconc import gamma as gm
from depconc.errors import UniquenessFails
from depconc.mixing import (
    comparison_b_vector,
    comparison_bound,
    comparison_matrix,
    cond_exp_operator,
    dobrushin_theta,
    interdependence_matrix,
    operator_norm,
    spectral_radius,
    verify_wasserstein_matrix,
)
from depconc.model import CoordinateSpace, JointLaw, ProductModel
from depconc.transport import tv
from depconc.validate import random_model


def test_dobrushin_theta_m1():
    assert dobrushin_theta([[0.9, 0.1], [0.2, 0.8]]) == pytest.approx(0.7, abs=1e-15)
    assert dobrushin_theta(np.full((3, 3), 1 / 3)) == 0.0
    assert dobrushin_theta(np.eye(3)) == 1.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6))
def test_dobrushin_contraction(seed, m):
    rng = np.random.default_rng(seed)
    K = rng.dirichlet(np.ones(m) * 0.5, size=m)
    p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
    assert tv(p @ K, q @ K) <= dobrushin_theta(K) * tv(p, q) + 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_spectral_radius_and_norm_against_dense(seed, n):
    A = np.random.default_rng(seed).uniform(0, 1, size=(n, n))
    assert spectral_radius(A) == pytest.approx(max(abs(np.linalg.eigvals(A))), rel=1e-9)
    assert operator_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-10)


def test_nilpotent_spectral_radius():
    assert spectral_radius(np.triu(np.ones((4, 4)), 1)) == pytest.approx(0.0, abs=1e-12)


def test_interdependence_m1(m1):
    C = interdependence_matrix(m1)
    assert C.C[0, 1] == pytest.approx(70 / 99, abs=1e-14)
    assert C.C[0, 2] == pytest.approx(0.0, abs=1e-15)
    assert C.spectral_radius == pytest.approx(max(abs(np.linalg.eigvals(C.C))), rel=1e-10)
    assert C.uniqueness_holds


@pytest.mark.parametrize("seed", range(8))
def test_interdependence_against_oracle(seed):
    model = random_model(seed, 3, 3, ("explicit", "markov", "gibbs_chain", "product")[seed % 4])
    ref = oracles.interdependence(oracles.from_flat(model.pmf, model.sizes), model.sizes)
    assert np.allclose(interdependence_matrix(model).C, ref, atol=1e-13)


def test_interdependence_scales_with_metrics():
    base = random_model(4, 3, 3, "explicit")
    alphas = [0.5, 2.0, 3.0]
    weighted = ProductModel(tuple(CoordinateSpace.trivial(m, a) for m, a in zip(base.sizes, alphas)), base.law)
    Cu, Cw = interdependence_matrix(base).C, interdependence_matrix(weighted).C
    assert np.allclose(Cw, Cu * np.outer(alphas, 1 / np.array(alphas)), atol=1e-13)


def test_interdependence_general_metric_uses_w1():
    d = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    coords = (CoordinateSpace(3, d), CoordinateSpace.trivial(2))
    pmf = np.array([0.3, 0.05, 0.1, 0.1, 0.05, 0.4])
    C = interdependence_matrix(ProductModel(coords, JointLaw.explicit(pmf))).C
    # law of X_0 given X_1 = 0 is (.3,.1,.05)/.45, given X_1 = 1 is (.05,.1,.4)/.55
    p = np.array([0.3, 0.1, 0.05]) / 0.45
    q = np.array([0.05, 0.1, 0.4]) / 0.55
    expect = oracles.w1_line(p.tolist(), q.tolist(), [0, 1, 2])
    assert C[0, 1] == pytest.approx(expect, abs=1e-10)


def test_comparison_matrix_identity_and_failure():
    C = np.array([[0, 0.3], [0.4, 0]])
    D = comparison_matrix(C)
    assert np.allclose((np.eye(2) - C) @ D.D, np.eye(2), atol=1e-14)
    series = sum(np.linalg.matrix_power(C, k) for k in range(200))
    assert np.allclose(D.D, series, atol=1e-14)
    with pytest.raises(UniquenessFails):
        comparison_matrix(np.array([[0, 1.0], [1.0, 0]]))


def _unique_models(count):
    seed = 0
    while count:
        nu = random_model(seed, 3, 3, ("product", "gibbs_chain", "explicit")[seed % 3])
        seed += 1
        if interdependence_matrix(nu).uniqueness_holds:
            count -= 1
            yield nu, seed


def test_comparison_lemma():
    for nu, seed in _unique_models(12):
        rng = np.random.default_rng(seed)
        mix = 0.7 * nu.pmf + 0.3 * rng.dirichlet(np.ones(nu.num_states))
        nu_t = nu.with_law(JointLaw.explicit(mix / mix.sum()))
        f = rng.uniform(-1, 1, nu.num_states)
        assert abs(nu.pmf @ f - nu_t.pmf @ f) <= comparison_bound(nu, nu_t, f) + 1e-12
        assert np.all(comparison_b_vector(nu, nu_t) >= 0)
        assert np.allclose(comparison_b_vector(nu, nu), 0, atol=1e-15)


def test_cond_exp_operator_values(p1, m1):
    assert np.allclose(cond_exp_operator(p1, 1, hamming(p1)), 1.5)
    k2 = cond_exp_operator(m1, 2, hamming(m1)).reshape(2, 2, 2)
    assert k2[0, 0, 0] == pytest.approx(0.27, abs=1e-14)
    assert k2[1, 1, 1] == pytest.approx(2.46, abs=1e-14)
    f = hamming(m1)
    assert np.array_equal(cond_exp_operator(m1, 4, f), f)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_tower_property(seed):
    model = random_model(seed, 3, 3, "explicit")
    f = np.random.default_rng(seed).uniform(-1, 1, model.num_states)
    for i in range(1, model.n + 1):
        inner = cond_exp_operator(model, i + 1, f)
        assert np.allclose(cond_exp_operator(model, i, inner), cond_exp_operator(model, i, f), atol=1e-13)
        assert model.pmf @ cond_exp_operator(model, i, f) == pytest.approx(model.pmf @ f, abs=1e-13)


def test_goldstein_rows_are_wasserstein_rows_m1(m1):
    V = gm.coupling_rows(gm.gamma_goldstein(m1), m1.diameters)
    for r in range(m1.n):
        ok, witness = verify_wasserstein_matrix(m1, r + 2, V, trials=1000, seed=13, rows=[r])
        assert ok, witness
    # a too-small row is caught
    ok, witness = verify_wasserstein_matrix(m1, 2, V * 0.5, trials=200, seed=13, rows=[0])
    assert not ok and witness["lhs"] > witness["rhs"]


def test_gibbs_chain_envelope():
    for seed in range(30):
        model = random_model(seed, 4, 3, "gibbs_chain")
        theta = gm.gibbs_theta_bounds(model.law.potentials).max()
        C = interdependence_matrix(model).C
        dist = np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
        assert np.all(C <= np.where(dist > 0, theta ** dist, 0) + 1e-9)


def test_degenerate_entries_warn():
    # X_1 is always 0, so no pair of its values can be compared
    pmf = np.array([0.5, 0.0, 0.5, 0.0])
    with pytest.warns(RuntimeWarning):
        C = interdependence_matrix(ProductModel(unit_coords(2), JointLaw.explicit(pmf)))
    assert C.degenerate


def test_b_vector_single_coordinate_general_metric():
    d = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    nu = ProductModel((CoordinateSpace(3, d),), JointLaw.explicit([0.2, 0.3, 0.5]))
    nu_t = nu.with_law(JointLaw.explicit([0.5, 0.3, 0.2]))
    expect = oracles.w1_line([0.2, 0.3, 0.5], [0.5, 0.3, 0.2], [0, 1, 2])
    assert comparison_b_vector(nu, nu_t)[0] == pytest.approx(expect, abs=1e-10)
