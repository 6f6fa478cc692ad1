"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that is printed in the terminal
summary; running this file as a script prints the same lines.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, hamming, make_m1, make_p1
from depconc import bounds, gamma as gm
from depconc.cli import main as cli_main
from depconc.mixing import dobrushin_theta, interdependence_matrix
from depconc.model import CoordinateSpace, JointLaw, ProductModel, oscillation_vector
from depconc.transport import kl, transport_lp, tv, w1
from depconc.validate import (
    gibbs_sampler_kernel,
    instance_seed,
    random_lipschitz_function,
    random_model,
    soundness_suite,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _models(master, count, family=None, n_max=5, m_max=4, random_alpha=True):
    fams = ("explicit", "markov", "gibbs_chain", "product")
    for k in range(count):
        s = instance_seed(master, k)
        n = 1 + s % n_max
        yield random_model(s, n, m_max, family or fams[k % 4], random_alpha=random_alpha and bool(k % 2)), s


def test_criterion_1_mcdiarmid_recovery():
    start = time.perf_counter()
    worst = 0.0
    t = np.linspace(0, 4, 17)
    for model, s in _models(1, 20, family="product"):
        alphas = model.alphas
        g = gm.gamma_goldstein(model)
        # delta(f) = 1 exactly: f = sum_i x_i / alpha_i with each alphabet's largest value spread
        f = random_lipschitz_function(model, s, "linear")
        d = oscillation_vector(f, model)
        exact_form = 2 * np.exp(-2 * t**2 / np.sum((alphas * d) ** 2))
        worst = max(worst, float(np.abs(bounds.martingale_tail(g, d, t).values - exact_form).max()))
        ones = np.ones(model.n)
        literal = 2 * np.exp(-2 * t**2 / np.sum(alphas**2))
        worst = max(worst, float(np.abs(bounds.martingale_tail(g, ones, t).values - literal).max()))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 5, f"max |diff| {worst:.1e} over 20 product laws in {elapsed:.2f}s")


def test_criterion_2_soundness():
    start = time.perf_counter()
    reports = soundness_suite(42, 100, n_max=5, m_max=4, raise_on_violation=False)
    elapsed = time.perf_counter() - start
    violations = sum(not r.passed for r in reports)
    applicable = {m for r in reports for m, res in r.methods.items() if res.applicable}
    required = {"goldstein", "chazottes", "kulske", "markov_theta", "samson", "chatterjee", "azuma"}
    worst = max(res.max_violation for r in reports for res in r.methods.values() if res.applicable)
    ok = violations == 0 and required <= applicable and elapsed < 180
    record(2, ok, f"{violations} violations in 100 instances, worst excess {worst:.1e}, {elapsed:.1f}s")


def test_criterion_3_m1_anchors():
    m1 = make_m1()
    anchor = np.array([[1, 0.7, 0.49], [0, 1, 0.7], [0, 0, 1]])
    ref = np.array(oracles.goldstein_gamma(oracles.from_flat(m1.pmf, m1.sizes), m1.sizes))
    g = gm.gamma_goldstein(m1).entries
    mt = gm.gamma_markov_theta_for(m1).entries
    sq = bounds.martingale_tail(gm.gamma_goldstein(m1), oscillation_vector(hamming(m1), m1), 1.0).constants["gamma_delta_sq"]
    err = max(np.abs(g - anchor).max(), np.abs(mt - anchor).max(), np.abs(g - ref).max())
    ok = err <= 1e-12 and abs(sq - 8.6861) <= 1e-10
    record(3, ok, f"Gamma error {err:.1e}, ||Gamma delta||^2 = {sq:.12f}")


def test_criterion_4_dominance():
    worst_c = max(float((gm.gamma_goldstein(m).entries - gm.gamma_chazottes(m).entries).max())
                  for m, _ in _models(4, 100))
    worst_m = -np.inf
    for m, _ in _models(5, 50, family="markov"):
        chain = gm.MarkovChainView.from_model(m)
        worst_m = max(worst_m, float((gm.gamma_goldstein(m).entries - gm.gamma_markov_theta(chain, m.coordinates).entries).max()))
    worst_g = -np.inf
    for m, _ in _models(6, 30, family="gibbs_chain", random_alpha=False):
        theta = gm.gibbs_theta_bounds(m.law.potentials).max() if m.law.potentials else 0.0
        assert theta < 1
        dist = np.abs(np.subtract.outer(np.arange(m.n), np.arange(m.n)))
        env = np.where(dist > 0, theta ** dist.astype(float), 0.0)
        worst_g = max(worst_g, float((interdependence_matrix(m).C - env).max()))
    ok = worst_c <= 1e-10 and worst_m <= 1e-10 and worst_g <= 1e-9
    record(4, ok, f"max excess: chazottes {worst_c:.1e}, markov_theta {worst_m:.1e}, gibbs envelope {worst_g:.1e}")


def test_criterion_5_transport_core():
    rng = np.random.default_rng(5)
    gap = 0.0
    for _ in range(500):
        m = int(rng.integers(2, 8))
        pts = rng.normal(size=(m, 3))
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        res = w1(p, q, d)
        phi = res.dual_potentials[0]
        assert np.all(phi[:, None] - phi[None, :] <= d + 1e-10)
        gap = max(gap, abs(float((res.coupling.weights * d).sum()) - float(phi @ (p - q))))
    triv = 0.0
    for _ in range(500):
        m = int(rng.integers(2, 8))
        a = float(rng.uniform(0.1, 5))
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        d = a * (1 - np.eye(m))
        triv = max(triv, abs(w1(p, q, d).value - a * tv(p, q)), abs(transport_lp(p, q, d)[0] - a * tv(p, q)))
    pinsker = max(tv(p, q) - math.sqrt(kl(p, q) / 2)
                  for p, q in (rng.dirichlet(np.ones(int(rng.integers(2, 8))), size=2) for _ in range(500)))
    contraction = -np.inf
    for _ in range(200):
        m = int(rng.integers(2, 7))
        K = rng.dirichlet(np.ones(m) * 0.7, size=m)
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        contraction = max(contraction, tv(p @ K, q @ K) - dobrushin_theta(K) * tv(p, q))
    ok = gap <= 1e-8 and triv <= 1e-12 and pinsker <= 1e-12 and contraction <= 1e-12
    record(5, ok, f"gap {gap:.1e}, trivial {triv:.1e}, Pinsker excess {pinsker:.1e}, Dobrushin excess {contraction:.1e}")


def test_criterion_6_martingale_identities():
    resid, excess = 0.0, -np.inf
    for model, s in _models(6, 100):
        f = random_lipschitz_function(model, s, ("table", "linear", "threshold")[s % 3])
        total = sum(bounds.martingale_differences(model, f))
        resid = max(resid, float(np.abs(total - (f - model.pmf @ f)).max()))
        widths = bounds.decomposition_widths(model, f)
        gd = gm.gamma_goldstein(model).entries @ oscillation_vector(f, model)
        excess = max(excess, float((widths - gd).max()))
    record(6, resid <= 1e-10 and excess <= 1e-10, f"sum residual {resid:.1e}, range excess {excess:.1e}")


def test_criterion_7_herbst_and_entropy():
    worst = 0.0
    for model, s in _models(7, 20, n_max=4, m_max=3):
        f = random_lipschitz_function(model, s)
        for lam in (0.25, 0.5, 1.0):
            worst = max(worst, bounds.herbst_residual(model, f, lam))
    rng = np.random.default_rng(7)
    slack = -np.inf
    for model, s in _models(8, 100, family="product", n_max=4, m_max=3):
        nu = rng.dirichlet(np.ones(model.num_states) * rng.choice([0.3, 1.0, 5.0]))
        lhs, rhs = bounds.entropy_tensorization_check(model, nu)
        slack = max(slack, lhs - rhs)
    record(7, worst <= 1e-6 and slack <= 1e-10, f"Herbst residual {worst:.1e}, entropy lhs - rhs max {slack:.1e}")


def test_criterion_8_subgaussian_consistency():
    failures, worst = 0, -np.inf
    for model, s in _models(8, 200, n_max=4, m_max=3, random_alpha=True):
        f = random_lipschitz_function(model, s, ("table", "linear", "threshold")[s % 3])
        c = bounds.tensorized_tc_constant(gm.gamma_goldstein(model), model.coordinates)
        ok, w = bounds.subgaussian_check(model, f, c)
        failures += not ok
        worst = max(worst, w)
    record(8, failures == 0, f"{failures} failures in 200, worst log-MGF excess {worst:.1e}")


def test_criterion_9_gibbs_sampler_invariance():
    worst = max(tv(m.pmf @ gibbs_sampler_kernel(m), m.pmf) for m, _ in _models(9, 50))
    record(9, worst <= 1e-12, f"max TV(mu K, mu) {worst:.1e}")


def _cli(*argv, capture=True):
    proc = subprocess.run([sys.executable, "-m", "depconc.cli", *map(str, argv)], capture_output=True, text=True)
    return proc.returncode, proc.stdout


def test_criterion_10_cli_contract():
    p1, m1, fh = FIXTURES / "p1.json", FIXTURES / "m1.json", FIXTURES / "hamming.json"
    t = "0,0.5,1,1.5,2,3"
    runs = {}
    for name, path in (("p1", p1), ("m1", m1)):
        for cmd in ("analyze", "validate"):
            a = _cli(cmd, "--model", path, "--function", fh, "--t", t, "--seed", 7)
            b = _cli(cmd, "--model", path, "--function", fh, "--t", t, "--seed", 7)
            assert a == b, f"{cmd} on {name} is not reproducible"
            runs[name, cmd] = a
    tt = np.array([float(x) for x in t.split(",")])
    p1_rep = json.loads(runs["p1", "analyze"][1])
    c1 = np.abs(np.array(p1_rep["results"]["goldstein"]["values"]) - 2 * np.exp(-2 * tt**2 / 3)).max() <= 1e-12
    m1_rep = json.loads(runs["m1", "analyze"][1])["results"]
    anchor = [[1, 0.7, 0.49], [0, 1, 0.7], [0, 0, 1]]
    c3 = (np.abs(np.array(m1_rep["goldstein"]["gamma"]) - anchor).max() <= 1e-12
          and np.abs(np.array(m1_rep["markov_theta"]["gamma"]) - anchor).max() <= 1e-12
          and abs(m1_rep["goldstein"]["constants"]["gamma_delta_sq"] - 8.6861) <= 1e-10)
    codes = {
        "ok": runs["m1", "validate"][0],
        "parse": _cli("analyze", "--model", FIXTURES / "bad_pmf.json", "--function", fh)[0],
        "precondition": _cli("analyze", "--model", p1, "--function", fh, "--methods", "markov_theta")[0],
        "violation": _cli("validate", "--model", m1, "--function", fh, "--inject-fault", "halve-gamma")[0],
        "selftest_fault": _cli("selftest", "--seed", 42, "--instances", 10, "--inject-fault", "halve-gamma")[0],
    }
    expect = {"ok": 0, "parse": 2, "precondition": 3, "violation": 4, "selftest_fault": 4}
    ok = bool(c1 and c3 and codes == expect)
    record(10, ok, f"reproducible runs, criterion 1 numbers {c1}, criterion 3 numbers {c3}, exit codes {codes}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
