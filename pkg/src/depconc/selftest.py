"""Quick invariant suites run by ``depconc selftest`` next to the soundness harness."""

from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from . import bounds, documents, gamma as gm
from .mixing import dobrushin_theta
from .transport import kl, tv, w1
from .validate import gibbs_sampler_kernel, instance_seed, random_lipschitz_function, random_model


def _metric(rng, m: int) -> np.ndarray:
    pts = rng.normal(size=(m, 2))
    return np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)


def _w1_duality(seed: int, count: int = 50):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        m = int(rng.integers(2, 7))
        r = w1(rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m)), _metric(rng, m))
        worst = max(worst, r.duality_gap)
    return worst <= 1e-8, f"max gap {worst:.2e}"


def _pinsker(seed: int, count: int = 100):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(count):
        m = int(rng.integers(2, 8))
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        worst = max(worst, tv(p, q) - np.sqrt(kl(p, q) / 2.0))
    return worst <= 1e-12, f"max excess {worst:.2e}"


def _dobrushin(seed: int, count: int = 50):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(count):
        m = int(rng.integers(2, 7))
        K = rng.dirichlet(np.ones(m), size=m)
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        worst = max(worst, tv(p @ K, q @ K) - dobrushin_theta(K) * tv(p, q))
    return worst <= 1e-12, f"max excess {worst:.2e}"


def _models(seed: int, count: int, n_max: int = 4):
    for k in range(count):
        s = instance_seed(seed, k)
        fam = ("explicit", "markov", "gibbs_chain", "product")[k % 4]
        n = 1 + s % n_max
        yield random_model(s, n, 3, fam, random_alpha=bool(k % 2)), s


def _martingale(seed: int, count: int = 20):
    worst = 0.0
    for model, s in _models(seed, count):
        f = random_lipschitz_function(model, s)
        total = sum(bounds.martingale_differences(model, f))
        worst = max(worst, float(np.abs(total - (f - model.pmf @ f)).max()))
    return worst <= 1e-10, f"max residual {worst:.2e}"


def _gibbs_invariance(seed: int, count: int = 20):
    worst = 0.0
    for model, _ in _models(seed, count):
        mu = model.pmf
        worst = max(worst, tv(mu @ gibbs_sampler_kernel(model), mu))
    return worst <= 1e-12, f"max TV {worst:.2e}"


def _dominance(seed: int, count: int = 20):
    worst = -np.inf
    for model, _ in _models(seed, count):
        gap = gm.gamma_goldstein(model).entries - gm.gamma_chazottes(model).entries
        worst = max(worst, float(gap.max()))
    return worst <= 1e-10, f"max excess {worst:.2e}"


def _herbst(seed: int, count: int = 5):
    worst = 0.0
    for model, s in _models(seed, count, n_max=3):
        f = random_lipschitz_function(model, s)
        worst = max(worst, bounds.herbst_residual(model, f, 1.0))
    return worst <= 1e-6, f"max residual {worst:.2e}"


def _round_trip(seed: int, count: int = 12):
    ok = True
    for model, _ in _models(seed, count):
        once = documents.dumps(documents.model_to_dict(model))
        twice = documents.dumps(documents.model_to_dict(documents.model_from_dict(documents.model_to_dict(model))))
        ok &= once == twice
    return ok, f"{count} documents"


CHECKS: dict[str, Callable] = {
    "w1_duality": _w1_duality,
    "pinsker": _pinsker,
    "dobrushin_contraction": _dobrushin,
    "martingale_sum": _martingale,
    "gibbs_sampler_invariance": _gibbs_invariance,
    "goldstein_le_chazottes": _dominance,
    "herbst_identity": _herbst,
    "document_round_trip": _round_trip,
}


def run_invariants(seed: int) -> Iterator[tuple[str, bool, str]]:
    for name, check in CHECKS.items():
        ok, detail = check(seed)
        yield name, bool(ok), detail
