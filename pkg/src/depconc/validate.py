"""Ground truth by enumeration, sampling, random instances, and the soundness harness."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds, gamma as gm
from .errors import SoundnessViolation
from .mixing import interdependence_matrix, one_site_conditionals
from .model import CoordinateSpace, JointLaw, ProductModel, oscillation_vector

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
PROB_FLOOR = 1e-3


def splitmix64(state: int) -> int:
    """One step of the splitmix64 output function."""
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def instance_seed(master: int, index: int) -> int:
    """Seed of instance ``index``: splitmix64 of the master seed offset by the index."""
    return splitmix64((master * 0x100000001B3 + index) & MASK64)


def model_digest(model: ProductModel) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(list(model.sizes)).encode())
    for c in model.coordinates:
        h.update(np.ascontiguousarray(c.metric).tobytes())
    h.update(np.ascontiguousarray(model.pmf).tobytes())
    return h.hexdigest()[:16]


def exact_tail(model: ProductModel, f, t: float) -> float:
    """P(|f(X) - E f| >= t) by summation over the state space."""
    return float(exact_tails(model, f, [t])[0])


def exact_tails(model: ProductModel, f, t_grid, one_sided: bool = False) -> np.ndarray:
    mu = model.pmf
    f = np.asarray(f, dtype=float)
    dev = f - mu @ f
    if not one_sided:
        dev = np.abs(dev)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    # tolerate rounding in the centering when t sits exactly on an atom
    hit = dev[None, :] >= t[:, None] - 1e-12 * (1.0 + np.abs(t[:, None]))
    return (hit * mu[None, :]).sum(axis=1)


def gibbs_sampler_kernel(model: ProductModel) -> np.ndarray:
    """Dense random-scan Gibbs sampler: pick a site uniformly, resample it from its conditional.

    Sites whose conditioning configuration is null keep the current state.
    """
    n, S = model.n, model.num_states
    states = model.states()
    strides = np.array([int(np.prod(model.sizes[i + 1:], dtype=np.int64)) for i in range(n)])
    flat = np.arange(S)
    K = np.zeros((S, S))
    for i in range(n):
        cond = np.moveaxis(one_site_conditionals(model, i), -1, i)  # back to canonical axes
        # cond[x^{-i}, v] laid out with coordinate i in place: value for y at (x^{-i}, v)
        cond_flat = cond.reshape(-1)
        base = flat - states[:, i] * strides[i]
        for v in range(model.sizes[i]):
            target = base + v * strides[i]
            prob = cond_flat[target]
            undefined = np.isnan(prob)
            K[flat[~undefined], target[~undefined]] += prob[~undefined] / n
            K[flat[undefined], flat[undefined]] += (1.0 / n) / model.sizes[i]
    return K


def mc_sample(model: ProductModel, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. draws by sequential inverse-CDF sampling of each coordinate."""
    n = model.n
    out = np.zeros((count, n), dtype=np.int64)
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    joint = model.joint
    prefix_index = np.zeros(count, dtype=np.int64)
    for i in range(n):
        marg = joint.sum(axis=tuple(range(i + 1, n))) if i < n - 1 else joint
        table = marg.reshape(-1, model.sizes[i])
        rows = table[prefix_index]
        cdf = np.cumsum(rows, axis=1)
        cdf /= cdf[:, -1:]
        u = rng.random(count)
        draw = (u[:, None] >= cdf).sum(axis=1)
        draw = np.minimum(draw, model.sizes[i] - 1)
        out[:, i] = draw
        prefix_index = prefix_index * model.sizes[i] + draw
    return out


def empirical_pmf(samples: np.ndarray, model: ProductModel) -> np.ndarray:
    flat = np.ravel_multi_index(samples.T, model.sizes) if samples.size else np.zeros(0, dtype=int)
    counts = np.bincount(flat, minlength=model.num_states).astype(float)
    return counts / max(len(samples), 1)


def _floored_simplex(rng, m: int, floor: float) -> np.ndarray:
    p = rng.dirichlet(np.ones(m))
    return (1.0 - m * floor) * p + floor


def random_model(seed: int, n: int, max_size: int, family: str = "explicit", random_alpha: bool = False,
                 min_size: int = 2) -> ProductModel:
    """Reproducible random instance.

    Every kernel row and marginal entry is at least 1e-3, explicit pmfs are
    at least 1e-3 / S, and Gibbs potentials lie in [0.2, 5].
    """
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(min_size, max_size + 1)) for _ in range(n)]
    if random_alpha:
        coords = tuple(CoordinateSpace.trivial(m, float(rng.uniform(0.5, 2.0))) for m in sizes)
    else:
        coords = tuple(CoordinateSpace.trivial(m) for m in sizes)
    if family == "product":
        law = JointLaw.product([_floored_simplex(rng, m, PROB_FLOOR) for m in sizes])
    elif family == "markov":
        init = _floored_simplex(rng, sizes[0], PROB_FLOOR)
        kernels = [np.array([_floored_simplex(rng, sizes[i + 1], PROB_FLOOR) for _ in range(sizes[i])])
                   for i in range(n - 1)]
        law = JointLaw.markov(init, kernels)
    elif family == "gibbs_chain":
        pots = [rng.uniform(0.2, 5.0, size=(sizes[i], sizes[i + 1])) for i in range(n - 1)]
        law = JointLaw.gibbs_chain(pots)
    elif family == "explicit":
        S = int(np.prod(sizes))
        # peaked Dirichlet gives visibly dependent coordinates
        law = JointLaw.explicit(_floored_simplex(rng, S, PROB_FLOOR / S))
    else:
        raise ValueError(f"unknown family {family!r}")
    return ProductModel(coords, law)


def random_lipschitz_function(model: ProductModel, seed: int, kind: str = "table") -> np.ndarray:
    """Random f with max_i delta_i(f) = 1 (or f = 0 when the draw is constant)."""
    rng = np.random.default_rng(seed)
    if kind == "table":
        f = rng.uniform(-1.0, 1.0, size=model.num_states)
    elif kind == "linear":
        states = model.states()
        f = np.zeros(model.num_states)
        for i, c in enumerate(model.coordinates):
            f += rng.uniform(-1.0, 1.0, size=c.size)[states[:, i]]
    elif kind == "threshold":
        states = model.states()
        f = (states.sum(axis=1) >= rng.integers(1, max(2, states.sum(axis=1).max() + 1))).astype(float)
    else:
        raise ValueError(f"unknown function kind {kind!r}")
    scale = oscillation_vector(f, model).max()
    return f / scale if scale > 0 else np.zeros_like(f)


def default_t_grid(model: ProductModel, f, step: float = 0.25) -> np.ndarray:
    """{step, 2 step, ..., n max alpha}, cut at the largest deviation of f from its mean."""
    top = model.n * float(model.diameters.max())
    grid = np.arange(1, int(np.floor(top / step + 1e-9)) + 1) * step
    f = np.asarray(f, dtype=float)
    support = model.pmf > 0
    reach = float(np.abs(f[support] - model.pmf @ f).max()) if support.any() else 0.0
    return grid[grid <= reach + 1e-12]


def random_partition(n: int, rng) -> tuple[tuple[int, ...], ...]:
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, n), size=int(rng.integers(0, n)), replace=False)) if n > 1 else []
    edges = [0] + cuts + [n]
    return tuple(tuple(range(a, b)) for a, b in zip(edges[:-1], edges[1:]))


@dataclass(eq=False)
class MethodResult:
    applicable: bool
    max_violation: float = float("-inf")
    margin_profile: list = field(default_factory=list)
    note: str = ""

    def as_dict(self):
        return {
            "applicable": self.applicable,
            "max_violation": None if not np.isfinite(self.max_violation) else float(self.max_violation),
            "margin_profile": [float(x) for x in self.margin_profile],
            "note": self.note,
        }


@dataclass(eq=False)
class SoundnessReport:
    model_digest: str
    seed: int
    family: str
    t_grid: np.ndarray
    exact_tails: np.ndarray
    methods: dict[str, MethodResult]

    @property
    def passed(self) -> bool:
        return all(r.max_violation <= SOUNDNESS_SLACK for r in self.methods.values() if r.applicable)

    def as_dict(self) -> dict:
        return {
            "model_digest": self.model_digest,
            "seed": self.seed,
            "family": self.family,
            "t_grid": [float(t) for t in self.t_grid],
            "exact_tails": [float(p) for p in self.exact_tails],
            "methods": {k: v.as_dict() for k, v in self.methods.items()},
        }


SOUNDNESS_SLACK = 1e-12
FAMILIES = ("explicit", "markov", "gibbs_chain", "product")
FUNCTION_KINDS = ("table", "table", "linear", "threshold")

GammaHook = Callable[[gm.GammaMatrix], gm.GammaMatrix]


def evaluate_bounds(model: ProductModel, f, t_grid, gamma_hook: GammaHook | None = None,
                    partition=None) -> dict[str, bounds.TailBound]:
    """Every bound that applies to (model, f), keyed by method.

    Inapplicable methods appear with ``preconditions_ok=False``.
    """
    hook = gamma_hook or (lambda g: g)
    t = np.asarray(t_grid, dtype=float)
    delta = oscillation_vector(f, model)
    out: dict[str, bounds.TailBound] = {}

    g_gold = hook(gm.gamma_goldstein(model))
    out["goldstein"] = bounds.martingale_tail(g_gold, delta, t)
    out["chazottes"] = bounds.martingale_tail(hook(gm.gamma_chazottes(model)), delta, t)

    g_kul = gm.gamma_kulske(model)
    if g_kul.valid:
        out["kulske"] = bounds.martingale_tail(hook(g_kul), delta, t)
    else:
        out["kulske"] = bounds.TailBound("kulske", t, np.full(t.shape, np.nan), False, notes=g_kul.notes)

    if model.law.kind in ("markov", "gibbs_chain"):
        chain = gm.MarkovChainView.from_model(model)
        out["markov_theta"] = bounds.martingale_tail(hook(gm.gamma_markov_theta(chain, model.coordinates)), delta, t)
    else:
        out["markov_theta"] = bounds.TailBound("markov_theta", t, np.full(t.shape, np.nan), False,
                                               notes=["law is not a chain"])

    if partition is not None:
        g_blk = hook(gm.gamma_blocks(model, partition))
        bdelta = gm.block_oscillation_vector(f, model, partition)
        tb = bounds.martingale_tail(g_blk, bdelta, t)
        tb.method = "blocks"
        tb.notes.append(f"partition={[list(b) for b in partition]}")
        out["blocks"] = tb

    # Samson and Chatterjee are stated for Hamming-type weights w_i = alpha_i delta_i(f)
    unit = model.with_unit_metrics()
    weights = model.diameters * delta
    wnorm = float(np.linalg.norm(weights))
    g_unit = hook(gm.gamma_goldstein(unit))
    if wnorm > 0:
        sb = bounds.samson_tail(g_unit, weights / wnorm, t / wnorm)
        sb.t_grid = t
        sb.constants["weight_norm"] = wnorm
    else:
        sb = bounds.samson_tail(g_unit, np.zeros(model.n), t)
    out["samson"] = sb
    out["chatterjee"] = bounds.chatterjee_tail(interdependence_matrix(unit), weights, t)

    out["azuma"] = bounds.azuma_bound(bounds.decomposition_widths(model, f), t)

    alphas = model.alphas
    if alphas is not None:
        c = bounds.tensorized_tc_constant(g_gold, model.coordinates)
        lip = float(delta.max())
        out["tensorized_tc"] = bounds.tensorized_tc_tail(c * lip * lip, t)
        out["tensorized_tc"].constants["c_unit_lipschitz"] = c
        if model.law.kind == "product":
            out["mcdiarmid"] = bounds.mcdiarmid_tail(alphas, delta, t)
        else:
            out["mcdiarmid"] = bounds.TailBound("mcdiarmid", t, np.full(t.shape, np.nan), False,
                                                notes=["law is not a product"])
    return out


def check_instance(model: ProductModel, f, t_grid, gamma_hook: GammaHook | None = None, partition=None,
                   seed: int = 0, family: str = "") -> SoundnessReport:
    t = np.asarray(t_grid, dtype=float)
    two = exact_tails(model, f, t)
    one = exact_tails(model, f, t, one_sided=True)
    results = {}
    for name, tb in evaluate_bounds(model, f, t, gamma_hook, partition).items():
        if not tb.preconditions_ok:
            results[name] = MethodResult(False, note="; ".join(tb.notes))
            continue
        exact = one if tb.one_sided else two
        margin = tb.values - exact
        worst = float((-margin).max()) if margin.size else float("-inf")
        results[name] = MethodResult(True, worst, margin.tolist())
    return SoundnessReport(model_digest(model), seed, family, t, two, results)


def soundness_suite(seed: int, instances: int, n_max: int = 5, m_max: int = 4,
                    gamma_hook: GammaHook | None = None, raise_on_violation: bool = True,
                    families=FAMILIES) -> list[SoundnessReport]:
    """Check every applicable bound against exact tails on random (model, f) instances."""
    reports = []
    for k in range(instances):
        s = instance_seed(seed, k)
        rng = np.random.default_rng(s)
        family = families[k % len(families)]
        n = int(rng.integers(1, n_max + 1))
        model = random_model(s, n, m_max, family, random_alpha=bool(k % 2))
        f = random_lipschitz_function(model, s + 1, FUNCTION_KINDS[(k // len(families)) % len(FUNCTION_KINDS)])
        partition = random_partition(n, rng)
        t = default_t_grid(model, f)
        report = check_instance(model, f, t, gamma_hook, partition, seed=s, family=family)
        reports.append(report)
        if not report.passed:
            bad = {m: r.max_violation for m, r in report.methods.items() if r.applicable and r.max_violation > SOUNDNESS_SLACK}
            log.warning("soundness violation on instance %d: %s", k, bad)
            if raise_on_violation:
                witness = {
                    "instance": k,
                    "report": report.as_dict(),
                    "model": {"sizes": list(model.sizes), "alphas": model.diameters.tolist(),
                              "pmf": model.pmf.tolist()},
                    "f": np.asarray(f).tolist(),
                    "violations": bad,
                }
                raise SoundnessViolation(f"bound violated on instance {k}: {bad}", witness)
    return reports
