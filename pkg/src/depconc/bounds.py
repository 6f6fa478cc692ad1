"""Tail-bound evaluators and inequality diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidGamma, MissingCoordinateConstants, WeightsTooLarge, WrongRepresentation
from .gamma import GammaMatrix
from .mixing import InterdependenceMatrix, cond_exp_operator, operator_norm
from .model import CoordinateSpace, ProductModel, oscillation_vector
from .transport import herbst_integral, kl, log_mgf, w1

DEFAULT_LAMBDA_GRID = (-4.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(eq=False)
class TailBound:
    method: str
    t_grid: np.ndarray
    values: np.ndarray
    preconditions_ok: bool = True
    constants: dict = field(default_factory=dict)
    one_sided: bool = False
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "preconditions_ok": self.preconditions_ok,
            "one_sided": self.one_sided,
            "degenerate": self.degenerate,
            "constants": {k: float(v) for k, v in self.constants.items()},
            "t": [float(t) for t in self.t_grid],
            "values": [float(v) for v in self.values] if self.preconditions_ok else None,
            "notes": list(self.notes),
        }


def _grid(t) -> np.ndarray:
    return np.atleast_1d(np.asarray(t, dtype=float))


def _subgaussian_tail(t_grid: np.ndarray, prefactor: float, denom: float) -> tuple[np.ndarray, bool]:
    """prefactor * exp(-t^2 / denom), with denom = 0 meaning a point mass."""
    if denom <= 0:
        return np.where(t_grid > 0, 0.0, prefactor), True
    return prefactor * np.exp(-t_grid ** 2 / denom), False


def azuma_tail(widths, t: float) -> float:
    """2 exp(-2 t^2 / sum w^2) for a martingale whose increments have ranges ``widths``."""
    w = np.asarray(widths, dtype=float)
    if np.any(w < 0):
        raise ValueError("widths must be nonnegative")
    vals, _ = _subgaussian_tail(_grid(t), 2.0, float(w @ w) / 2.0)
    return float(vals[0])


def azuma_mgf(widths, lam: float) -> float:
    w = np.asarray(widths, dtype=float)
    return float(np.exp(lam * lam * (w @ w) / 8.0))


def azuma_bound(widths, t_grid) -> TailBound:
    w = np.asarray(widths, dtype=float)
    t = _grid(t_grid)
    vals, degenerate = _subgaussian_tail(t, 2.0, float(w @ w) / 2.0)
    return TailBound("azuma", t, vals, True, {"sum_sq_widths": float(w @ w)}, degenerate=degenerate)


def martingale_tail(gamma: GammaMatrix, delta, t) -> TailBound:
    """2 exp(-2 t^2 / ||Gamma delta||^2)."""
    if not gamma.valid:
        raise InvalidGamma(f"{gamma.method} Gamma is not valid: {'; '.join(gamma.notes)}")
    d = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("oscillation vector must be finite")
    v = gamma.entries @ d
    sq = float(v @ v)
    tg = _grid(t)
    vals, degenerate = _subgaussian_tail(tg, 2.0, sq / 2.0)
    return TailBound(gamma.method, tg, vals, True, {"gamma_delta_sq": sq}, degenerate=degenerate)


def mcdiarmid_tail(alphas, delta, t) -> TailBound:
    """McDiarmid's bound 2 exp(-2 t^2 / sum (alpha_i delta_i)^2); sound only for product laws."""
    w = np.asarray(alphas, dtype=float) * np.asarray(delta, dtype=float)
    tg = _grid(t)
    vals, degenerate = _subgaussian_tail(tg, 2.0, float(w @ w) / 2.0)
    return TailBound("mcdiarmid", tg, vals, True, {"sum_sq_weights": float(w @ w)}, degenerate=degenerate)


def tensorized_tc_constant(gamma: GammaMatrix, metrics: Sequence[CoordinateSpace], c_coord=None) -> float:
    """c = sum_i c_i (sum_j V_ij)^2 with V recovered as Gamma row i / ||rho_i||.

    ``c_coord`` defaults to alpha_i^2 / 4 when every metric is scaled trivial.
    """
    metrics = list(metrics)
    diam = np.array([m.diameter for m in metrics])
    if c_coord is None:
        alphas = [m.alpha for m in metrics]
        if any(a is None for a in alphas):
            raise MissingCoordinateConstants("per-coordinate constants are required for non-trivial metrics")
        c_coord = np.array(alphas) ** 2 / 4.0
    c_coord = np.asarray(c_coord, dtype=float)
    V = gamma.entries / diam[:, None]
    return float(c_coord @ V.sum(axis=1) ** 2)


def tensorized_tc_tail(c: float, t) -> TailBound:
    """Chernoff tail 2 exp(-t^2 / (2c)) for a c-subgaussian 1-Lipschitz function."""
    tg = _grid(t)
    vals, degenerate = _subgaussian_tail(tg, 2.0, 2.0 * c)
    return TailBound("tensorized_tc", tg, vals, True, {"c": float(c)}, degenerate=degenerate)


def samson_tail(gamma_goldstein: GammaMatrix, alpha, t) -> TailBound:
    """One-sided bound exp(-t^2 / (2 ||Delta||_2^2)) with Delta = sqrt(Gamma) entrywise.

    Only constant weights ``alpha`` are supported, with sum alpha^2 <= 1;
    Gamma must come from the Goldstein construction under unit trivial metrics.
    """
    a = np.asarray(alpha, dtype=float)
    if float(a @ a) > 1.0 + 1e-12:
        raise WeightsTooLarge(f"sum of squared weights is {float(a @ a)!r} > 1")
    delta_mat = np.sqrt(np.clip(gamma_goldstein.entries, 0.0, None))
    norm = operator_norm(delta_mat, tol=1e-10)
    tg = _grid(t)
    vals, degenerate = _subgaussian_tail(tg, 1.0, 2.0 * norm ** 2)
    return TailBound("samson", tg, vals, True, {"delta_norm": norm}, one_sided=True, degenerate=degenerate)


def chatterjee_tail(C: InterdependenceMatrix | np.ndarray, alpha, t) -> TailBound:
    """2 exp(-(1 - ||C||_2) t^2 / sum alpha^2); flagged inapplicable when ||C||_2 >= 1."""
    mat = C.C if isinstance(C, InterdependenceMatrix) else np.asarray(C, dtype=float)
    norm = operator_norm(mat)
    a = np.asarray(alpha, dtype=float)
    tg = _grid(t)
    if norm >= 1.0:
        return TailBound("chatterjee", tg, np.full(tg.shape, np.nan), False, {"C_norm": norm},
                         notes=["||C||_2 >= 1"])
    vals, degenerate = _subgaussian_tail(tg, 2.0, float(a @ a) / (1.0 - norm))
    return TailBound("chatterjee", tg, vals, True, {"C_norm": norm}, degenerate=degenerate)


def subgaussian_check(model: ProductModel, f, c: float, lambda_grid=DEFAULT_LAMBDA_GRID, slack: float = 1e-10):
    """Compare the exact log-MGF with c lam^2 / 2 on a grid; returns ``(ok, worst_slack)``."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    f = np.asarray(f, dtype=float)
    worst = -np.inf
    for lam in lambda_grid:
        worst = max(worst, log_mgf(model.pmf, f, lam) - c * lam * lam / 2.0)
    return bool(worst <= slack), float(worst)


def tc_check(mu, metric, c: float, samples: int = 500, seed: int = 0) -> float:
    """Largest W(mu, nu) / sqrt(2 c D(nu || mu)) over random Dirichlet nu with D > 0."""
    if not c > 0:
        raise ValueError("c must be positive")
    mu = np.asarray(mu, dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        nu = rng.dirichlet(np.ones(mu.size))
        d = kl(nu, mu)
        if not d > 0 or not np.isfinite(d):
            continue
        worst = max(worst, w1(mu, nu, metric).value / np.sqrt(2.0 * c * d))
    return float(worst)


def entropy_tensorization_check(product_model: ProductModel, nu) -> tuple[float, float]:
    """Both sides of D(nu || mu) <= sum_i E_nu D(nu_i(.|X^{T minus i}) || mu_i) for product mu."""
    law = product_model.law
    if law.kind != "product":
        raise WrongRepresentation("entropy tensorization needs a product reference law")
    nu = np.asarray(nu, dtype=float).ravel()
    lhs = kl(nu, product_model.pmf)
    joint = nu.reshape(product_model.sizes)
    rhs = 0.0
    for i, mi in enumerate(law.marginals):
        moved = np.moveaxis(joint, i, -1)
        mass = moved.sum(axis=-1)
        for idx in np.ndindex(mass.shape):
            if mass[idx] <= 0:
                continue
            cond = moved[idx] / mass[idx]
            rhs += mass[idx] * kl(cond, mi)
    assert lhs <= rhs + 1e-10, f"entropy tensorization fails: {lhs} > {rhs}"
    return float(lhs), float(rhs)


def herbst_residual(model: ProductModel, f, lam: float) -> float:
    """|psi_f(lam) - lam int_0^lam D(mu^(tf) || mu) / t^2 dt|."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mu = model.pmf
    return abs(log_mgf(mu, f, lam) - herbst_integral(mu, f, lam))


def martingale_differences(model: ProductModel, f) -> list[np.ndarray]:
    """M(i) = K(i+1) f - K(i) f for i = 1..n, as full tables."""
    levels = [cond_exp_operator(model, i, f) for i in range(1, model.n + 2)]
    return [levels[i + 1] - levels[i] for i in range(model.n)]


def decomposition_widths(model: ProductModel, f) -> np.ndarray:
    """Exact conditional ranges of the martingale differences.

    For each i this is the largest spread of K(i+1) f over values of x_i of
    positive conditional probability, maximized over positive-probability
    prefixes; these are admissible ``||B - A||_inf`` for Azuma-Hoeffding.
    """
    n = model.n
    joint = model.joint
    out = np.zeros(n)
    for i in range(n):
        g = cond_exp_operator(model, i + 2, f).reshape(model.sizes)
        # g depends on x_0..x_i only
        g = g[(Ellipsis,) + (0,) * (n - i - 1)] if i < n - 1 else g
        mass = joint.sum(axis=tuple(range(i + 1, n))) if i < n - 1 else joint
        live = mass > 0
        hi = np.where(live, g, -np.inf).max(axis=-1)
        lo = np.where(live, g, np.inf).min(axis=-1)
        spread = np.where(np.isfinite(hi) & np.isfinite(lo), hi - lo, 0.0)
        out[i] = float(spread.max())
    return out
