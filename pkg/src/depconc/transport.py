"""Distances and divergences between laws on finite spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import CapExceeded, DimensionMismatch, NoConvergence, QuadratureFailure, SolverFailure
from .model import ProductModel

WBAR_STATE_CAP = 1024
WBAR_MAX_ITER = 500
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True, eq=False)
class CouplingTable:
    weights: np.ndarray

    @property
    def first_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def second_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=0)


@dataclass(frozen=True, eq=False)
class TransportResult:
    """Optimal value, an optimal coupling, and a Kantorovich potential pair.

    ``dual_potentials`` is ``(phi, -phi)`` with ``phi`` 1-Lipschitz for the
    metric, so ``sum(phi * (p - q))`` is a dual lower bound on ``value``.
    """

    value: float
    coupling: CouplingTable
    dual_potentials: tuple[np.ndarray, np.ndarray]
    duality_gap: float


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise DimensionMismatch(f"distributions have sizes {p.size} and {q.size}")
    return p, q


def tv(p, q) -> float:
    """Total variation distance, half the L1 distance."""
    p, q = _check_pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def _trivial_coupling(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """A TV-optimal coupling: keep the overlap on the diagonal, spread the rest."""
    overlap = np.minimum(p, q)
    plan = np.diag(overlap)
    d = 1.0 - overlap.sum()
    if d > 0:
        plan = plan + np.outer(p - overlap, q - overlap) / d
    return plan


def transport_lp(p: np.ndarray, q: np.ndarray, cost: np.ndarray):
    """Exact min-cost transport between ``p`` and ``q`` as an LP.

    Returns ``(value, plan, u, v)`` with ``u, v`` the dual multipliers of the
    row and column constraints. Zero-mass rows/columns are dropped first.
    """
    rows = np.flatnonzero(p > 0)
    cols = np.flatnonzero(q > 0)
    c = cost[np.ix_(rows, cols)]
    m, k = c.shape
    a_eq = np.zeros((m + k, m * k))
    for r in range(m):
        a_eq[r, r * k:(r + 1) * k] = 1.0
    for s in range(k):
        a_eq[m + s, s::k] = 1.0
    b_eq = np.concatenate([p[rows], q[cols]])
    res = linprog(c.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=HIGHS_OPTIONS)
    if res.status != 0:
        raise SolverFailure(f"transport LP failed: {res.message}")
    plan = np.zeros((p.size, q.size))
    # HiGHS may leave entries a feasibility tolerance below zero
    plan[np.ix_(rows, cols)] = np.clip(res.x.reshape(m, k), 0.0, None)
    u = np.zeros(p.size)
    v = np.zeros(q.size)
    u[rows] = res.eqlin.marginals[:m]
    v[cols] = res.eqlin.marginals[m:]
    return float((plan * cost).sum()), plan, u, v


def w1(p, q, metric) -> TransportResult:
    """L1-Wasserstein distance under ``metric``, with primal and dual certificates."""
    p, q = _check_pair(p, q)
    d = np.asarray(metric, dtype=float)
    if d.shape != (p.size, p.size):
        raise DimensionMismatch(f"metric shape {d.shape} does not match support size {p.size}")
    off = d[~np.eye(p.size, dtype=bool)]
    if off.size == 0 or np.all(off == off[0]):
        alpha = float(off[0]) if off.size else 0.0
        plan = _trivial_coupling(p, q)
        phi = alpha * (p > q).astype(float)
        value = alpha * tv(p, q)
        dual = float(phi @ (p - q))
        return TransportResult(value, CouplingTable(plan), (phi, -phi), abs(value - dual))

    value, plan, _, v = transport_lp(p, q, d)
    # c-transform of the column potential: 1-Lipschitz because d is a metric
    cols = q > 0
    phi = (d[:, cols] - v[cols][None, :]).min(axis=1)
    dual = float(phi @ (p - q))
    gap = value - dual
    if gap > 1e-8 or gap < -1e-8:
        raise SolverFailure(f"transport duality gap {gap:.3e} exceeds tolerance")
    return TransportResult(value, CouplingTable(plan), (phi, -phi), abs(gap))


def kl(nu, mu) -> float:
    """Relative entropy D(nu || mu) in nats; +inf when nu charges a mu-null state."""
    nu, mu = _check_pair(nu, mu)
    on = nu > 0
    if np.any(mu[on] <= 0):
        return float("inf")
    # rounding can push near-equal laws slightly below zero
    return max(0.0, float(np.sum(nu[on] * (np.log(nu[on]) - np.log(mu[on])))))


def _log_weights(mu: np.ndarray, f: np.ndarray, t: float):
    support = mu > 0
    logw = np.full(mu.shape, -np.inf)
    logw[support] = np.log(mu[support]) + t * f[support]
    return logw, support


def tilt(mu, f, t: float) -> np.ndarray:
    """The tilted law proportional to exp(t f) mu."""
    mu, f = _check_pair(mu, f)
    if t == 0:
        return mu.copy()
    logw, support = _log_weights(mu, f, t)
    out = np.zeros_like(mu)
    shifted = logw[support] - logw[support].max()
    w = np.exp(shifted)
    out[support] = w / w.sum()
    return out


def log_mgf(mu, f, lam: float) -> float:
    """psi_f(lam) = log E_mu exp(lam (f - E_mu f))."""
    mu, f = _check_pair(mu, f)
    if lam == 0:
        return 0.0
    g = f - mu @ f
    support = mu > 0
    if abs(lam) * np.abs(g[support]).max() < 1.0:
        # log1p/expm1 keeps relative accuracy when psi is O(lam^2) and tiny
        return float(np.log1p(mu[support] @ np.expm1(lam * g[support])))
    logw, support = _log_weights(mu, g, lam)
    return float(logsumexp(logw[support]))


def tilted_kl(mu, f, t: float) -> float:
    """D(tilt(mu, f, t) || mu) computed from log-ratios to avoid cancellation."""
    mu, f = _check_pair(mu, f)
    if t == 0:
        return 0.0
    g = f - mu @ f
    support = mu > 0
    psi = log_mgf(mu, f, t)
    nu = tilt(mu, g, t)
    return float(np.sum(nu[support] * (t * g[support] - psi)))


def variance(mu, f) -> float:
    mu, f = _check_pair(mu, f)
    m = mu @ f
    return float(mu @ (f - m) ** 2)


def adaptive_simpson(fn, a: float, b: float, tol: float = 1e-12, max_depth: int = 48) -> float:
    def simpson(fa, fm, fb, width):
        return width * (fa + 4.0 * fm + fb) / 6.0

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureFailure("adaptive Simpson hit its depth limit", achieved=abs(delta))
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1) + recurse(m, b, fm, frm, fb, right, tol / 2, depth + 1)

    fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)


def herbst_integral(mu, f, lam: float, eps: float = 1e-4, tol: float = 1e-12) -> float:
    """lam * int_0^lam D(tilt(mu, f, t) || mu) / t^2 dt.

    The integrand tends to Var_mu(f)/2 at 0; the piece [0, eps] uses the
    trapezoid rule with that limit and [eps, lam] uses adaptive Simpson.
    """
    mu, f = _check_pair(mu, f)
    if lam == 0:
        return 0.0
    if lam < 0:
        return herbst_integral(mu, -f, -lam, eps, tol)

    def integrand(t):
        return tilted_kl(mu, f, t) / (t * t)

    eps = min(eps, lam)
    head = 0.5 * eps * (0.5 * variance(mu, f) + integrand(eps))
    body = adaptive_simpson(integrand, eps, lam, tol) if lam > eps else 0.0
    return lam * (head + body)


def _coordinate_costs(model: ProductModel, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Array R[i, x, y] = rho_i(x_i, y_i) for states ``rows`` x ``cols``."""
    return np.stack([
        c.metric[rows[:, i][:, None], cols[:, i][None, :]] for i, c in enumerate(model.coordinates)
    ])


def wbar(mu, nu, model: ProductModel, tol: float = 1e-9, max_iter: int = WBAR_MAX_ITER, raise_on_stall: bool = False):
    """Bracket the coupling functional sqrt(sum_i (E_P rho_i(X_i, Y_i))^2) minimized over couplings.

    The set of achievable vectors (E_P rho_i)_i is a polytope whose vertices
    come from exact transport solves, so the minimizer is found by Wolfe's
    min-norm-point method (a fully corrective conditional-gradient scheme).
    Returns ``(upper, lower)``.
    """
    mu, nu = _check_pair(mu, nu)
    if mu.size != model.num_states:
        raise DimensionMismatch("laws do not live on the model's state space")
    rows = np.flatnonzero(mu > 0)
    cols = np.flatnonzero(nu > 0)
    if max(rows.size, cols.size) > WBAR_STATE_CAP:
        raise CapExceeded(f"wbar supports at most {WBAR_STATE_CAP} states per side")
    states = model.states()
    R = _coordinate_costs(model, states[rows], states[cols])
    p, q = mu[rows], nu[cols]

    def vertex(weights):
        cost = np.tensordot(weights, R, axes=1)
        _, plan, _, _ = transport_lp(p, q, cost)
        return np.tensordot(R, plan, axes=([1, 2], [0, 1]))

    pts = [vertex(np.ones(model.n))]
    lam = np.array([1.0])
    x = pts[0].copy()
    lower = 0.0
    for _ in range(max_iter):
        xx = float(x @ x)
        if xx <= 1e-30:
            return 0.0, 0.0
        v = vertex(x)
        xv = float(x @ v)
        norm = np.sqrt(xx)
        lower = max(lower, xv / norm)
        if norm - lower <= tol * (1.0 + norm):
            return norm, min(lower, norm)
        if any(np.allclose(v, s, rtol=0, atol=1e-14) for s in pts):
            return norm, min(lower, norm)
        pts.append(v)
        lam = np.append(lam, 0.0)
        while True:
            P = np.array(pts)
            alpha = _affine_min_norm(P)
            if np.all(alpha > 1e-15):
                lam = alpha
                x = alpha @ P
                break
            neg = np.flatnonzero(alpha <= 1e-15)
            ratio = lam[neg] / (lam[neg] - alpha[neg])
            hit = neg[int(np.argmin(ratio))]
            lam = lam + float(ratio.min()) * (alpha - lam)
            keep = lam > 1e-15
            keep[hit] = False
            pts = [s for s, k in zip(pts, keep) if k]
            lam = lam[keep] / lam[keep].sum()
            x = lam @ np.array(pts)
    if raise_on_stall:
        raise NoConvergence(f"wbar did not converge in {max_iter} iterations")
    norm = float(np.sqrt(x @ x))
    return norm, min(lower, norm)


def _affine_min_norm(P: np.ndarray) -> np.ndarray:
    """Coefficients of the min-norm point in the affine hull of the rows of ``P``."""
    k = P.shape[0]
    G = P @ P.T
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = G
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]
