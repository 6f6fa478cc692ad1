"""Dobrushin coefficients, interdependence and comparison matrices, and the
conditional-expectation kernels used by the martingale decomposition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import UniquenessFails
from .model import ProductModel, oscillation_vector
from .transport import tv, w1

UNIQUENESS_MARGIN = 1e-9


def dobrushin_theta(K) -> float:
    """Largest total variation distance between two rows of ``K``."""
    K = np.asarray(K, dtype=float)
    if K.shape[0] < 2:
        return 0.0
    diffs = np.abs(K[:, None, :] - K[None, :, :]).sum(axis=2)
    return float(0.5 * diffs.max())


def spectral_radius(A, tol: float = 1e-12, max_iter: int = 20000) -> float:
    """Perron root of a nonnegative matrix.

    Power iteration on ``I + A`` keeps the iterate strictly positive, so the
    Collatz-Wielandt ratios bracket the root. If the bracket does not close
    to ``tol`` (nilpotent or defective cases converge only like 1/k) the
    dense eigenvalues decide.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0 or not np.any(A):
        return 0.0
    x = np.ones(n)
    lo, hi = 0.0, float(A.sum(axis=1).max())
    for _ in range(max_iter):
        y = A @ x
        ratios = y / x
        lo, hi = max(lo, float(ratios.min())), min(hi, float(ratios.max()))
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        x = x + y
        x /= x.max()
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def operator_norm(A, tol: float = 1e-13, max_iter: int = 20000) -> float:
    """Spectral norm of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    M = A.T @ A
    x = np.ones(A.shape[1]) + np.linspace(0.0, 1e-3, A.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = M @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            # started orthogonal to the range; fall back to a dense solve
            return float(np.linalg.norm(A, 2))
        x = y / new
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(np.sqrt(est))


@dataclass(frozen=True, eq=False)
class InterdependenceMatrix:
    C: np.ndarray
    spectral_radius: float
    skipped_pairs: int = 0
    degenerate: list = field(default_factory=list)

    @property
    def uniqueness_holds(self) -> bool:
        return self.spectral_radius < 1.0 - UNIQUENESS_MARGIN

    @property
    def row_sum_bound(self) -> float:
        return float(self.C.sum(axis=1).max()) if self.C.size else 0.0


@dataclass(frozen=True, eq=False)
class ComparisonMatrix:
    D: np.ndarray
    residual: float


def one_site_conditionals(model: ProductModel, i: int) -> np.ndarray:
    """mu_i(. | x^{T minus i}) for every configuration, coordinate i moved last.

    Configurations whose conditioning event is null come back as NaN rows.
    """
    joint = np.moveaxis(model.joint, i, -1)
    mass = joint.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(mass > 0, joint / np.where(mass > 0, mass, 1.0), np.nan)
    return cond


def interdependence_matrix(model: ProductModel) -> InterdependenceMatrix:
    """Dobrushin interdependence matrix with entries
    sup W_i(mu_i(.|x), mu_i(.|z)) / rho_j(x_j, z_j) over x, z differing at j only."""
    n = model.n
    C = np.zeros((n, n))
    skipped = 0
    degenerate = []
    for i in range(n):
        cond = one_site_conditionals(model, i)
        ci = model.coordinates[i]
        for j in range(n):
            if j == i or model.sizes[j] < 2:
                continue
            # axis of coordinate j inside cond (coordinate i was moved last)
            ax = j if j < i else j - 1
            moved = np.moveaxis(cond, ax, -2)
            mj = model.sizes[j]
            a, b = np.triu_indices(mj, k=1)
            pa = moved[..., a, :]
            pb = moved[..., b, :]
            valid = ~(np.isnan(pa).any(axis=-1) | np.isnan(pb).any(axis=-1))
            skipped += int((~valid).sum())
            if not valid.any():
                degenerate.append((i, j))
                continue
            rho_j = model.coordinates[j].metric[a, b]
            if ci.alpha is not None:
                dist = ci.alpha * 0.5 * np.abs(pa - pb).sum(axis=-1)
            else:
                dist = np.zeros(valid.shape)
                for idx in np.ndindex(valid.shape):
                    if valid[idx]:
                        dist[idx] = w1(pa[idx], pb[idx], ci.metric).value
            ratio = np.where(valid, dist / rho_j, 0.0)
            C[i, j] = float(ratio.max())
    if degenerate:
        warnings.warn(f"interdependence entries with no usable pairs: {degenerate}", RuntimeWarning, stacklevel=2)
    return InterdependenceMatrix(C, spectral_radius(C), skipped, degenerate)


def comparison_matrix(C: InterdependenceMatrix | np.ndarray) -> ComparisonMatrix:
    """D = sum_m C^m = (I - C)^{-1}, defined under the uniqueness condition."""
    if isinstance(C, InterdependenceMatrix):
        mat, radius = C.C, C.spectral_radius
    else:
        mat = np.asarray(C, dtype=float)
        radius = spectral_radius(mat)
    if radius >= 1.0 - UNIQUENESS_MARGIN:
        raise UniquenessFails(f"spectral radius {radius:.12g} is not below 1")
    eye = np.eye(mat.shape[0])
    D = np.linalg.solve(eye - mat, eye)
    residual = float(np.abs((eye - mat) @ D - eye).max()) if mat.size else 0.0
    return ComparisonMatrix(D, residual)


def comparison_b_vector(nu: ProductModel, nu_tilde: ProductModel) -> np.ndarray:
    """b_k = E_{nu_tilde} W_k(nu_k(.|X^{T minus k}), nu_tilde_k(.|X^{T minus k})).

    Configurations that are null under either law are skipped; they carry no
    nu_tilde mass in the first case and make the conditional undefined in the second.
    """
    n = nu.n
    b = np.zeros(n)
    for k in range(n):
        c1 = one_site_conditionals(nu, k)
        c2 = one_site_conditionals(nu_tilde, k)
        weight = np.moveaxis(nu_tilde.joint, k, -1).sum(axis=-1)
        ck = nu.coordinates[k]
        valid = ~(np.isnan(c1).any(axis=-1) | np.isnan(c2).any(axis=-1)) & (weight > 0)
        if ck.alpha is not None:
            dist = ck.alpha * 0.5 * np.abs(np.nan_to_num(c1) - np.nan_to_num(c2)).sum(axis=-1)
        else:
            dist = np.zeros(weight.shape)
            for idx in np.ndindex(valid.shape):
                if not valid[idx]:
                    continue
                dist[idx] = w1(c1[idx], c2[idx], ck.metric).value
        b[k] = float(np.sum(np.where(valid, weight * dist, 0.0)))
    return b


def comparison_bound(nu: ProductModel, nu_tilde: ProductModel, f) -> float:
    """Upper bound on |E_nu f - E_nu_tilde f| from the Dobrushin comparison lemma."""
    C = interdependence_matrix(nu)
    D = comparison_matrix(C).D
    delta = oscillation_vector(f, nu)
    b = comparison_b_vector(nu, nu_tilde)
    return float(delta @ D @ b)


def cond_exp_operator(model: ProductModel, i: int, f) -> np.ndarray:
    """K(i) f: the table x -> E[f(X) | X_1..X_{i-1} = x_1..x_{i-1}].

    ``i`` runs over 1..n+1 as in the kernel numbering, so i = 1 yields the
    constant E f and i = n+1 returns f. Prefixes of probability zero are NaN.
    """
    n = model.n
    if not 1 <= i <= n + 1:
        raise ValueError(f"kernel index must lie in 1..{n + 1}")
    table = np.asarray(f, dtype=float).reshape(model.sizes)
    if i == n + 1:
        return table.ravel().copy()
    joint = model.joint
    tail = tuple(range(i - 1, n))
    num = (joint * table).sum(axis=tail, keepdims=True)
    den = joint.sum(axis=tail, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return np.broadcast_to(val, model.sizes).ravel().copy()


def random_tables(model: ProductModel, trials: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(trials, model.num_states))


def verify_wasserstein_matrix(model: ProductModel, kernel, V, trials: int = 1000, seed: int = 0, rows=None, slack: float = 1e-10):
    """Randomized check of delta(K f) <= V delta(f).

    ``kernel`` is either a kernel index for ``cond_exp_operator`` or a callable
    mapping a table to a table. ``rows`` restricts the check to some rows of V.
    Returns ``(True, None)`` or ``(False, witness)``.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise ValueError("a Wasserstein matrix must be nonnegative")
    apply = kernel if callable(kernel) else (lambda f: cond_exp_operator(model, kernel, f))
    rows = list(range(model.n)) if rows is None else list(rows)
    for f in random_tables(model, trials, seed):
        lhs = oscillation_vector(apply(f), model)
        rhs = V @ oscillation_vector(f, model)
        excess = lhs[rows] - rhs[rows]
        if np.any(excess > slack):
            k = rows[int(np.argmax(excess))]
            return False, {"f": f, "row": k, "lhs": float(lhs[k]), "rhs": float(rhs[k])}
    return True, None
