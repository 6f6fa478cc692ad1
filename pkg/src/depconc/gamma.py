"""Constructors for the Gamma matrices that enter the martingale tail bound.

Row i of every matrix here is ``||rho_i||`` times row i of a Wasserstein
matrix for the kernel that fixes the first i coordinates. The coupling-based
rows (goldstein, chazottes, markov_theta, blocks) bound the expected
coordinate distance ``E rho_j(U_j, Y_j)`` by ``||rho_j|| P(U_j != Y_j)`` and
divide by the distance of the pair being compared, so they stay valid for
weighted metrics; with unit trivial metrics they are the plain TV suprema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadPartition, NonpositivePotential, UniquenessFails, WrongRepresentation
from .mixing import comparison_matrix, cond_exp_operator, dobrushin_theta, interdependence_matrix
from .model import CoordinateSpace, JointLaw, ProductModel

METHODS = ("kulske", "goldstein", "chazottes", "markov_theta", "block")


@dataclass(eq=False)
class GammaMatrix:
    entries: np.ndarray
    method: str
    valid: bool = True
    notes: list[str] = field(default_factory=list)
    block_partition: tuple[tuple[int, ...], ...] | None = None
    skipped_pairs: int = 0

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class MarkovChainView:
    initial: np.ndarray
    kernels: tuple[np.ndarray, ...]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([dobrushin_theta(k) for k in self.kernels])

    @classmethod
    def from_model(cls, model: ProductModel) -> "MarkovChainView":
        law = model.law
        if law.kind == "markov":
            return cls(law.initial, law.kernels)
        if law.kind == "gibbs_chain":
            init, kernels = gibbs_chain_kernels(law.potentials, model.sizes[0])
            return cls(init, kernels)
        raise WrongRepresentation(f"a chain view needs a markov or gibbs_chain law, got {law.kind!r}")


def gibbs_chain_kernels(potentials: Sequence, first_size: int | None = None):
    """Initial law and forward kernels of the chain induced by pair potentials."""
    pots = [np.asarray(p, dtype=float) for p in potentials]
    if not pots:
        m = first_size or 1
        return np.full(m, 1.0 / m), ()
    beta = np.ones(pots[-1].shape[1])
    kernels = []
    for psi in reversed(pots):
        w = psi * beta[None, :]
        new_beta = w.sum(axis=1)
        kernels.append(w / new_beta[:, None])
        beta = new_beta / new_beta.max()
    kernels.reverse()
    return beta / beta.sum(), tuple(kernels)


def gibbs_theta_bounds(potentials: Sequence) -> np.ndarray:
    """(R_i - r_i) / (R_i + r_i) for each pair potential.

    Also builds the induced kernels and checks that their Dobrushin
    coefficients respect the bound.
    """
    pots = [np.asarray(p, dtype=float) for p in potentials]
    for i, p in enumerate(pots):
        if np.any(p <= 0):
            raise NonpositivePotential(f"potentials[{i}] has a nonpositive entry")
    bounds = np.array([(p.max() - p.min()) / (p.max() + p.min()) for p in pots])
    _, kernels = gibbs_chain_kernels(pots)
    for i, k in enumerate(kernels):
        theta = dobrushin_theta(k)
        assert theta <= bounds[i] + 1e-10, f"kernel {i}: theta {theta} above bound {bounds[i]}"
    return bounds


def _pair_index(sizes: Sequence[int]):
    """Index pairs (a < b) over the configurations of a block, and their coordinates."""
    B = int(np.prod(sizes, dtype=np.int64))
    a, b = np.triu_indices(B, k=1)
    coords = np.indices(sizes).reshape(len(sizes), -1) if sizes else np.zeros((0, 1), dtype=int)
    return a, b, coords


def _block_distances(model: ProductModel, start: int, stop: int, a, b, coords) -> np.ndarray:
    d = np.zeros(a.shape)
    for off, i in enumerate(range(start, stop)):
        d += model.coordinates[i].metric[coords[off, a], coords[off, b]]
    return d


def _tail_tv(model: ProductModel, start: int, stop: int, j: int, a, b):
    """TV between laws of X_j..X_n given the prefix, for pairs of block values.

    The prefix is X_0..X_{stop-1}; coordinates start..stop-1 take the two
    block configurations indexed by ``a`` and ``b``. Returns ``(tv, valid)``
    with shape (prefix configurations, pairs).
    """
    s = model.sizes
    A = int(np.prod(s[:start], dtype=np.int64))
    B = int(np.prod(s[start:stop], dtype=np.int64))
    M = int(np.prod(s[stop:j], dtype=np.int64))
    L = int(np.prod(s[j:], dtype=np.int64))
    Q = model.pmf.reshape(A, B, M, L).sum(axis=2)
    mass = Q.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = Q / np.where(mass > 0, mass, 1.0)[..., None]
    tv = 0.5 * np.abs(cond[:, a, :] - cond[:, b, :]).sum(axis=2)
    valid = (mass[:, a] > 0) & (mass[:, b] > 0)
    return tv, valid


def _check_prefix_skips(valid: np.ndarray) -> int:
    return int((~valid).sum())


def gamma_goldstein(model: ProductModel) -> GammaMatrix:
    """Upper-triangular Gamma from Goldstein's maximal coupling of the conditional tails."""
    n = model.n
    G = np.diag(model.diameters).astype(float)
    notes, skipped = [], 0
    for i in range(n):
        if model.sizes[i] < 2:
            continue
        a, b, coords = _pair_index([model.sizes[i]])
        rho = _block_distances(model, i, i + 1, a, b, coords)
        for j in range(i + 1, n):
            tv, valid = _tail_tv(model, i, i + 1, j, a, b)
            skipped += _check_prefix_skips(valid)
            if not valid.any():
                notes.append(f"AllPairsDegenerate at ({i}, {j})")
                continue
            ratio = np.where(valid, tv / rho, 0.0).max()
            G[i, j] = model.diameters[i] * model.diameters[j] * ratio
    return GammaMatrix(G, "goldstein", True, notes, skipped_pairs=skipped)


def gamma_chazottes(model: ProductModel) -> GammaMatrix:
    """Gamma from the coupling matrix: the full conditional-tail TV bounds every later column."""
    n = model.n
    G = np.diag(model.diameters).astype(float)
    notes, skipped = [], 0
    for i in range(n - 1):
        if model.sizes[i] < 2:
            continue
        a, b, coords = _pair_index([model.sizes[i]])
        rho = _block_distances(model, i, i + 1, a, b, coords)
        tv, valid = _tail_tv(model, i, i + 1, i + 1, a, b)
        skipped += _check_prefix_skips(valid)
        if not valid.any():
            notes.append(f"AllPairsDegenerate at row {i}")
            continue
        ratio = np.where(valid, tv / rho, 0.0).max()
        for j in range(i + 1, n):
            G[i, j] = model.diameters[i] * model.diameters[j] * ratio
    return GammaMatrix(G, "chazottes", True, notes, skipped_pairs=skipped)


def gamma_markov_theta(chain: MarkovChainView, metrics: Sequence[CoordinateSpace]) -> GammaMatrix:
    """Gamma_ij from the product of Dobrushin coefficients theta_i ... theta_{j-1}."""
    metrics = list(metrics)
    n = len(metrics)
    if len(chain.kernels) != n - 1:
        raise WrongRepresentation(f"chain has {len(chain.kernels)} kernels for {n} coordinates")
    thetas = chain.thetas
    diam = np.array([c.diameter for c in metrics])
    G = np.diag(diam).astype(float)
    for i in range(n):
        scale = diam[i] / metrics[i].min_distance
        prod = 1.0
        for j in range(i + 1, n):
            prod *= thetas[j - 1]
            G[i, j] = scale * diam[j] * prod
    return GammaMatrix(G, "markov_theta", True, [f"thetas={thetas.tolist()}"])


def gamma_markov_theta_for(model: ProductModel) -> GammaMatrix:
    if model.law.kind != "markov":
        raise WrongRepresentation(f"markov_theta needs a markov law, got {model.law.kind!r}")
    return gamma_markov_theta(MarkovChainView.from_model(model), model.coordinates)


def gamma_kulske(model: ProductModel) -> GammaMatrix:
    """Gamma_ij = ||rho_i|| D_ji with D the Dobrushin comparison matrix.

    Returns ``valid=False`` instead of raising when uniqueness fails.
    """
    C = interdependence_matrix(model)
    notes = [f"spectral_radius={float(C.spectral_radius)!r}"]
    try:
        D = comparison_matrix(C).D
    except UniquenessFails as exc:
        notes.append(f"UniquenessFails: {exc}")
        return GammaMatrix(np.full((model.n, model.n), np.nan), "kulske", False, notes, skipped_pairs=C.skipped_pairs)
    G = model.diameters[:, None] * D.T
    return GammaMatrix(G, "kulske", True, notes, skipped_pairs=C.skipped_pairs)


def check_partition(partition: Sequence[Sequence[int]], n: int) -> tuple[tuple[int, ...], ...]:
    blocks = tuple(tuple(int(i) for i in blk) for blk in partition)
    flat = [i for blk in blocks for i in blk]
    if any(len(blk) == 0 for blk in blocks):
        raise BadPartition("blocks must be non-empty")
    if flat != list(range(n)):
        raise BadPartition(f"blocks must be contiguous intervals covering 0..{n - 1} in order, got {blocks}")
    return blocks


def parse_blocks(spec: str, n: int) -> tuple[tuple[int, ...], ...]:
    """Parse ``"0|1,2"`` or ``"1|2"``-style block specs (0-based coordinate indices)."""
    try:
        blocks = [[int(tok) for tok in part.split(",") if tok.strip()] for part in spec.split("|")]
    except ValueError as exc:
        raise BadPartition(f"cannot parse block spec {spec!r}") from exc
    return check_partition(blocks, n)


def block_diameters(model: ProductModel, blocks) -> np.ndarray:
    return np.array([sum(model.diameters[i] for i in blk) for blk in blocks])


def gamma_blocks(model: ProductModel, partition: Sequence[Sequence[int]]) -> GammaMatrix:
    """Block Gamma for a contiguous partition.

    Entry (k, l), l > k, is the block diameter of T_k times the sup over pairs
    of block-k configurations (same prefix) of
    ``sum_{j in T_l} ||rho_j|| TV(law of X_j..X_n | x) / rho^{T_k}(x, z)``,
    which is what Goldstein's coupling of the tails gives per coordinate.
    """
    blocks = check_partition(partition, model.n)
    m = len(blocks)
    diam = block_diameters(model, blocks)
    G = np.diag(diam).astype(float)
    notes, skipped = [], 0
    for k, blk in enumerate(blocks):
        start, stop = blk[0], blk[-1] + 1
        sizes = model.sizes[start:stop]
        if int(np.prod(sizes)) < 2:
            continue
        a, b, coords = _pair_index(sizes)
        rho = _block_distances(model, start, stop, a, b, coords)
        for ell in range(k + 1, m):
            total = None
            valid_all = None
            for j in blocks[ell]:
                tv, valid = _tail_tv(model, start, stop, j, a, b)
                term = model.diameters[j] * np.where(valid, tv, 0.0)
                total = term if total is None else total + term
                valid_all = valid if valid_all is None else valid_all & valid
            skipped += _check_prefix_skips(valid_all)
            if not valid_all.any():
                notes.append(f"AllPairsDegenerate at block ({k}, {ell})")
                continue
            G[k, ell] = diam[k] * np.where(valid_all, total / rho, 0.0).max()
    return GammaMatrix(G, "block", True, notes, block_partition=blocks, skipped_pairs=skipped)


def block_oscillation_vector(f, model: ProductModel, partition) -> np.ndarray:
    """Oscillation of f per unit block distance when only one block varies."""
    blocks = check_partition(partition, model.n)
    table = np.asarray(f, dtype=float)
    out = np.zeros(len(blocks))
    s = model.sizes
    for k, blk in enumerate(blocks):
        start, stop = blk[0], blk[-1] + 1
        A = int(np.prod(s[:start], dtype=np.int64))
        B = int(np.prod(s[start:stop], dtype=np.int64))
        L = int(np.prod(s[stop:], dtype=np.int64))
        if B < 2:
            continue
        a, b, coords = _pair_index(s[start:stop])
        rho = _block_distances(model, start, stop, a, b, coords)
        t = table.reshape(A, B, L)
        ratio = np.abs(t[:, a, :] - t[:, b, :]) / rho[None, :, None]
        if np.all(np.isnan(ratio)):
            continue
        out[k] = float(np.nanmax(ratio))
    return out


def block_cond_exp_operator(model: ProductModel, partition, k: int, f) -> np.ndarray:
    """E[f | blocks before k], with k numbered 1..m+1 like the coordinate kernels."""
    blocks = check_partition(partition, model.n)
    if not 1 <= k <= len(blocks) + 1:
        raise ValueError(f"block kernel index must lie in 1..{len(blocks) + 1}")
    prefix = sum(len(blk) for blk in blocks[:k - 1])
    return cond_exp_operator(model, prefix + 1, f)


def coupling_rows(gamma: GammaMatrix, diameters) -> np.ndarray:
    """Wasserstein-matrix rows V(i+1)_i recovered as Gamma_i / ||rho_i||."""
    return gamma.entries / np.asarray(diameters, dtype=float)[:, None]
