"""Per-image similarity graph over patch tokens and its eigenbasis.

The graph has one node per patch, edge weights equal to the cosine
similarity of the patch key vectors clamped at a small positive floor so
the graph stays connected. The normalized-cut relaxation is solved on
the generalized system (D - W) y = lambda * D y; the trivial constant
eigenvector is dropped and the next ``n`` eigenvectors become the
per-cell feature space for local clustering.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import DegenerateInputError, SolverConvergenceError
from .feature_store import PatchFeatureMap

DEFAULT_FLOOR = 1e-5
RESIDUAL_TOL = 1e-6
_DENSE_CUTOFF = 400
_ITER_TOL = 1e-8


@dataclass
class AffinityGraph:
    """Symmetric patch-similarity matrix; entries in (0, 1], diagonal 1."""

    weights: np.ndarray  # float64 (n, n)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


@dataclass
class EigenBasis:
    """Nontrivial generalized eigenvectors, ascending eigenvalues.

    Columns are normalized to unit norm under the degree inner product
    (y^T D y = 1) and sign-fixed so the largest-magnitude entry of each
    column is positive.
    """

    vectors: np.ndarray  # float64 (n_nodes, n_vectors)
    eigenvalues: np.ndarray  # float64 (n_vectors,) ascending

    @property
    def n_vectors(self) -> int:
        return self.vectors.shape[1]


@dataclass
class PixelFeatureSpace:
    """Per-cell eigen features on the (possibly upsampled) grid."""

    height: int
    width: int
    features: np.ndarray  # float64 (height, width, n_vectors)

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def points(self) -> np.ndarray:
        """Row-major (n_cells, n_vectors) view for clustering."""
        return self.features.reshape(self.n_cells, -1)


def build_affinity(
    fmap: PatchFeatureMap,
    floor: float = DEFAULT_FLOOR,
    binarize: bool = False,
    binarize_tau: float = 0.2,
) -> AffinityGraph:
    """Cosine-similarity graph over patch tokens, clamped at ``floor``.

    With ``binarize`` the TokenCut-style variant is used instead: weight 1
    where cosine >= binarize_tau, else ``floor``.
    """
    tokens = np.asarray(fmap.values, dtype=np.float64).reshape(-1, fmap.dim)
    norms = np.linalg.norm(tokens, axis=1)
    if (norms == 0).any():
        idx = int(np.flatnonzero(norms == 0)[0])
        raise DegenerateInputError(
            f"zero-norm token at patch index {idx} "
            f"(row {idx // fmap.w_patches}, col {idx % fmap.w_patches})"
        )
    unit = tokens / norms[:, None]
    w = unit @ unit.T
    np.clip(w, -1.0, 1.0, out=w)
    if binarize:
        w = np.where(w >= binarize_tau, 1.0, floor)
    else:
        np.maximum(w, floor, out=w)
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 1.0)
    return AffinityGraph(w)


def _solve_symmetric(lsym: np.ndarray, k: int, n_nodes: int):
    """k smallest eigenpairs of the symmetric normalized Laplacian."""
    if n_nodes < _DENSE_CUTOFF or k >= n_nodes - 1:
        vals, vecs = scipy.linalg.eigh(lsym, subset_by_index=[0, k - 1])
        return vals, vecs
    # Deterministic start vector; generic with respect to the eigenbasis.
    v0 = np.linspace(1.0, 2.0, n_nodes)
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            lsym, k=k, which="SA", v0=v0, tol=_ITER_TOL, maxiter=10 * n_nodes
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise SolverConvergenceError(
            "eigensolver did not converge", residual=float("nan")
        ) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def eigendecompose(graph: AffinityGraph, n: int) -> EigenBasis:
    """First ``n`` nontrivial eigenpairs of (D - W) y = lambda * D y."""
    nn = graph.n_nodes
    if n < 2:
        raise ValueError("need at least 2 eigenvectors")
    if n >= nn:
        raise ValueError(f"requested {n} eigenvectors from a {nn}-node graph")
    w = graph.weights
    deg = w.sum(axis=1)
    if (deg <= 0).any():
        raise DegenerateInputError("graph has a zero-degree node")
    d_isqrt = 1.0 / np.sqrt(deg)
    lsym = -(d_isqrt[:, None] * w * d_isqrt[None, :])
    np.fill_diagonal(lsym, lsym.diagonal() + 1.0)
    lsym = (lsym + lsym.T) / 2.0

    vals, vecs = _solve_symmetric(lsym, n + 1, nn)
    # Transform back to the generalized problem and drop the trivial pair.
    y = d_isqrt[:, None] * vecs[:, 1:]
    eigenvalues = np.maximum(vals[1:], 0.0)

    # y^T D y = 1 holds analytically; renormalize to tighten it numerically.
    scale = np.sqrt(np.einsum("ij,i,ij->j", y, deg, y))
    y = y / scale[None, :]

    # Sign convention: largest-magnitude entry positive (first index on ties).
    flip = y[np.abs(y).argmax(axis=0), np.arange(y.shape[1])] < 0
    y[:, flip] *= -1.0

    basis = EigenBasis(y, eigenvalues)
    _check_residual(graph, deg, basis)
    return basis


def _check_residual(graph: AffinityGraph, deg: np.ndarray, basis: EigenBasis):
    dy = deg[:, None] * basis.vectors
    lhs = dy - graph.weights @ basis.vectors
    res = np.linalg.norm(lhs - basis.eigenvalues[None, :] * dy, axis=0)
    bound = RESIDUAL_TOL * np.linalg.norm(dy, axis=0)
    if (res > bound).any():
        raise SolverConvergenceError(
            "eigenpair residual above tolerance", residual=float(res.max())
        )


def residual_norms(graph: AffinityGraph, basis: EigenBasis) -> np.ndarray:
    """Per-column ||(D-W)y - lambda*D*y|| / ||D*y|| for diagnostics."""
    deg = graph.weights.sum(axis=1)
    dy = deg[:, None] * basis.vectors
    lhs = dy - graph.weights @ basis.vectors
    res = np.linalg.norm(lhs - basis.eigenvalues[None, :] * dy, axis=0)
    return res / np.linalg.norm(dy, axis=0)


def build_feature_space(
    basis: EigenBasis, h_patches: int, w_patches: int, upsample: int = 1
) -> PixelFeatureSpace:
    """Reshape eigenvectors to the patch grid and bilinearly upsample.

    Output cell (r, c) samples the grid at (r / upsample, c / upsample),
    clamped at the borders; factor 1 reproduces the grid exactly.
    """
    if basis.vectors.shape[0] != h_patches * w_patches:
        raise ValueError("eigenbasis rows do not match the patch grid")
    if upsample < 1:
        raise ValueError("upsample factor must be >= 1")
    grid = basis.vectors.reshape(h_patches, w_patches, basis.n_vectors)
    if upsample == 1:
        return PixelFeatureSpace(h_patches, w_patches, grid.copy())
    out_h, out_w = h_patches * upsample, w_patches * upsample
    rows = np.minimum(np.arange(out_h) / upsample, h_patches - 1.0)
    cols = np.minimum(np.arange(out_w) / upsample, w_patches - 1.0)
    r0 = np.minimum(rows.astype(int), h_patches - 2)
    c0 = np.minimum(cols.astype(int), w_patches - 2)
    fr = (rows - r0)[:, None, None]
    fc = (cols - c0)[None, :, None]
    g00 = grid[r0][:, c0]
    g01 = grid[r0][:, c0 + 1]
    g10 = grid[r0 + 1][:, c0]
    g11 = grid[r0 + 1][:, c0 + 1]
    top = g00 * (1 - fc) + g01 * fc
    bottom = g10 * (1 - fc) + g11 * fc
    features = top * (1 - fr) + bottom * fr
    return PixelFeatureSpace(out_h, out_w, features)
