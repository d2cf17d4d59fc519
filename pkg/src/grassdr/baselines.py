"""Comparison methods: tangent-space PGA, supervised PGA, and geodesic kNN.

PGA is the tangent-PCA approximation: log-map the data at the Frechet mean,
flatten to real coordinate vectors, and eigendecompose the (uncentered)
sample covariance. Supervised PGA replaces the covariance with the
dependence-maximizing operator T H K H T^H built from the label kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, ShapeError, SupervisionDegenerateError, UndefinedRatioError
from .geometry import GrassmannPoint, _batched_log_mats, pairwise_distances, stack_points
from .nested import _frechet_with_restarts


@dataclass(frozen=True, eq=False)
class PgaModel:
    """Frechet mean plus orthonormal tangent directions and their variances.

    Components are horizontal n x p matrices at the mean, mutually orthogonal
    under the real trace inner product; ``component_variances`` is sorted
    nonincreasing.
    """

    mean: GrassmannPoint
    components: np.ndarray  # (k, n, p)
    component_variances: np.ndarray  # (k,)


def _flatten_tangents(mats: np.ndarray) -> np.ndarray:
    """Real coordinate vectors for tangent matrices (re/im stacked if complex)."""
    flat = mats.reshape(mats.shape[0], -1)
    if np.iscomplexobj(flat):
        return np.concatenate([flat.real, flat.imag], axis=1)
    return np.asarray(flat, dtype=float)


def _unflatten_components(vectors: np.ndarray, shape: tuple[int, int], complex_field: bool) -> np.ndarray:
    k = vectors.shape[0]
    if complex_field:
        half = vectors.shape[1] // 2
        mats = vectors[:, :half] + 1j * vectors[:, half:]
    else:
        mats = vectors
    return mats.reshape(k, *shape)


def _horizontal_orthonormal(components: np.ndarray, mean: GrassmannPoint) -> np.ndarray:
    """Project components to the horizontal space at ``mean`` and re-orthonormalize."""
    basis = mean.basis
    horiz = components - np.einsum("nq,kqp->knp", basis, np.einsum("nq,knp->kqp", np.conj(basis), components))
    flat = _flatten_tangents(horiz).T  # (d, k)
    q, _ = np.linalg.qr(flat)
    ortho = q.T[: components.shape[0]]
    return _unflatten_components(ortho, basis.shape, np.iscomplexobj(basis))


def _tangent_coordinates(dataset: Sequence[GrassmannPoint], mean: GrassmannPoint) -> np.ndarray:
    stacked = stack_points(dataset)
    logs = _batched_log_mats(mean.basis, stacked)
    return _flatten_tangents(logs)


def pga_fit(dataset: Sequence[GrassmannPoint], num_components: int) -> PgaModel:
    """Tangent PCA at the Frechet mean.

    Eigenvectors of the uncentered sample covariance of the log-mapped data
    (tangent vectors at the mean already average to approximately zero);
    eigenvalues become the component variances. CutLocusError from the log
    map propagates with the data index.
    """
    if len(dataset) < 2:
        raise ShapeError("PGA needs at least two points")
    mean = _frechet_with_restarts(dataset)
    coords = _tangent_coordinates(dataset, mean)
    total = float((coords**2).sum(axis=1).mean())
    if total <= 1e-24:
        raise DegenerateInputError("all points coincide: tangent variance is zero")
    dim = coords.shape[1]
    if not 1 <= num_components <= dim:
        raise ShapeError(f"num_components must be in [1, {dim}], got {num_components}")
    cov = coords.T @ coords / coords.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:num_components]
    variances = np.clip(eigvals[order], 0.0, None)
    raw = _unflatten_components(eigvecs[:, order].T, mean.basis.shape, np.iscomplexobj(mean.basis))
    components = _horizontal_orthonormal(raw, mean)
    return PgaModel(mean, components, variances)


def pga_explained_variance(model: PgaModel, dataset: Sequence[GrassmannPoint], k: int) -> float:
    """Tangent variance captured by the model's top-k components, in [0, 1]."""
    if k < 0 or k > model.components.shape[0]:
        raise ShapeError(f"k must be in [0, {model.components.shape[0]}], got {k}")
    coords = _tangent_coordinates(dataset, model.mean)
    total = float((coords**2).sum(axis=1).mean())
    if total <= 1e-24:
        raise UndefinedRatioError("zero total tangent variance")
    if k == 0:
        return 0.0
    comp = _flatten_tangents(model.components[:k])
    captured = float(((coords @ comp.T) ** 2).sum(axis=1).mean())
    return captured / total


def spga_fit(dataset: Sequence[GrassmannPoint], labels, num_components: int) -> PgaModel:
    """Supervised PGA: supervised PCA in the tangent space at the Frechet mean.

    Components are the leading eigenvectors of T H K H T^H with T the tangent
    coordinate matrix, H the centering operator and K_ij = 1[y_i = y_j];
    ``component_variances`` holds the corresponding eigenvalues (supervised
    objective scores, not captured variances).
    """
    labels = np.asarray(labels)
    if labels.shape[0] != len(dataset):
        raise ShapeError("labels length does not match dataset")
    if np.unique(labels).size < 2:
        raise SupervisionDegenerateError("supervised PGA needs at least two classes")
    mean = _frechet_with_restarts(dataset)
    coords = _tangent_coordinates(dataset, mean)
    n_pts, dim = coords.shape
    if not 1 <= num_components <= dim:
        raise ShapeError(f"num_components must be in [1, {dim}], got {num_components}")
    kernel = (labels[:, None] == labels[None, :]).astype(float)
    centering = np.eye(n_pts) - np.ones((n_pts, n_pts)) / n_pts
    operator = coords.T @ centering @ kernel @ centering @ coords
    operator = 0.5 * (operator + operator.T)
    eigvals, eigvecs = np.linalg.eigh(operator)
    order = np.argsort(eigvals)[::-1][:num_components]
    variances = np.clip(eigvals[order], 0.0, None)
    raw = _unflatten_components(eigvecs[:, order].T, mean.basis.shape, np.iscomplexobj(mean.basis))
    components = _horizontal_orthonormal(raw, mean)
    return PgaModel(mean, components, variances)


def pga_coordinates(model: PgaModel, dataset: Sequence[GrassmannPoint]) -> np.ndarray:
    """Coefficients of each point on the model's components (N, k)."""
    coords = _tangent_coordinates(dataset, model.mean)
    return coords @ _flatten_tangents(model.components).T


def gknn_loo(
    dataset: Sequence[GrassmannPoint],
    labels,
    k: int = 5,
    metric: str = "geodesic",
) -> tuple[float, np.ndarray]:
    """Leave-one-out k-nearest-neighbor classification under a manifold metric.

    Each point is classified by the majority label among its k nearest other
    points; ties go to the class of the nearest tied neighbor. Returns the
    accuracy and the per-point predictions.
    """
    labels = np.asarray(labels)
    n_pts = len(dataset)
    if labels.shape[0] != n_pts:
        raise ShapeError("labels length does not match dataset")
    if not 1 <= k <= n_pts - 1:
        raise ShapeError(f"k must be in [1, {n_pts - 1}], got {k}")
    distances = pairwise_distances(dataset, metric=metric)
    return knn_loo_from_distances(distances, labels, k)


def knn_loo_from_distances(distances: np.ndarray, labels, k: int) -> tuple[float, np.ndarray]:
    """Leave-one-out kNN on a precomputed distance matrix."""
    labels = np.asarray(labels)
    n_pts = labels.shape[0]
    predictions = np.empty(n_pts, dtype=labels.dtype)
    for i in range(n_pts):
        order = np.argsort(distances[i], kind="stable")
        neighbors = order[order != i][:k]
        neighbor_labels = labels[neighbors]
        classes, counts = np.unique(neighbor_labels, return_counts=True)
        tied = classes[counts == counts.max()]
        if tied.size == 1:
            predictions[i] = tied[0]
        else:
            for j in neighbors:  # nearest neighbor among tied classes wins
                if labels[j] in tied:
                    predictions[i] = labels[j]
                    break
    accuracy = float((predictions == labels).mean())
    return accuracy, predictions
