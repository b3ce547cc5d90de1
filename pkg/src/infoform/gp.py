"""Gaussian-process belief over the information field.

Squared-exponential kernel over Euclidean cell distance, Cholesky-based
conditioning with a jitter ladder, and per-cell differential entropy
``0.5 * ln(2*pi*e*var)`` in nats.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .grid import Cell

# Returned for zero posterior variance; the smallest representable float.
NEG_ENTROPY = -sys.float_info.max

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

# Variances below this fraction of the prior variance are treated as exact zeros.
_ZERO_VAR_RTOL = 1e-10

_LOG_2PI_E = math.log(2 * math.pi * math.e)


class GpNumericalError(RuntimeError):
    """Covariance matrix could not be factorized even at maximum jitter."""


@dataclass(frozen=True)
class GpHyperparams:
    length_scale: float
    signal_variance: float
    noise_variance: float = 0.0
    prior_mean: float = 0.0

    def __post_init__(self):
        if self.length_scale <= 0 or self.signal_variance <= 0:
            raise ValueError("length_scale and signal_variance must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")

    @property
    def prior_variance(self) -> float:
        return self.signal_variance + self.noise_variance


def kernel(a: Cell, b: Cell, hp: GpHyperparams) -> float:
    d2 = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
    k = hp.signal_variance * math.exp(-d2 / (2.0 * hp.length_scale**2))
    if a[0] == b[0] and a[1] == b[1]:
        k += hp.noise_variance
    return k


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_matrix(A: Sequence[Cell], B: Sequence[Cell], hp: GpHyperparams) -> np.ndarray:
    """Cross-covariance between two cell lists; noise is added where cells coincide."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    d2 = _sqdist(A, B)
    K = hp.signal_variance * np.exp(-d2 / (2.0 * hp.length_scale**2))
    if hp.noise_variance:
        K = K + hp.noise_variance * (d2 == 0)
    return K


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    if not np.all(np.isfinite(K)):
        raise GpNumericalError("covariance has non-finite entries")
    scale = max(1.0, float(np.mean(np.diag(K)))) if n else 1.0
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(K + jitter * scale * np.eye(n)), jitter * scale
        except np.linalg.LinAlgError:
            continue
    raise GpNumericalError(f"covariance of {n} points is singular at max jitter")


def log_marginal_likelihood(
    cells: Sequence[Cell], values: Sequence[float], hp: GpHyperparams
) -> float:
    K = kernel_matrix(cells, cells, hp)
    L, _ = _cholesky(K)
    return _lml_from_chol(L, np.asarray(values, dtype=float) - hp.prior_mean)


def _lml_from_chol(L: np.ndarray, r: np.ndarray) -> float:
    alpha = cho_solve((L, True), r)
    n = len(r)
    return float(-0.5 * r @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


def default_candidates(values: Sequence[float]) -> dict[str, np.ndarray]:
    """Log-spaced search ranges scaled to the empirical variance of ``values``.

    Training values are exact field samples, so the noise term is a small
    nugget (at most a tenth of the variance) rather than a free parameter
    that could explain all of the variation away.
    """
    v = float(np.var(values)) or 1.0
    return {
        "length_scales": np.geomspace(0.25, 8.0, 11),
        "signal_variances": v * np.geomspace(0.03, 3.0, 5),
        "noise_variances": v * np.geomspace(0.001, 0.1, 5),
    }


def fit_hyperparameters(
    training: Sequence[tuple[Cell, float]],
    length_scales: Iterable[float] | None = None,
    signal_variances: Iterable[float] | None = None,
    noise_variances: Iterable[float] | None = None,
) -> GpHyperparams:
    """Exhaustive grid search for the maximum log marginal likelihood.

    The prior mean is the training sample mean. Candidates are visited in
    ``itertools.product(length_scales, signal_variances, noise_variances)``
    order and ties keep the earliest one. ``None`` ranges fall back to
    :func:`default_candidates`.
    """
    if len(training) < 2:
        raise ValueError("need at least two training points")
    cells = [Cell(int(c[0]), int(c[1])) for c, _ in training]
    if len(set(cells)) != len(cells):
        raise ValueError("duplicate training cells")
    # Sorting makes the result independent of input order.
    order = sorted(range(len(cells)), key=lambda i: cells[i])
    cells = [cells[i] for i in order]
    y = np.array([float(training[i][1]) for i in order])
    mean = float(y.mean())
    defaults = default_candidates(y)
    grid = (
        defaults["length_scales"] if length_scales is None else list(length_scales),
        defaults["signal_variances"] if signal_variances is None else list(signal_variances),
        defaults["noise_variances"] if noise_variances is None else list(noise_variances),
    )
    X = np.asarray(cells, dtype=float)
    d2 = _sqdist(X, X)
    r = y - mean
    n = len(r)
    const = 0.5 * n * math.log(2 * math.pi)
    best, best_lml = None, -math.inf
    # One eigendecomposition per length scale; every (sf2, sn2) pair then has
    # a closed-form likelihood on the spectrum of the correlation matrix.
    for ell in grid[0]:
        lam, Q = np.linalg.eigh(np.exp(-d2 / (2.0 * ell**2)))
        lam = np.clip(lam, 0.0, None)
        z2 = (Q.T @ r) ** 2
        for sf2, sn2 in itertools.product(grid[1], grid[2]):
            spec = _jittered_spectrum(sf2 * lam + sn2, sf2 + sn2)
            if spec is None:
                continue
            lml = float(-0.5 * np.sum(z2 / spec) - 0.5 * np.sum(np.log(spec)) - const)
            if lml > best_lml:
                best, best_lml = (ell, sf2, sn2), lml
    if best is None:
        raise GpNumericalError("every candidate covariance was singular")
    ell, sf2, sn2 = best
    return GpHyperparams(float(ell), float(sf2), float(sn2), mean)


def _jittered_spectrum(spec: np.ndarray, diag: float) -> np.ndarray | None:
    """Covariance eigenvalues after the smallest sufficient jitter, or None."""
    if not np.all(np.isfinite(spec)):
        return None
    scale = max(1.0, diag)
    floor = spec.size * np.finfo(float).eps * max(float(spec.max()), scale)
    for jitter in JITTER_LADDER:
        out = spec + jitter * scale
        if out.min() > floor:
            return out
    return None


def entropy_from_variance(var):
    """Differential entropy in nats; zero variance maps to ``NEG_ENTROPY``."""
    var = np.asarray(var, dtype=float)
    with np.errstate(divide="ignore"):
        h = 0.5 * (_LOG_2PI_E + np.log(var))
    h = np.where(var > 0, h, NEG_ENTROPY)
    return float(h) if h.ndim == 0 else h


class GpState:
    """Hyperparameters plus the observed set and its Cholesky factor.

    Instances are treated as values: :meth:`observe` returns a new state and
    the receiver is left untouched. Entropy grids are memoized per instance.
    """

    def __init__(
        self,
        hyperparams: GpHyperparams,
        observations: Iterable[tuple[Cell, float]] = (),
    ):
        self.hyperparams = hyperparams
        cells, values = [], []
        seen = set()
        for c, v in observations:
            c = Cell(int(c[0]), int(c[1]))
            if c in seen:
                continue
            seen.add(c)
            cells.append(c)
            values.append(float(v))
        self._cells = cells
        self._index = {c: i for i, c in enumerate(cells)}
        self._values = np.array(values, dtype=float)
        self._grids: dict[tuple[int, int], np.ndarray] = {}
        self._factorize()

    def _factorize(self):
        if self._cells:
            K = kernel_matrix(self._cells, self._cells, self.hyperparams)
            self._L, self._jitter = _cholesky(K)
        else:
            self._L, self._jitter = np.zeros((0, 0)), 0.0
        self._update_alpha()

    def _update_alpha(self):
        r = self._values - self.hyperparams.prior_mean
        self._alpha = cho_solve((self._L, True), r) if len(r) else r

    @property
    def observed(self) -> list[tuple[Cell, float]]:
        return list(zip(self._cells, self._values.tolist()))

    @property
    def jitter(self) -> float:
        return self._jitter

    def __len__(self):
        return len(self._cells)

    def __contains__(self, c) -> bool:
        return Cell(int(c[0]), int(c[1])) in self._index

    def observe(self, c: Cell, value: float) -> GpState:
        """New state conditioned on ``value`` at ``c``; re-observation is a no-op."""
        c = Cell(int(c[0]), int(c[1]))
        if c in self._index:
            return self
        new = GpState.__new__(GpState)
        new.hyperparams = self.hyperparams
        new._cells = self._cells + [c]
        new._index = dict(self._index)
        new._index[c] = len(self._cells)
        new._values = np.append(self._values, float(value))
        new._grids = {}
        # Rank-one extension of the factor; fall back to a full rebuild.
        hp = self.hyperparams
        n = len(self._cells)
        if n:
            k = kernel_matrix(self._cells, [c], dataclasses.replace(hp, noise_variance=0.0))[:, 0]
            l = solve_triangular(self._L, k, lower=True)
            d2 = hp.prior_variance + self._jitter - float(l @ l)
        else:
            l = np.zeros(0)
            d2 = hp.prior_variance + self._jitter
        if d2 > 1e-10 * hp.prior_variance:
            L = np.zeros((n + 1, n + 1))
            L[:n, :n] = self._L
            L[n, :n] = l
            L[n, n] = math.sqrt(d2)
            new._L, new._jitter = L, self._jitter
            new._update_alpha()
        else:
            new._factorize()
        return new

    def posterior(self, query: Sequence[Cell]) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and marginal variances at ``query`` (diagonal only)."""
        hp = self.hyperparams
        q = list(query)
        if not self._cells:
            m = len(q)
            return np.full(m, hp.prior_mean), np.full(m, hp.prior_variance)
        # Cross-covariance between a query and a noisy observation has no noise term.
        Kqo = kernel_matrix(q, self._cells, dataclasses.replace(hp, noise_variance=0.0))
        means = hp.prior_mean + Kqo @ self._alpha
        V = solve_triangular(self._L, Kqo.T, lower=True)
        var = hp.prior_variance - np.einsum("ij,ij->j", V, V)
        var[var < _ZERO_VAR_RTOL * hp.prior_variance] = 0.0
        return means, var

    def variance(self, c: Cell) -> float:
        return float(self.posterior([c])[1][0])

    def entropy(self, c: Cell) -> float:
        return entropy_from_variance(self.variance(c))

    def entropy_grid(self, width: int, height: int) -> np.ndarray:
        """Conditional entropy of every cell as a ``[y, x]`` array (memoized)."""
        key = (width, height)
        if key not in self._grids:
            ys, xs = np.mgrid[0:height, 0:width]
            cells = np.column_stack([xs.ravel(), ys.ravel()])
            _, var = self.posterior(cells)
            grid = entropy_from_variance(var).reshape(height, width)
            grid.setflags(write=False)
            self._grids[key] = grid
        return self._grids[key]

    def to_json(self) -> str:
        hp = self.hyperparams
        return json.dumps(
            {
                "length_scale": hp.length_scale,
                "signal_variance": hp.signal_variance,
                "noise_variance": hp.noise_variance,
                "prior_mean": hp.prior_mean,
                "observations": [[c.x, c.y, v] for c, v in self.observed],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> GpState:
        d = json.loads(text)
        hp = GpHyperparams(
            d["length_scale"], d["signal_variance"], d["noise_variance"], d["prior_mean"]
        )
        return cls(hp, [((x, y), v) for x, y, v in d.get("observations", [])])


def cell_entropy(state: GpState, c: Cell) -> float:
    return state.entropy(c)
