"""Metric-aware dense operator calculus.

Operators on the phase space are plain complex matrices; self-adjointness is
always relative to some positive definite Gram matrix (``G_S`` for the state
inner product, the phase-space form ``G`` for symplectic adjoints).  All
spectral computations on a metric-self-adjoint matrix go through a congruence
with the Cholesky factor of the metric, which turns the problem into an
ordinary hermitian one.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateFormError, InternalConsistencyError

__all__ = [
    "adjoint",
    "hs_norm",
    "op_norm",
    "self_adjointness_residual",
    "MetricCalculus",
    "pairwise_sum",
]


def adjoint(a: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Adjoint of ``a`` with respect to ``<x, y> = x* metric y``.

    Equals ``metric^-1 a* metric``; an involution for hermitian ``metric``.
    """
    return np.linalg.solve(metric, a.conj().T @ metric)


def self_adjointness_residual(a: np.ndarray, metric: np.ndarray) -> float:
    return float(np.linalg.norm(adjoint(a, metric) - a, 2))


def hs_norm(a: np.ndarray, metric: np.ndarray) -> float:
    """Hilbert-Schmidt norm sqrt(tr(a^dag a)) in the given metric."""
    val = np.trace(adjoint(a, metric) @ a)
    if val.real < 0 and val.real > -1e-12 * max(1.0, np.abs(a).max() ** 2):
        return 0.0
    return float(np.sqrt(val.real))


def _right_divide_upper(a: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """a @ inv(upper) for an upper-triangular matrix, without forming the inverse."""
    return sla.solve_triangular(upper.T, a.T, lower=True).T


def op_norm(a: np.ndarray, metric: np.ndarray) -> float:
    """Operator norm of ``a`` relative to the metric inner product."""
    lo = np.linalg.cholesky(metric)
    lt = lo.conj().T
    tilde = lt @ _right_divide_upper(a, lt)
    return float(np.linalg.norm(tilde, 2))


class MetricCalculus:
    """Spectral toolbox for matrices self-adjoint w.r.t. one fixed metric.

    The congruence ``A ~ L* A L^-*`` (``metric = L L*``) is hermitian exactly
    when ``A`` is metric-self-adjoint, so eigendecompositions, operator
    functions and spectral projectors are computed on the hermitian side and
    pulled back.
    """

    def __init__(self, metric: np.ndarray, hermitize_tol: float = 1e-8):
        metric = np.asarray(metric, dtype=complex)
        if np.linalg.norm(metric - metric.conj().T) > 1e-10 * max(
            1.0, np.abs(metric).max()
        ):
            raise DegenerateFormError("metric is not hermitian")
        try:
            self.lower = np.linalg.cholesky(metric)
        except np.linalg.LinAlgError as exc:
            raise DegenerateFormError("metric is not positive definite") from exc
        pivots = np.abs(np.diag(self.lower)) ** 2
        if pivots.min() <= 1e-14 * pivots.max():
            raise DegenerateFormError(
                "metric is numerically singular "
                f"(pivot ratio {pivots.min() / pivots.max():.3e})"
            )
        self.metric = metric
        self.dim = metric.shape[0]
        self.hermitize_tol = hermitize_tol
        # diagonal metrics are common (standard thermal blocks); broadcasting
        # beats triangular solves there
        off = metric - np.diag(np.diag(metric))
        if np.abs(off).max() == 0.0:
            self._sqrt_diag = np.sqrt(np.diag(metric).real)
        else:
            self._sqrt_diag = None

    def to_hermitian(self, a: np.ndarray, check: bool = True) -> np.ndarray:
        if self._sqrt_diag is not None:
            tilde = (self._sqrt_diag[:, None] * a) / self._sqrt_diag[None, :]
        else:
            lt = self.lower.conj().T
            tilde = lt @ _right_divide_upper(a, lt)
        if check:
            herm_res = np.linalg.norm(tilde - tilde.conj().T)
            scale = max(1.0, np.linalg.norm(tilde))
            if herm_res > self.hermitize_tol * scale:
                raise InternalConsistencyError(
                    f"matrix is not metric-self-adjoint (residual {herm_res:.3e})"
                )
        return 0.5 * (tilde + tilde.conj().T)

    def from_hermitian(self, tilde: np.ndarray) -> np.ndarray:
        if self._sqrt_diag is not None:
            return (tilde / self._sqrt_diag[:, None]) * self._sqrt_diag[None, :]
        lt = self.lower.conj().T
        return sla.solve_triangular(lt, tilde @ lt, lower=False)

    def eigh(self, a: np.ndarray, check: bool = True):
        """Real spectrum and hermitian-side eigenvectors of a self-adjoint ``a``."""
        tilde = self.to_hermitian(a, check=check)
        off = tilde - np.diag(np.diag(tilde))
        if np.abs(off).max() == 0.0:
            vals = np.diag(tilde).real
            order = np.argsort(vals, kind="stable")
            return vals[order], np.eye(self.dim)[:, order].astype(complex)
        return np.linalg.eigh(tilde)

    def fn(self, a: np.ndarray, f, check: bool = True) -> np.ndarray:
        """Operator function ``f(a)`` through the metric eigendecomposition."""
        vals, vecs = self.eigh(a, check=check)
        return self.from_hermitian((vecs * f(vals)) @ vecs.conj().T)

    def fn_of_eig(self, vals: np.ndarray, vecs: np.ndarray, fvals) -> np.ndarray:
        return self.from_hermitian((vecs * fvals) @ vecs.conj().T)

    def projector(self, vals: np.ndarray, vecs: np.ndarray, mask) -> np.ndarray:
        """Metric-orthogonal spectral projector onto the masked eigenvalues."""
        sel = vecs[:, mask]
        return self.from_hermitian(sel @ sel.conj().T)

    def orthonormalize(self, columns: np.ndarray, tol: float = 1e-10):
        """Metric Gram-Schmidt over the columns, keeping pivot order.

        Returns the selected orthonormal columns.  Columns whose residual
        norm falls below ``tol`` times the largest initial norm are dropped.
        """
        cols = np.asarray(columns, dtype=complex)
        if cols.ndim != 2 or cols.shape[1] == 0:
            return np.zeros((self.dim, 0), dtype=complex)
        norms0 = [np.sqrt(max(self._ip(c, c).real, 0.0)) for c in cols.T]
        scale = max(norms0) if norms0 else 0.0
        if scale == 0.0:
            return np.zeros((self.dim, 0), dtype=complex)
        kept = []
        for c in cols.T:
            w = c.copy()
            for _ in range(2):  # two rounds of MGS for orthogonality to ~1e-15
                for u in kept:
                    w = w - self._ip(u, w) * u
            nrm = np.sqrt(max(self._ip(w, w).real, 0.0))
            if nrm > tol * scale:
                kept.append(w / nrm)
        if not kept:
            return np.zeros((self.dim, 0), dtype=complex)
        return np.stack(kept, axis=1)

    def _ip(self, x: np.ndarray, y: np.ndarray) -> complex:
        return complex(x.conj() @ (self.metric @ y))

    def ip(self, x: np.ndarray, y: np.ndarray) -> complex:
        """Inner product ``x* metric y``."""
        return self._ip(x, y)

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self._ip(x, x).real, 0.0)))


def pairwise_sum(values) -> float:
    """Sum by a fixed-topology pairwise tree; bit-identical for a fixed order."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = []
        for i in range(0, len(vals) - 1, 2):
            nxt.append(vals[i] + vals[i + 1])
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]
