"""Lowest eigenpairs of the second-variation operator and saddle classification.

The eigenvalues come from Sturm-sequence bisection on the symmetrized
tridiagonal matrix; eigenvectors from shifted inverse iteration with
re-orthogonalization.  No library eigensolver is used on this path, so the
dense eigensolve in the test suite stays an independent oracle.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .energy import (EnergyParams, assemble_second_variation,
                     residual_supnorm, second_variation_form)
from .grid import make_grid
from .profile import make_initial_second_type, perturbation_direction

_BISECTION_STEPS = 64
_INVERSE_ITERATIONS = 3


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray        # ascending
    eigenvectors: np.ndarray       # shape (k, n+1), sin-weighted orthonormal
    morse_index: int
    tol: float
    residuals: np.ndarray          # ||A v - lambda v||_w per pair
    operator_scale: float
    explicit_direction_value: float | None = None

    @property
    def has_marginal(self):
        """True when some computed eigenvalue sits within tol of zero."""
        return bool(np.any(np.abs(self.eigenvalues) <= self.tol))


def _sturm_count(diag, off2, shifts, pivmin):
    """Number of eigenvalues strictly below each shift (vectorized in shifts)."""
    shifts = np.asarray(shifts, dtype=float)
    q = diag[0] - shifts
    count = (q < 0).astype(int)
    for i in range(1, diag.size):
        np.copyto(q, np.where(np.abs(q) < pivmin, -pivmin, q))
        q = diag[i] - shifts - off2[i - 1] / q
        count += q < 0
    return count


def _bisect_lowest(diag, off, k):
    """Brackets of width ~2^-64 * span around the k lowest eigenvalues."""
    m = diag.size
    radius = np.zeros(m)
    if m > 1:
        radius[:-1] += np.abs(off)
        radius[1:] += np.abs(off)
    lo = np.full(k, np.min(diag - radius))
    hi = np.full(k, np.max(diag + radius))
    off2 = off ** 2
    pivmin = max(np.max(off2) if off.size else 1.0, 1.0) * 1e-30
    targets = np.arange(1, k + 1)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        counts = _sturm_count(diag, off2, mid, pivmin)
        take_hi = counts >= targets
        hi = np.where(take_hi, mid, hi)
        lo = np.where(take_hi, lo, mid)
    return 0.5 * (lo + hi)


def _solve_shifted(diag, off, shift, rhs):
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = off
    ab[1, :] = diag - shift
    ab[2, :-1] = off
    return solve_banded((1, 1), ab, rhs)


def _inverse_iterate(diag, off, shift, found, rng, scale):
    """One eigenvector of the symmetric tridiagonal near the given shift."""
    m = diag.size
    y = rng.standard_normal(m)
    for attempt in range(4):
        try:
            for _ in range(_INVERSE_ITERATIONS):
                for prev in found:
                    y -= np.dot(prev, y) * prev
                for prev in found:
                    y -= np.dot(prev, y) * prev
                norm = np.linalg.norm(y)
                if norm == 0.0 or not np.isfinite(norm):
                    y = rng.standard_normal(m)
                    norm = np.linalg.norm(y)
                y = _solve_shifted(diag, off, shift, y / norm)
                if not np.all(np.isfinite(y)):
                    raise FloatingPointError("inverse iteration overflow")
            break
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            shift = shift + (10.0 ** attempt) * 1e-12 * scale
            y = rng.standard_normal(m)
    for prev in found:
        y -= np.dot(prev, y) * prev
    y /= np.linalg.norm(y)
    # deterministic sign: largest-magnitude component positive
    j = int(np.argmax(np.abs(y)))
    if y[j] < 0:
        y = -y
    return y


def _tridiag_apply(diag, off, y):
    out = diag * y
    out[:-1] += off * y[1:]
    out[1:] += off * y[:-1]
    return out


def eigs_lowest(op, k, seed=0, tol=None):
    """Lowest k eigenpairs of a TridiagonalOperator.

    Eigenvalues by Sturm bisection refined with a final Rayleigh quotient;
    eigenvectors by inverse iteration, returned on the full node range
    (zero at the Dirichlet endpoints) and orthonormal in the sin-weighted
    inner product.
    """
    if not 1 <= k <= op.dimension:
        raise ValueError(f"k = {k} out of range 1..{op.dimension}")
    diag = np.asarray(op.diag, dtype=float)
    off = np.asarray(op.offdiag, dtype=float)
    scale = op.norm_estimate()
    approx = _bisect_lowest(diag, off, k)
    rng = np.random.default_rng(seed)
    ys = []
    eigenvalues = np.empty(k)
    residuals = np.empty(k)
    for j in range(k):
        y = _inverse_iterate(diag, off, approx[j], ys, rng, scale)
        lam = float(np.dot(y, _tridiag_apply(diag, off, y)))
        residuals[j] = float(np.linalg.norm(_tridiag_apply(diag, off, y) - lam * y))
        eigenvalues[j] = lam
        ys.append(y)
    order = np.argsort(eigenvalues)
    eigenvalues = eigenvalues[order]
    residuals = residuals[order]
    sqrt_w = np.sqrt(op.weight)
    vectors = np.zeros((k, op.dimension + 2))
    for row, j in enumerate(order):
        vectors[row, 1:-1] = ys[j] / sqrt_w
    if tol is None:
        tol = 1e-12 * scale
    morse = int(np.sum(eigenvalues < -tol))
    return SpectrumResult(eigenvalues=eigenvalues, eigenvectors=vectors,
                          morse_index=morse, tol=float(tol),
                          residuals=residuals, operator_scale=scale)


@dataclass(frozen=True)
class LegendreReport:
    n_coarse: int
    n_fine: int
    exact: np.ndarray
    computed_coarse: np.ndarray
    computed_fine: np.ndarray
    max_deviation_coarse: float
    max_deviation_fine: float
    refinement_ratio: float
    endpoints_zero: bool


def legendre_validation(grid, l_max, seed=0):
    """Check the singular Sturm-Liouville operator against its exact spectrum.

    At the profile h = 2*theta with kappa = 4 the assembled operator equals
    the (negated, shifted) Legendre operator, so its eigenvalues must approach
    l(l+1) - 4 for l = 1..l_max; equivalently the underlying operator's
    eigenvalues approach -l(l+1).  Runs the comparison on the given grid and
    on its refinement to expose the second-order convergence of the stencil.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")

    def deviations(g):
        saddle_profile = make_initial_second_type(g)
        op = assemble_second_variation(saddle_profile, EnergyParams(4.0))
        res = eigs_lowest(op, l_max, seed=seed)
        ls = np.arange(1, l_max + 1)
        exact = ls * (ls + 1.0) - 4.0
        return res, exact, np.abs(res.eigenvalues - exact)

    res_c, exact, dev_c = deviations(grid)
    fine = make_grid(2 * grid.n)
    res_f, _, dev_f = deviations(fine)
    max_c = float(dev_c.max())
    max_f = float(dev_f.max())
    endpoints_zero = bool(np.all(res_c.eigenvectors[:, 0] == 0.0)
                          and np.all(res_c.eigenvectors[:, -1] == 0.0))
    return LegendreReport(n_coarse=grid.n, n_fine=fine.n, exact=exact,
                          computed_coarse=res_c.eigenvalues,
                          computed_fine=res_f.eigenvalues,
                          max_deviation_coarse=max_c,
                          max_deviation_fine=max_f,
                          refinement_ratio=max_c / max_f if max_f > 0 else np.inf,
                          endpoints_zero=endpoints_zero)


def classify(p, params, k=4, seed=0, residual_tol=1e-6):
    """Spectrum of the second variation at an (approximately) stationary profile.

    Rejects non-stationary input: off critical points the Morse data is
    meaningless.  The returned result also carries the value of the second
    variation in the explicit direction (h' - 1) sin(theta), the certificate
    the saddle pipelines report.
    """
    res_sup = residual_supnorm(p, params)
    if res_sup >= residual_tol:
        raise ValueError(f"profile is not stationary: sup residual {res_sup:.3g} "
                         f">= {residual_tol:.3g}")
    op = assemble_second_variation(p, params)
    result = eigs_lowest(op, k, seed=seed)
    # zero-classification slack on the scale of the low spectrum itself, not
    # of the operator norm (which grows like 1/dtheta^2)
    tol = 1e-6 * max(1.0, float(np.max(np.abs(result.eigenvalues))))
    direction = perturbation_direction(p)
    value = second_variation_form(p, params, direction)
    return replace(result, explicit_direction_value=value,
                   morse_index=int(np.sum(result.eigenvalues < -tol)), tol=tol)
