"""Damped Newton solution of the stationarity equation and kappa-continuation.

The Jacobian is the exact derivative of the discrete interior residual (the
residual is linear in the neighbor values and pointwise-nonlinear in the
center value), so Newton converges quadratically for the discrete problem,
not merely for its continuum limit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .energy import EnergyParams, assemble_second_variation, el_residual, reduced_energy
from .profile import write_profile_csv

MIN_DAMPING = 2.0 ** -20


class NewtonError(RuntimeError):
    """Newton iteration failed; carries the last residual sup-norm."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class NewtonConfig:
    # the residual evaluation itself carries second-difference rounding noise
    # of order eps/dtheta^2 (~1e-10 at n = 1024); tolerances below that floor
    # are unattainable on fine grids
    max_iter: int = 50
    residual_tol: float = 5e-10
    damping: float = 1.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


def _jacobian_banded(grid, values, kappa):
    """Banded exact Jacobian of el_residual with respect to interior values."""
    th = grid.nodes[1:-1]
    h = values[1:-1]
    dth = grid.dtheta
    s = np.sin(th)
    cot = np.cos(th) / s
    m = grid.n - 1
    ab = np.zeros((3, m))
    ab[1, :] = (-2.0 / dth ** 2 - np.cos(2.0 * h) / s ** 2
                - kappa * np.cos(2.0 * (h - th)))
    # row i couples to i+1 (upper) and i-1 (lower)
    ab[0, 1:] = 1.0 / dth ** 2 + cot[:-1] / (2.0 * dth)
    ab[2, :-1] = 1.0 / dth ** 2 - cot[1:] / (2.0 * dth)
    return ab


def newton_solve(p0, params, cfg=None):
    """Damped Newton iteration on the interior residual.

    Backtracking halves the step until the residual sup-norm decreases;
    failure below the minimum damping factor, a singular Jacobian (a fold
    point suspect), or exhausting max_iter raises NewtonError.
    """
    cfg = cfg or NewtonConfig()
    p = p0
    r = el_residual(p, params)
    norm = float(np.max(np.abs(r)))
    for _ in range(cfg.max_iter):
        if norm < cfg.residual_tol:
            return p
        ab = _jacobian_banded(p.grid, p.values, params.kappa)
        try:
            delta = solve_banded((1, 1), ab, -r)
        except LinAlgError as exc:
            raise NewtonError(f"singular Jacobian (fold point suspected): {exc}",
                              residual_norm=norm) from exc
        if not np.all(np.isfinite(delta)):
            raise NewtonError("Jacobian solve produced non-finite update "
                              "(fold point suspected)", residual_norm=norm)
        alpha = cfg.damping
        while alpha >= MIN_DAMPING:
            values = p.values.copy()
            values[1:-1] += alpha * delta
            trial = type(p)(grid=p.grid, values=values, m=p.m, n_end=p.n_end)
            r_trial = el_residual(trial, params)
            norm_trial = float(np.max(np.abs(r_trial)))
            if norm_trial < norm:
                p, r, norm = trial, r_trial, norm_trial
                break
            alpha *= 0.5
        else:
            raise NewtonError(f"line search stalled at residual {norm:.3g}",
                              residual_norm=norm)
    if norm < cfg.residual_tol:
        return p
    raise NewtonError(f"no convergence in {cfg.max_iter} iterations; "
                      f"last residual {norm:.3g}", residual_norm=norm)


@dataclass(frozen=True)
class BranchPoint:
    kappa: float
    profile: object
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class Branch:
    points: tuple
    direction: int
    suspected_fold: tuple | None = None  # (last good kappa, failed kappa)

    @property
    def kappas(self):
        return np.array([pt.kappa for pt in self.points])

    @property
    def reached(self):
        return self.points[-1].kappa


def _two_lowest(profile, kappa, seed=0):
    from .spectrum import eigs_lowest
    op = assemble_second_variation(profile, EnergyParams(kappa))
    res = eigs_lowest(op, 2, seed=seed)
    return float(res.eigenvalues[0]), float(res.eigenvalues[1])


def continue_branch(start_kappa, start, target_kappa, dk, cfg=None, seed=0):
    """Natural-parameter continuation of a solution family in kappa.

    Each accepted point seeds Newton at the next kappa and records the two
    lowest eigenvalues of the second-variation operator there.  Newton
    failure past the first step ends the branch with a bracketing interval
    (suspected fold or bifurcation); failure on the very first step raises.
    """
    cfg = cfg or NewtonConfig()
    r0 = float(np.max(np.abs(el_residual(start, EnergyParams(start_kappa)))))
    if r0 >= max(cfg.residual_tol, 1e-9):
        raise ValueError(f"start profile is not stationary at kappa={start_kappa} "
                         f"(sup residual {r0:.3g})")
    if target_kappa != start_kappa and dk == 0:
        raise ValueError("dk must be nonzero")
    if (target_kappa - start_kappa) * dk < 0:
        raise ValueError(f"dk={dk} points away from target {target_kappa}")

    lam1, lam2 = _two_lowest(start, start_kappa, seed)
    points = [BranchPoint(kappa=start_kappa, profile=start,
                          lambda1=lam1, lambda2=lam2)]
    direction = int(np.sign(target_kappa - start_kappa))
    if direction == 0:
        return Branch(points=tuple(points), direction=0)

    fold = None
    kappa = start_kappa
    profile = start
    first_step = True
    while (target_kappa - kappa) * direction > 1e-12:
        nxt = kappa + dk
        if (nxt - target_kappa) * direction > 0:
            nxt = target_kappa
        try:
            profile = newton_solve(profile, EnergyParams(nxt), cfg)
        except NewtonError as exc:
            if first_step:
                raise
            fold = (kappa, nxt)
            break
        lam1, lam2 = _two_lowest(profile, nxt, seed)
        points.append(BranchPoint(kappa=nxt, profile=profile,
                                  lambda1=lam1, lambda2=lam2))
        kappa = nxt
        first_step = False
    return Branch(points=tuple(points), direction=direction, suspected_fold=fold)


def write_branch_csv(branch, directory, header_lines=()):
    """Branch summary CSV plus one profile CSV per accepted point."""
    import os
    os.makedirs(os.path.join(directory, "profiles"), exist_ok=True)
    lines = list(header_lines)
    lines.append("kappa,E,lambda1,lambda2")
    for pt in branch.points:
        e = reduced_energy(pt.profile, EnergyParams(pt.kappa))
        lines.append(f"{pt.kappa!r},{e!r},{pt.lambda1!r},{pt.lambda2!r}")
        write_profile_csv(pt.profile,
                          os.path.join(directory, "profiles",
                                       f"kappa_{pt.kappa:g}.csv"),
                          kappa=pt.kappa)
    with open(os.path.join(directory, "branch.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
