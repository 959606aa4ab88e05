"""Solve the second-kind equation f - tau * T f = g.

The equation is equivalent to (identity - tau T) f = g, and the same
three-factor split used for the resolvent turns it into two explicit
channel corrections followed by one small linear solve:

    u  = g + tau * S1(tau) g
    u' = u + tau * S2(tau) u
    (I - tau * Pi(1/tau)^T) c = d,   d_w = <B_w, u'>
    f  = u' + tau * sum_w c_w F_w(., .; 1/tau)

The small system is singular exactly when 1/tau is a discrete eigenvalue:
writing mu_i for the eigenvalues of Pi(lam) at lam = 1/tau,

    det(I - tau * Pi^T) = prod_i (1 - mu_i / lam)
                        = (-1/lam)^{m n} det(Pi(lam) - lam I),

so its zero set matches the determinant used by the spectral search.  The
parameter classification below names the failure modes; the solver refuses
them instead of returning one arbitrary member of the solution family.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import NonUniqueSolution, OutsideTheory
from .operators import _check_grid, apply_S, apply_T
from .spectrum import _assemble_pi, _fb_grids, operator_margin, sigma_ess

__all__ = ["TauClass", "classify_tau", "solve_pie", "residual"]


class TauClass(enum.Enum):
    """Where a parameter sits relative to the solvable range."""

    ZERO = "zero"
    CHANNEL_SINGULAR = "channel-singular"
    EIGEN = "eigen"
    REGULAR = "regular"


def classify_tau(model, tau, margin=None, rank_tol=None):
    """Classify the parameter of the second-kind equation.

    ZERO: tau = 0, the reduction (which works at lam = 1/tau) does not
    apply.  CHANNEL_SINGULAR: 1/tau is in or within the margin of the
    essential set, so a channel factor is not invertible.  EIGEN: the
    reduced system is singular, 1/tau is a discrete eigenvalue.  REGULAR:
    everything invertible.
    """
    margin = operator_margin(model) if margin is None else margin
    rank_tol = model.search.rank_tol if rank_tol is None else rank_tol
    if tau == 0:
        return TauClass.ZERO
    lam = 1.0 / tau
    if sigma_ess(model).distance(lam) <= margin:
        return TauClass.CHANNEL_SINGULAR
    pim = _assemble_pi(model, np.array([lam]), guarded=False)[0]
    system = np.eye(pim.shape[0]) - tau * pim.T
    svals = np.linalg.svd(system, compute_uv=False)
    if svals.min() <= rank_tol * max(float(svals.max()), 1.0):
        return TauClass.EIGEN
    return TauClass.REGULAR


def solve_pie(model, tau, g, margin=None, rank_tol=None, path=1):
    """Unique solution of f - tau * T f = g for a REGULAR parameter.

    EIGEN parameters raise NonUniqueSolution (solutions exist only up to
    the eigenspace); ZERO and CHANNEL_SINGULAR raise OutsideTheory.  The
    two paths apply the channel corrections in opposite order and must
    agree; exposing the choice makes that easy to test.
    """
    _check_grid(model, g)
    kind = classify_tau(model, tau, margin=margin, rank_tol=rank_tol)
    if kind is TauClass.EIGEN:
        raise NonUniqueSolution(f"1/tau = {1.0 / tau!r} is a discrete eigenvalue")
    if kind is not TauClass.REGULAR:
        raise OutsideTheory(f"parameter {tau!r} is {kind.value}")
    lam = 1.0 / tau
    first, second = (1, 2) if path == 1 else (2, 1)
    u = g + tau * apply_S(model, first, tau, g, margin=margin)
    u = u + tau * apply_S(model, second, tau, u, margin=margin)
    pim = _assemble_pi(model, np.array([lam]), path=path, guarded=False)[0]
    system = np.eye(pim.shape[0]) - tau * pim.T
    F, B = _fb_grids(model, lam, path=path)
    wx = model.rule_x.weights
    wy = model.rule_y.weights
    d = np.einsum("wxy,x,y,xy->w", B, wx, wy, u.values, optimize=True)
    c = np.linalg.solve(system, d)
    return u.with_values(u.values + tau * np.einsum("w,wxy->xy", c, F, optimize=True))


def residual(model, tau, f, g):
    """Norm of f - tau * T f - g, the direct check of a claimed solution."""
    _check_grid(model, f)
    _check_grid(model, g)
    return (f - tau * apply_T(model, f) - g).norm()
