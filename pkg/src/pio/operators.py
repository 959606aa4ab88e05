"""Apply the operator, its channel resolvents, and the full resolvent.

Everything here acts on `Grid2D` samples taken on the model's own
quadrature rules.  Channel 1 acts on the first variable only (a projection
onto its basis, reweighted along the second variable); channel 2 mirrors
that.  Because each channel has finite rank in its own variable, all
resolvents are explicit rank corrections and no dense linear algebra on the
grid is ever needed; the only solve is the small reduction system.
"""

from __future__ import annotations

import numpy as np

from .errors import EigenvalueHit, GridMismatch, IndexOutOfRange, PioError, SpectrumHit
from .quadrature import Grid2D
from .spectrum import (
    _assemble_pi,
    _combine,
    _fb_grids,
    essential_range,
    operator_margin,
    sigma_channel,
    sigma_ess,
)

__all__ = [
    "apply_partial",
    "apply_T",
    "project",
    "resolvent_channel",
    "apply_S",
    "apply_W",
    "resolvent_T",
]


def _check_grid(model, f):
    if not (
        f.rule_x.same_rule(model.rule_x) and f.rule_y.same_rule(model.rule_y)
    ):
        raise GridMismatch("grid was not sampled on this model's quadrature rules")


def _channel_arrays(model, channel):
    """(basis samples, weight samples, quadrature weights, axis) for a channel.

    axis 0 means the channel integrates over the first variable.
    """
    if channel == 1:
        return model.phi_x, model.h_y, model.rule_x.weights, 0
    if channel == 2:
        return model.psi_y, model.p_x, model.rule_y.weights, 1
    raise PioError(f"channel must be 1 or 2, got {channel!r}")


def _weight_set(model, channel):
    """Union of the channel's weight ranges, without the automatic zero."""
    if channel == 1:
        ranges = [essential_range(w, model.y_interval) for w in model.channel1.weights]
    else:
        ranges = [essential_range(w, model.x_interval) for w in model.channel2.weights]
    return _combine(ranges, include_zero=False)


def _coefficients(model, channel, f):
    """Basis coefficients of f along the channel's own variable.

    For channel 1 the result has shape (n, Ny): coefficient k as a function
    of the second variable.  For channel 2: (m, Nx).
    """
    basis, _, qw, axis = _channel_arrays(model, channel)
    if axis == 0:
        return np.einsum("kx,x,xy->ky", basis, qw, f.values, optimize=True)
    return np.einsum("ky,y,xy->kx", basis, qw, f.values, optimize=True)


def project(model, channel, k, f):
    """Rank-one projection onto the k-th basis member of a channel (1-based)."""
    _check_grid(model, f)
    basis, _, _, axis = _channel_arrays(model, channel)
    if not 1 <= k <= basis.shape[0]:
        raise IndexOutOfRange(f"member index must be in 1..{basis.shape[0]}, got {k}")
    coeff = _coefficients(model, channel, f)[k - 1]
    if axis == 0:
        values = np.multiply.outer(basis[k - 1], coeff)
    else:
        values = np.multiply.outer(coeff, basis[k - 1])
    return f.with_values(values)


def _apply_weighted(model, channel, f, factors):
    """sum_k factors[k](other variable) * (projection onto member k)."""
    basis, _, _, axis = _channel_arrays(model, channel)
    coeffs = _coefficients(model, channel, f)
    if axis == 0:
        values = np.einsum("kx,ky->xy", basis, factors * coeffs, optimize=True)
    else:
        values = np.einsum("ky,kx->xy", basis, factors * coeffs, optimize=True)
    return f.with_values(values)


def apply_partial(model, channel, f):
    """Apply one channel of the operator."""
    _check_grid(model, f)
    _, weights, _, _ = _channel_arrays(model, channel)
    return _apply_weighted(model, channel, f, weights)


def apply_T(model, f):
    """Apply the full operator, the sum of both channels."""
    return apply_partial(model, 1, f) + apply_partial(model, 2, f)


def resolvent_channel(model, channel, lam, g, margin=None):
    """Inverse of (channel operator - lam) applied to g.

    Uses the closed form -(1/lam) * (g - sum_k w_k/(w_k - lam) * proj_k g);
    refuses lam within the margin of that channel's spectrum.
    """
    _check_grid(model, g)
    margin = operator_margin(model) if margin is None else margin
    dist = sigma_channel(model, channel).distance(lam)
    if dist <= margin:
        raise SpectrumHit(
            f"lambda {lam!r} is within {dist:.3e} of the channel spectrum"
        )
    _, weights, _, _ = _channel_arrays(model, channel)
    correction = _apply_weighted(model, channel, g, weights / (weights - lam))
    return (-1.0 / lam) * (g - correction)


def apply_S(model, channel, tau, g, margin=None):
    """Resolvent correction kernel of one channel:
    S(tau) g = sum_k w_k/(1 - tau w_k) proj_k g, so that the inverse of
    (identity - tau * channel) is identity + tau * S(tau).

    Refuses tau with 1/tau closer than the margin to the weight ranges.
    """
    _check_grid(model, g)
    margin = operator_margin(model) if margin is None else margin
    if tau != 0:
        dist = _weight_set(model, channel).distance(1.0 / tau)
        if dist <= margin:
            raise SpectrumHit(
                f"1/tau {1.0 / tau!r} is within {dist:.3e} of the weight ranges"
            )
    _, weights, _, _ = _channel_arrays(model, channel)
    return _apply_weighted(model, channel, g, weights / (1.0 - tau * weights))


def apply_W(model, tau, f, margin=None):
    """The closed composition used by the spectral reduction:
    W(tau) = (identity - tau * channel2)^{-1} S1(tau) channel2."""
    t2 = apply_partial(model, 2, f)
    s = apply_S(model, 1, tau, t2, margin=margin)
    return s + tau * apply_S(model, 2, tau, s, margin=margin)


def resolvent_T(model, lam, g, margin=None, rank_tol=None):
    """Inverse of (T - lam) applied to g via the three-factor split.

    With tau = 1/lam,

        identity - tau T = (identity - tau T1)(identity - tau T2)
                           (identity - tau^2 W(tau)),

    so the resolvent is the product of the channel corrections and one
    finite correction: the last factor is solved through the reduction
    matrix.  Substituting f = u + tau * sum_w c_w F_w into
    (identity - tau^2 W) f = u and pairing with the B factors gives

        (I - tau * Pi(lam)^T) c = d,   d_w = <B_w, u>,

    the transpose entering because Pi[i, l] pairs F_i with B_l while the
    moments c pair with B.  A vanishing singular value there means lam is a
    discrete eigenvalue and the solve is refused.
    """
    _check_grid(model, g)
    margin = operator_margin(model) if margin is None else margin
    rank_tol = model.search.rank_tol if rank_tol is None else rank_tol
    dist = sigma_ess(model).distance(lam)
    if dist <= margin:
        raise SpectrumHit(
            f"lambda {lam!r} is within {dist:.3e} of the essential spectrum"
        )
    tau = 1.0 / lam
    u1 = g + tau * apply_S(model, 1, tau, g, margin=margin)
    u2 = u1 + tau * apply_S(model, 2, tau, u1, margin=margin)

    pim = _assemble_pi(model, np.array([lam]), guarded=False)[0]
    size = pim.shape[0]
    system = np.eye(size) - tau * pim.T
    svals = np.linalg.svd(system, compute_uv=False)
    if svals.min() <= rank_tol * max(float(svals.max()), 1.0):
        raise EigenvalueHit(f"lambda {lam!r} is a discrete eigenvalue")
    F, B = _fb_grids(model, lam)
    wx = model.rule_x.weights
    wy = model.rule_y.weights
    d = np.einsum("wxy,x,y,xy->w", B, wx, wy, u2.values, optimize=True)
    c = np.linalg.solve(system, d)
    corrected = u2.values + tau * np.einsum("w,wxy->xy", c, F, optimize=True)
    return g.with_values(-tau * corrected)
