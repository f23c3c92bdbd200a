"""Closed-form error thresholds and regret bounds used by presets and validation.

Upper-bound thresholds (``*_eps_max``) say how small eps must be for the
standard regret bound to hold; lower-bound thresholds (``*_eps_min``) say how
large it must be for a stuck construction to be valid.  Each function's
docstring carries the formula so validation errors can quote it.
"""

import math

RESOLUTION_FLOOR = 1e-12


def smooth_ub_eps_max(D: float) -> float:
    """eps <= D^2 / 2"""
    return D * D / 2.0


def smooth_ub_bound(breg: float, eta: float, T: int, D: float, beta: float, eps: float) -> float:
    """D_R(w*, w1)/eta + 2 eta T + 2 T D sqrt(beta eps)/eta"""
    return breg / eta + 2.0 * eta * T + 2.0 * T * D * math.sqrt(beta * eps) / eta


def entropy_ub_eps_max(d: int, eta: float, T: int) -> float:
    """eps <= exp(-eta T / 2) min(eta^4, T^-2) / (6 d)"""
    return math.exp(-eta * T / 2.0) * min(eta**4, T**-2.0) / (6.0 * d)


def balanced_entropy_eps_max(d: int, eta: float, alpha: float, T: int) -> float:
    """eps <= min(eta^4, T^-2) / (d max(6 exp(eta alpha), 1/eta))

    The alpha-balanced variant of the entropy threshold.  With alpha = T/2 it
    differs from ``entropy_ub_eps_max`` by constant factors; both are kept.
    """
    return min(eta**4, T**-2.0) / (d * max(6.0 * math.exp(eta * alpha), 1.0 / eta))


def barrier_ub_eps_max(nu: float, c1: float, c2: float, eta: float, T: int, d: int) -> float:
    """eps <= eta^4 min(1/c2, c2) (16 eta T d / c1 + 2 (2d)^(nu-1))^(-nu/(nu-1))"""
    if not nu > 1:
        raise ValueError("barrier threshold needs nu > 1")
    base = 16.0 * eta * T * d / c1 + 2.0 * (2.0 * d) ** (nu - 1.0)
    return eta**4 * min(1.0 / c2, c2) * base ** (-nu / (nu - 1.0))


def barrier_eta_max(c1: float) -> float:
    """eta <= 1/(16 c1)"""
    return 1.0 / (16.0 * c1)


def stochastic_ub_eps_max(delta: float, d: int, T: int) -> float:
    """eps <= delta / (6 d^2 T^4)"""
    return delta / (6.0 * d * d * float(T) ** 4)


def stochastic_eta(d: int, T: int) -> float:
    """eta = sqrt(log(d) / T)"""
    return math.sqrt(math.log(d) / T)


def omd_bound(breg: float, eta: float, T: int) -> float:
    """D_R(w*, w1)/eta + 8 eta T"""
    return breg / eta + 8.0 * eta * T


def stochastic_bound(T: int, d: int) -> float:
    """8 sqrt(T log d)"""
    return 8.0 * math.sqrt(T * math.log(d))


def entropy_lb_eps_min(eta: float, alpha: float) -> float:
    """eps >= 4 eta exp(-eta alpha)"""
    return 4.0 * eta * math.exp(-eta * alpha)


def dimension_lb_eps_min(eta: float, c1: float, d: int, nu: float) -> float:
    """eps >= 4 eta^2 / (c1 d^nu)"""
    return 4.0 * eta**2 / (c1 * d**nu)


def double_switch_eps(eta: float, k: float) -> float:
    """eps = 4 eta exp(-k/2)"""
    return 4.0 * eta * math.exp(-k / 2.0)


def at_floor(eps: float) -> float:
    """Clamp a threshold value to the certification floor."""
    return max(eps, RESOLUTION_FLOOR)


def formula(fn) -> str:
    """The formula line of a threshold function's docstring."""
    return (fn.__doc__ or fn.__name__).strip().splitlines()[0]
