"""Closed-form competitive ratios and optimal parameter choices.

These are plain real-valued functions of the model parameters, used to
label plots, pick sweep markers, and supply the bounds the harness
checks runs against.  Domain violations raise DomainError with a
message naming the offending precondition.  Ratios that are genuinely
unbounded (saturated single-wallet regimes) come back as math.inf.

Exact rational twins are provided for the two bounds the acceptance
checks compare exactly against run utilities.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .model import PPM, CollateralError


class DomainError(CollateralError):
    pass


UNBOUNDED = math.inf


def fa_ratio(k: int, r: float) -> float:
    """Flush-all guarantee: (2-r)/(1-r) for load r = kT/C < 1; 3 at r = 1.

    The saturated single-wallet case has no deterministic guarantee.
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"k must be a positive integer, got {k}")
    if not 0 < r <= 1:
        raise DomainError(f"load ratio must be in (0, 1], got {r}")
    if r == 1:
        return UNBOUNDED if k == 1 else 3.0
    return (2 - r) / (1 - r)


def fwf_ratio(k: int, r: float) -> float:
    """Cyclic-flush guarantee: (k+1)/(k(1-r)) for k > 1, r < 1."""
    if k <= 1 or int(k) != k:
        raise DomainError(f"k must be an integer > 1, got {k}")
    if not 0 < r <= 1:
        raise DomainError(f"load ratio must be in (0, 1], got {r}")
    if r == 1:
        return UNBOUNDED
    return (k + 1) / (k * (1 - r))


def ftwf_ratio(k: int) -> float:
    """Paired-flush guarantee at r = 1: 2(k+1)/k for even k > 1."""
    if k <= 1 or int(k) != k or k % 2 != 0:
        raise DomainError(f"k must be an even integer > 1, got {k}")
    return 2 * (k + 1) / k


def k_star(C: float, T: float) -> tuple[float, int]:
    """Wallet count minimizing the cyclic-flush ratio.

    Returns (real minimizer sqrt(1 + C/T) - 1, best feasible integer
    neighbor).  Integer candidates must keep kT <= C; the ratio formula
    is evaluated directly so k = 1 is comparable too.
    """
    if C <= 0 or T <= 0:
        raise DomainError(f"C and T must be positive, got C={C} T={T}")
    if T > C:
        raise DomainError(f"T must not exceed C, got C={C} T={T}")
    real_k = math.sqrt(1 + C / T) - 1

    def ratio_at(k: int) -> float:
        r = k * T / C
        if r >= 1:
            return math.inf
        return (k + 1) / (k * (1 - r))

    lo = max(1, math.floor(real_k))
    hi = max(1, math.ceil(real_k))
    candidates = [k for k in {lo, hi} if k * T <= C]
    if not candidates:
        raise DomainError(f"no feasible integer wallet count for C={C} T={T}")
    best = min(candidates, key=ratio_at)
    return real_k, best


def kwallet_profit_inflation(
    k: int, C: float, T: float, p: float, tau: float
) -> float:
    """Collateral overhead of running k wallets under utility accounting.

    (p/tau - k/C) / (p/tau - k/(C - kT)): the factor by which collateral
    must grow so per-flush profit matches the single-pool baseline.
    Tends to 1 as tau -> 0, and tau = 0 returns exactly 1.
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"k must be a positive integer, got {k}")
    if C <= 0 or T <= 0:
        raise DomainError(f"C and T must be positive, got C={C} T={T}")
    if k * T >= C:
        raise DomainError(f"need kT < C, got k={k} T={T} C={C}")
    if tau < 0 or p <= 0:
        raise DomainError(f"need p > 0 and tau >= 0, got p={p} tau={tau}")
    if tau == 0:
        return 1.0
    if p / tau <= k / (C - k * T):
        raise DomainError(
            f"need p/tau > k/(C - kT), got p/tau={p / tau} k/(C-kT)={k / (C - k * T)}"
        )
    return (p / tau - k / C) / (p / tau - k / (C - k * T))


def eta_alpha(eta: float, C: float, T: float, p: float, tau: float) -> float:
    """Utility guarantee of the threshold policy at threshold eta.

    1/(1 - eta - T/C) * (p/tau - 1/C) / (p/tau - 1/(eta C)).  With
    tau = 0 this degrades gracefully to the value-only guarantee
    1/(1 - eta - T/C).
    """
    if C <= 0 or T < 0:
        raise DomainError(f"need C > 0 and T >= 0, got C={C} T={T}")
    if eta < T / C:
        raise DomainError(f"eta={eta} is below the floor T/C={T / C}")
    if eta > 1:
        raise DomainError(f"eta={eta} exceeds 1")
    if 1 - eta - T / C <= 0:
        raise DomainError(
            f"need eta + T/C < 1 for a finite guarantee, got eta={eta} T/C={T / C}"
        )
    if tau < 0 or p <= 0:
        raise DomainError(f"need p > 0 and tau >= 0, got p={p} tau={tau}")
    value_part = 1 / (1 - eta - T / C)
    if tau == 0:
        return value_part
    if p / tau <= 1 / (eta * C):
        raise DomainError(
            f"need p/tau > 1/(eta C), got p/tau={p / tau} 1/(eta C)={1 / (eta * C)}"
        )
    return value_part * (p / tau - 1 / C) / (p / tau - 1 / (eta * C))


def eta_alpha_exact(
    eta_ppm: int, C: int, T: int, p_ppm: int, tau: int
) -> Fraction:
    """eta_alpha as an exact rational, for slack-free bound checks."""
    eta = Fraction(eta_ppm, PPM)
    p = Fraction(p_ppm, PPM)
    if 1 - eta - Fraction(T, C) <= 0:
        raise DomainError(f"need eta + T/C < 1, got eta_ppm={eta_ppm} T={T} C={C}")
    value_part = 1 / (1 - eta - Fraction(T, C))
    if tau == 0:
        return value_part
    rate = p / tau
    if rate <= 1 / (eta * C):
        raise DomainError("need p/tau > 1/(eta C)")
    return value_part * (rate - Fraction(1, C)) / (rate - 1 / (eta * C))


def eta_star_raw(C: float, T: float, p: float, tau: float) -> float:
    """Unclamped optimizer sqrt((1 - T/C) * beta), beta = tau/(p C)."""
    if C <= 0 or T < 0 or T >= C:
        raise DomainError(f"need 0 <= T < C and C > 0, got C={C} T={T}")
    if p <= 0 or tau < 0:
        raise DomainError(f"need p > 0 and tau >= 0, got p={p} tau={tau}")
    beta = tau / (p * C)
    if beta >= 1:
        raise DomainError(f"need p*C > tau, got beta={beta}")
    return math.sqrt((1 - T / C) * beta)


def eta_star(C: float, T: float, p: float, tau: float) -> float:
    """Threshold minimizing eta_alpha, clamped up to the floor T/C."""
    return max(eta_star_raw(C, T, p, tau), T / C)


def eta_star_is_clamped(C: float, T: float, p: float, tau: float) -> bool:
    return eta_star_raw(C, T, p, tau) < T / C


def eta_star_ratio(C: float, T: float, p: float, tau: float) -> float:
    """Guarantee at the optimal threshold: (1-beta)/(sqrt(1-T/C)-sqrt(beta))^2."""
    if C <= 0 or T < 0 or T >= C:
        raise DomainError(f"need 0 <= T < C and C > 0, got C={C} T={T}")
    if p <= 0 or tau < 0:
        raise DomainError(f"need p > 0 and tau >= 0, got p={p} tau={tau}")
    beta = tau / (p * C)
    if beta >= 1:
        raise DomainError(f"need p*C > tau, got beta={beta}")
    root_gap = math.sqrt(1 - T / C) - math.sqrt(beta)
    if root_gap <= 0:
        raise DomainError(
            f"need sqrt(1 - T/C) > sqrt(beta), got T/C={T / C} beta={beta}"
        )
    return (1 - beta) / (root_gap**2)


def formulas_report(
    C: int,
    T: int,
    k: int | None = None,
    p_ppm: int | None = None,
    tau: int | None = None,
) -> dict:
    """Every applicable closed form for the given parameters, for the CLI."""
    out: dict = {"C": C, "T": T}
    real_k, int_k = k_star(C, T)
    out["kStar"] = {"real": real_k, "integer": int_k}
    if k is not None:
        r = k * T / C
        out["k"] = k
        out["loadRatio"] = r
        try:
            out["faRatio"] = fa_ratio(k, r)
        except DomainError as err:
            out["faRatio"] = str(err)
        try:
            out["fwfRatio"] = fwf_ratio(k, r)
        except DomainError as err:
            out["fwfRatio"] = str(err)
        try:
            out["ftwfRatio"] = ftwf_ratio(k)
        except DomainError as err:
            out["ftwfRatio"] = str(err)
    if p_ppm is not None and tau is not None:
        p = p_ppm / PPM
        out["p"] = p
        out["tau"] = tau
        out["beta"] = tau / (p * C)
        raw = eta_star_raw(C, T, p, tau)
        clamped = eta_star(C, T, p, tau)
        out["etaStar"] = {
            "raw": raw,
            "value": clamped,
            "clamped": eta_star_is_clamped(C, T, p, tau),
        }
        try:
            out["etaStarRatio"] = eta_star_ratio(C, T, p, tau)
        except DomainError as err:
            out["etaStarRatio"] = str(err)
        try:
            out["etaAlphaAtStar"] = eta_alpha(clamped, C, T, p, tau)
        except DomainError as err:
            out["etaAlphaAtStar"] = str(err)
        if k is not None:
            try:
                out["kwalletProfitInflation"] = kwallet_profit_inflation(k, C, T, p, tau)
            except DomainError as err:
                out["kwalletProfitInflation"] = str(err)
    return out
