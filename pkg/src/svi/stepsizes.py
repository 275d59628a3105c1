"""Stepsize schedules and their error-bound sequences.

Covers the harmonic rule, the generic recursive rule
``g_{k+1} = g_k (1 - c g_k)``, the centralized adaptive rule (ASA) derived
from the strong-monotonicity modulus and the noise bound, its distributed
per-agent variant (DASA), the optimal lower/upper envelope sequences for
bounded stepsize discrepancy, and the worst-case error recursions used to
certify optimality of the adaptive rules.

All recursions are evaluated with extended-precision (80-bit) internal
state and emitted as float64, so every emitted term is the correctly
rounded value of the underlying real sequence.  The exact scaling
identities between related sequences (upper vs. lower envelope, per-agent
ratios, error vs. stepsize) then hold at the level of a few ulp for any
horizon, instead of degrading with accumulated rounding.

Parameters may be scalars or equal-shaped arrays; array inputs produce one
sequence per entry (used by the randomized audits).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "SchemeParams",
    "StepsizeSchedule",
    "harmonic_step",
    "recursive_schedule",
    "asa_schedule",
    "dasa_schedule",
    "bound_schedules",
    "error_sequence",
    "step_upper_bound",
    "optimality_gap_check",
    "polyak_sequences",
]

LONG = np.longdouble
SQRT2 = np.sqrt(np.asarray(2.0, dtype=LONG))


@dataclass(frozen=True)
class SchemeParams:
    """Problem constants a schedule adapts to.

    eta     strong-monotonicity modulus (> 0)
    lip     Lipschitz constant (>= eta)
    nu      noise bound, sqrt of the second-moment bound on the error norm
    e0      initial error bound (mean squared distance at the start)
    beta    stepsize discrepancy bound, in [0, eta/lip)
    c       distributed-rule constant, in (0, eta/2]
    r       per-agent multipliers, each in [1, 1 + (eta - 2c)/lip]
    diameter   bound on max_{x in X} ||x - x0||
    relaxed_nu when set, the distributed rule only requires nu >= diameter
               (instead of nu >= diameter*lip/sqrt(2)); optimality
               certificates are void in this mode, convergence is not.
    """

    eta: float
    lip: float
    nu: float
    e0: Optional[float] = None
    beta: float = 0.0
    c: Optional[float] = None
    r: Optional[tuple] = None
    diameter: Optional[float] = None
    relaxed_nu: bool = False

    def with_(self, **kw) -> "SchemeParams":
        return replace(self, **kw)

    @property
    def dasa_beta(self) -> float:
        """Discrepancy bound induced by (c, lip): (eta - 2c)/lip."""
        if self.c is None:
            raise ParameterError("c is not set")
        return (self.eta - 2.0 * self.c) / self.lip


def _check_positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise ParameterError(f"{name} must be positive")


def _validate_base(p: SchemeParams) -> None:
    _check_positive("eta", p.eta)
    _check_positive("lip", p.lip)
    _check_positive("nu", p.nu)
    if not np.all(np.asarray(p.eta) <= np.asarray(p.lip) * (1 + 1e-12)):
        raise ParameterError("eta must not exceed the Lipschitz constant")


def _validate_e0(p: SchemeParams) -> None:
    if p.e0 is None:
        raise ParameterError("e0 is required")
    _check_positive("e0", p.e0)
    # nu >= lip * sqrt(e0 / 2), i.e. e0 <= 2 nu^2 / lip^2
    lhs = np.asarray(p.e0, dtype=float)
    rhs = 2.0 * np.asarray(p.nu, dtype=float) ** 2 / np.asarray(p.lip, dtype=float) ** 2
    if not np.all(lhs <= rhs * (1 + 1e-12)):
        raise ParameterError("noise bound too small: nu >= lip*sqrt(e0/2) is required")


def _validate_beta(p: SchemeParams) -> None:
    beta = np.asarray(p.beta, dtype=float)
    if not np.all(beta >= 0):
        raise ParameterError("beta must be nonnegative")
    if not np.all(beta < np.asarray(p.eta) / np.asarray(p.lip)):
        raise ParameterError("beta must be below eta/lip")


def _validate_dasa(p: SchemeParams) -> None:
    _validate_base(p)
    if p.c is None or p.diameter is None:
        raise ParameterError("DASA requires c and diameter")
    c = np.asarray(p.c, dtype=float)
    if not (np.all(c > 0) and np.all(c <= np.asarray(p.eta) / 2 * (1 + 1e-12))):
        raise ParameterError("c must lie in (0, eta/2]")
    _check_positive("diameter", p.diameter)
    nu = np.asarray(p.nu, dtype=float)
    D = np.asarray(p.diameter, dtype=float)
    if p.relaxed_nu:
        if not np.all(nu >= D * (1 - 1e-12)):
            raise ParameterError("relaxed mode still requires nu >= diameter")
    else:
        need = D * np.asarray(p.lip, dtype=float) / np.sqrt(2.0)
        if not np.all(nu >= need * (1 - 1e-12)):
            raise ParameterError("nu >= diameter*lip/sqrt(2) is required "
                                 "(use relaxed_nu to weaken to nu >= diameter)")


def _agent_multiplier(p: SchemeParams, agent: int):
    if p.r is None:
        return 1.0
    r = np.asarray(p.r, dtype=float)
    r_i = r if r.ndim == 0 else r[agent]
    hi = 1.0 + (np.asarray(p.eta) - 2.0 * np.asarray(p.c)) / np.asarray(p.lip)
    if not (np.all(r_i >= 1 - 1e-12) and np.all(r_i <= hi * (1 + 1e-12))):
        raise ParameterError(
            f"agent multiplier r[{agent}] must lie in [1, 1 + (eta-2c)/lip]")
    return r_i


def _recurse(g0, coef, K: int) -> np.ndarray:
    """g_{k+1} = g_k (1 - coef * g_k) in extended precision, float64 out."""
    g, coef = np.broadcast_arrays(np.asarray(g0, dtype=LONG), np.asarray(coef, dtype=LONG))
    g = g.copy()
    out = np.empty((K + 1,) + g.shape, dtype=LONG)
    out[0] = g
    for k in range(1, K + 1):
        g = g * (1.0 - coef * g)
        out[k] = g
    return out.astype(np.float64)


def harmonic_step(theta: float, k: int) -> float:
    """theta / k for iteration k >= 1 (the schedule is 1-indexed)."""
    if theta <= 0:
        raise ParameterError("theta must be positive")
    if k < 1:
        raise ParameterError("harmonic schedule is 1-indexed; k must be >= 1")
    return theta / k


def recursive_schedule(gamma0: float, cbar: float, K: int) -> np.ndarray:
    """Terms 0..K of g_{k+1} = g_k (1 - cbar g_k); requires 0 < g_0 < 1/cbar."""
    _check_positive("cbar", cbar)
    g0 = np.asarray(gamma0, dtype=float)
    if not (np.all(g0 > 0) and np.all(g0 < 1.0 / np.asarray(cbar, dtype=float))):
        raise ParameterError("gamma0 must lie in (0, 1/cbar) to keep the sequence positive")
    return _recurse(gamma0, cbar, K)


def asa_schedule(params: SchemeParams, K: int) -> np.ndarray:
    """Centralized adaptive sequence, terms 0..K.

    gamma_0 = eta * e0 / (2 nu^2), gamma_k = gamma_{k-1} (1 - (eta/2) gamma_{k-1}).
    Strictly decreasing, every term in (0, eta/lip^2].
    """
    _validate_base(params)
    _validate_e0(params)
    eta = np.asarray(params.eta, dtype=LONG)
    nu2 = np.square(np.asarray(params.nu, dtype=LONG))
    g0 = eta * np.asarray(params.e0, dtype=LONG) / (2.0 * nu2)
    return _recurse(g0, eta / 2.0, K)


def dasa_schedule(params: SchemeParams, agent: int, K: int) -> np.ndarray:
    """Per-agent adaptive sequence, terms 0..K.

    gamma_{0,i} = r_i c D^2 / ((1 + (eta-2c)/lip)^2 nu^2),
    gamma_{k,i} = gamma_{k-1,i} (1 - (c/r_i) gamma_{k-1,i}).

    The normalized sequence gamma_{k,i}/r_i is agent-independent, so the
    per-agent ratios are constant across all iterations.
    """
    _validate_dasa(params)
    r_i = _agent_multiplier(params, agent)
    c = np.asarray(params.c, dtype=LONG)
    beta = (np.asarray(params.eta, dtype=LONG) - 2.0 * c) / np.asarray(params.lip, dtype=LONG)
    D2 = np.square(np.asarray(params.diameter, dtype=LONG))
    nu2 = np.square(np.asarray(params.nu, dtype=LONG))
    g0 = np.asarray(r_i, dtype=LONG) * c * D2 / (np.square(1.0 + beta) * nu2)
    return _recurse(g0, c / np.asarray(r_i, dtype=LONG), K)


def bound_schedules(params: SchemeParams, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Optimal lower/upper stepsize envelopes, terms 0..K each.

    delta_0 = (eta - beta lip) e0 / (2 (1+beta)^2 nu^2) with contraction
    coefficient (eta - beta lip)/2; the upper envelope starts at
    (eta - beta lip) e0 / (2 (1+beta) nu^2) with coefficient
    (eta - beta lip)/(2 (1+beta)).  The two satisfy
    Gamma_k = (1+beta) delta_k for all k.
    """
    _validate_base(params)
    _validate_e0(params)
    _validate_beta(params)
    eta = np.asarray(params.eta, dtype=LONG)
    lip = np.asarray(params.lip, dtype=LONG)
    beta = np.asarray(params.beta, dtype=LONG)
    nu2 = np.square(np.asarray(params.nu, dtype=LONG))
    e0 = np.asarray(params.e0, dtype=LONG)
    gap = eta - beta * lip
    delta0 = gap * e0 / (2.0 * np.square(1.0 + beta) * nu2)
    upper0 = gap * e0 / (2.0 * (1.0 + beta) * nu2)
    delta = _recurse(delta0, gap / 2.0, K)
    upper = _recurse(upper0, gap / (2.0 * (1.0 + beta)), K)
    return delta, upper


def _noise_factor(params: SchemeParams, variant: str):
    if variant == "centralized":
        return np.asarray(params.eta, dtype=LONG), LONG(1.0)
    if variant == "distributed":
        contraction = (np.asarray(params.eta, dtype=LONG)
                       - np.asarray(params.beta, dtype=LONG) * np.asarray(params.lip, dtype=LONG))
        noise = np.square(1.0 + np.asarray(params.beta, dtype=LONG))
        return contraction, noise
    raise ParameterError(f"unknown variant {variant!r}")


def error_sequence(params: SchemeParams, steps, variant: str = "centralized") -> np.ndarray:
    """Worst-case mean-squared-error recursion driven by the given steps.

    Centralized: e_{k+1} = (1 - eta g_k) e_k + nu^2 g_k^2.
    Distributed: e_{k+1} = (1 - (eta - beta lip) d_k) e_k
                           + (1 + beta)^2 nu^2 d_k^2.
    Returns e_0..e_K for K = len(steps).
    """
    _validate_base(params)
    _validate_e0(params)
    if variant == "distributed":
        _validate_beta(params)
    steps = np.asarray(steps, dtype=LONG)
    _check_positive("steps", steps)
    contraction, noise = _noise_factor(params, variant)
    nu2 = np.square(np.asarray(params.nu, dtype=LONG))
    shape = np.broadcast_shapes(steps.shape[1:], np.shape(contraction))
    e = np.asarray(params.e0, dtype=LONG) + np.zeros(shape, dtype=LONG)
    out = np.empty((steps.shape[0] + 1,) + shape, dtype=LONG)
    out[0] = e
    noise_nu2 = noise * nu2
    for k in range(steps.shape[0]):
        g = steps[k]
        e = (1.0 - contraction * g) * e + noise_nu2 * g * g
        out[k + 1] = e
    return out.astype(np.float64)


def step_upper_bound(params: SchemeParams, variant: str = "centralized") -> float:
    """Upper edge of the admissible stepsize region for the variant."""
    eta = np.asarray(params.eta, dtype=float)
    lip = np.asarray(params.lip, dtype=float)
    if variant == "centralized":
        return eta / lip ** 2
    beta = np.asarray(params.beta, dtype=float)
    return (eta - beta * lip) / ((1.0 + beta) ** 2 * lip ** 2)


def optimality_gap_check(params: SchemeParams, perturbed_steps,
                         variant: str = "centralized") -> float:
    """e_K(perturbed) - e_K(optimal) for admissible perturbed steps.

    The optimal sequence is the adaptive one of matching variant and
    length; the gap is guaranteed nonnegative and at least
    (1+beta)^2 nu^2 (d_{K-1} - d*_{K-1})^2 up to rounding slack.
    """
    perturbed = np.asarray(perturbed_steps, dtype=np.float64)
    K = perturbed.shape[0]
    if K < 1:
        raise ParameterError("need at least one step")
    bound = step_upper_bound(params, variant)
    if not (np.all(perturbed > 0) and np.all(perturbed <= np.asarray(bound) * (1 + 4e-16))):
        raise ParameterError("perturbed steps must lie in the admissible region")
    if variant == "centralized":
        optimal = asa_schedule(params, K - 1)
    else:
        optimal = bound_schedules(params, K - 1)[0]
    e_pert = error_sequence(params, perturbed, variant)[-1]
    e_opt = error_sequence(params, optimal, variant)[-1]
    gap = e_pert - e_opt
    return gap if np.ndim(gap) else float(gap)


def polyak_sequences(params: SchemeParams, deltas) -> tuple[np.ndarray, np.ndarray]:
    """Contraction/noise sequences induced by lower-envelope steps.

    alpha_k = 2 (eta - beta lip) d_k - lip^2 (1+beta)^2 d_k^2,
    mu_k    = (1+beta)^2 nu^2 d_k^2.
    """
    _validate_base(params)
    _validate_beta(params)
    d = np.asarray(deltas, dtype=np.float64)
    gap = params.eta - params.beta * params.lip
    fac = (1.0 + params.beta) ** 2
    alpha = 2.0 * gap * d - params.lip ** 2 * fac * d * d
    mu = fac * params.nu ** 2 * d * d
    return alpha, mu


class StepsizeSchedule:
    """Stateful per-agent stepsize stream.

    Emits gamma_k for k = 0, 1, ... via :meth:`next`; the harmonic kind is
    internally shifted so the first emitted value is theta/1.  Recursive
    kinds keep extended-precision state.  Schedules are cloneable and a
    whole prefix can be materialized for testing or precomputation.
    """

    def __init__(self, kind: str, *, theta=None, gamma0=None, cbar=None,
                 params: SchemeParams | None = None, agent: int = 0, seq=None):
        self.kind = kind
        self.theta = theta
        self.params = params
        self.agent = agent
        self.seq = None if seq is None else np.asarray(seq, dtype=np.float64)
        self._k = 0
        if kind == "harmonic":
            _check_positive("theta", theta)
            self._g = None
            self._coef = None
        elif kind == "recursive":
            _check_positive("cbar", cbar)
            if not (0 < gamma0 < 1.0 / cbar):
                raise ParameterError("gamma0 must lie in (0, 1/cbar)")
            self._g = LONG(gamma0)
            self._coef = LONG(cbar)
        elif kind == "asa":
            _validate_base(params)
            _validate_e0(params)
            self._g = (LONG(params.eta) * LONG(params.e0)
                       / (2.0 * LONG(params.nu) ** 2))
            self._coef = LONG(params.eta) / 2.0
        elif kind == "dasa":
            _validate_dasa(params)
            r_i = float(_agent_multiplier(params, agent))
            beta = LONG(params.dasa_beta)
            self._g = (LONG(r_i) * LONG(params.c) * LONG(params.diameter) ** 2
                       / ((1.0 + beta) ** 2 * LONG(params.nu) ** 2))
            self._coef = LONG(params.c) / LONG(r_i)
        elif kind == "explicit":
            if self.seq is None or self.seq.ndim != 1 or self.seq.size == 0:
                raise ParameterError("explicit schedule needs a nonempty 1-D sequence")
            if not np.all(self.seq > 0):
                raise ParameterError("explicit stepsizes must be positive")
            self._g = None
            self._coef = None
        else:
            raise ParameterError(f"unknown schedule kind {kind!r}")

    # --- constructors -------------------------------------------------
    @classmethod
    def harmonic(cls, theta: float) -> "StepsizeSchedule":
        return cls("harmonic", theta=theta)

    @classmethod
    def recursive(cls, gamma0: float, cbar: float) -> "StepsizeSchedule":
        return cls("recursive", gamma0=gamma0, cbar=cbar)

    @classmethod
    def asa(cls, params: SchemeParams) -> "StepsizeSchedule":
        return cls("asa", params=params)

    @classmethod
    def dasa(cls, params: SchemeParams, agent: int) -> "StepsizeSchedule":
        return cls("dasa", params=params, agent=agent)

    @classmethod
    def explicit(cls, seq) -> "StepsizeSchedule":
        return cls("explicit", seq=seq)

    # --- streaming ----------------------------------------------------
    @property
    def k(self) -> int:
        return self._k

    def next(self) -> float:
        """Stepsize for the current update, then advance."""
        if self.kind == "harmonic":
            g = self.theta / (self._k + 1)
        elif self.kind == "explicit":
            if self._k >= self.seq.size:
                raise ParameterError(
                    f"explicit schedule exhausted after {self.seq.size} terms")
            g = float(self.seq[self._k])
        else:
            g = float(self._g)
            self._g = self._g * (1.0 - self._coef * self._g)
        self._k += 1
        return g

    def materialize(self, K: int) -> np.ndarray:
        """First K terms (for update indices 0..K-1), without advancing."""
        if self.kind == "harmonic":
            return self.theta / np.arange(1, K + 1, dtype=np.float64)
        if self.kind == "explicit":
            if self.seq.size < K:
                raise ParameterError(
                    f"explicit schedule has {self.seq.size} terms, needs {K}")
            return self.seq[:K].copy()
        return _recurse(self._g, self._coef, K - 1) if K > 0 else np.empty(0)

    def clone(self) -> "StepsizeSchedule":
        c = StepsizeSchedule.__new__(StepsizeSchedule)
        c.__dict__.update(self.__dict__)
        return c
