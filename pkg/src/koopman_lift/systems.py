"""Benchmark dynamical systems used for dictionary comparisons.

Each system is a continuous-time vector field dx/dt = f(x) wrapped with its
default parameter values, the box initial conditions are drawn from, and a
display name.  Parameters can be overridden per call site (and from config
JSON via the CLI) by passing ``params`` to :func:`get_system`.

The glycolysis entry is the standard seven-species yeast glycolytic
oscillator.  Its rate constants are transcribed in ``GLYCOLYSIS_PARAMS``; the
transcription is versioned so downstream results can be tied to an exact
constant set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

VANDERPOL_PARAMS = {"damping": 1.0}

DUFFING_PARAMS = {"delta": 0.0, "linear": -1.0, "cubic": 1.0}

PREDPREY_PARAMS = {"prey_growth": 1.1, "predation": 0.5,
                   "conversion": 0.1, "predator_death": 0.2}

TOGGLE_PARAMS = {"rate_1": 2.5, "rate_2": 1.5, "hill_1": 1.4,
                 "hill_2": 1.1, "decay": 0.25}

# Seven-species yeast glycolysis oscillator, constants transcription v1.
GLYCOLYSIS_PARAMS_VERSION = 1
GLYCOLYSIS_PARAMS = {
    "j0": 2.5,       # glucose influx
    "k1": 100.0,     # hexokinase-PFK lumped rate
    "k2": 6.0,
    "k3": 16.0,
    "k4": 100.0,
    "k5": 1.28,
    "k6": 12.0,
    "k_out": 1.8,    # extracellular degradation
    "kappa": 13.0,   # membrane exchange
    "q": 4.0,        # PFK cooperativity exponent
    "big_k1": 0.52,  # PFK inhibition threshold
    "psi": 0.1,      # volume ratio
    "n_total": 1.0,  # conserved NAD pool
    "a_total": 4.0,  # conserved adenine pool
}

GLYCOLYSIS_X0 = np.array([1.0, 0.19, 0.2, 0.1, 0.3, 0.14, 0.05])


def vanderpol_rhs(x, damping=1.0):
    """Self-exciting oscillator: [x2, -x1 + damping * (1 - x1^2) * x2]."""
    x = np.asarray(x, dtype=float)
    return np.array([x[1], -x[0] + damping * (1.0 - x[0] ** 2) * x[1]])


def duffing_rhs(x, delta=0.0, linear=-1.0, cubic=1.0):
    """Unforced Duffing oscillator: [x2, -delta*x2 - linear*x1 - cubic*x1^3]."""
    x = np.asarray(x, dtype=float)
    return np.array([x[1], -delta * x[1] - linear * x[0] - cubic * x[0] ** 3])


def predprey_rhs(x, prey_growth=1.1, predation=0.5, conversion=0.1, predator_death=0.2):
    """Lotka-Volterra pair: prey x1, predator x2."""
    x = np.asarray(x, dtype=float)
    return np.array([
        prey_growth * x[0] - predation * x[0] * x[1],
        conversion * x[0] * x[1] - predator_death * x[1],
    ])


def toggle_rhs(x, rate_1=2.5, rate_2=1.5, hill_1=1.4, hill_2=1.1, decay=0.25):
    """Mutually repressive two-gene switch.  Requires non-negative state
    (fractional Hill exponents are undefined for negative concentrations)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError(f"toggle switch state must be non-negative, got {x}")
    return np.array([
        rate_1 / (1.0 + x[1] ** hill_1) - decay * x[0],
        rate_2 / (1.0 + x[0] ** hill_2) - decay * x[1],
    ])


def glycolysis_rhs(x, **params):
    """Seven-species glycolysis oscillator; concentrations must stay >= 0."""
    p = dict(GLYCOLYSIS_PARAMS)
    p.update(params)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("glycolysis state must be non-negative")
    s1, s2, s3, s4, s5, s6, s7 = x
    pfk = p["k1"] * s1 * s6 / (1.0 + (s6 / p["big_k1"]) ** p["q"])
    nadh_ox = p["k2"] * s2 * (p["n_total"] - s5)
    pk = p["k3"] * s3 * (p["a_total"] - s6)
    return np.array([
        p["j0"] - pfk,
        2.0 * pfk - nadh_ox - p["k6"] * s2 * s5,
        nadh_ox - pk,
        pk - p["k4"] * s4 * s5 - p["kappa"] * (s4 - s7),
        nadh_ox - p["k4"] * s4 * s5 - p["k6"] * s2 * s5,
        -2.0 * pfk + 2.0 * pk - p["k5"] * s6,
        p["psi"] * p["kappa"] * (s4 - s7) - p["k_out"] * s7,
    ])


@dataclass(frozen=True)
class SystemDef:
    """A named vector field plus its sampling defaults."""

    name: str
    n: int                       # state dimension
    rhs: Callable[[np.ndarray], np.ndarray]
    init_box: np.ndarray         # (n, 2) lo/hi box for initial conditions
    params: dict


def _nonneg_guard(rhs):
    """Integrator-facing wrapper for positive-domain systems.

    RK4 stage estimates can dip below zero near the axes even when the
    solution stays positive, so the registry evaluates these vector fields on
    the flat extension f(max(x, 0)).  The raw rhs functions keep their strict
    domain check for direct callers.
    """
    def guarded(x):
        return rhs(np.maximum(np.asarray(x, dtype=float), 0.0))
    return guarded


def _build(name: str, params: dict | None) -> SystemDef:
    if name == "vanderpol":
        p = dict(VANDERPOL_PARAMS, **(params or {}))
        return SystemDef(name, 2, lambda x: vanderpol_rhs(x, **p),
                         np.array([[-2.0, 2.0], [-2.0, 2.0]]), p)
    if name == "duffing":
        p = dict(DUFFING_PARAMS, **(params or {}))
        return SystemDef(name, 2, lambda x: duffing_rhs(x, **p),
                         np.array([[-2.0, 2.0], [-2.0, 2.0]]), p)
    if name == "predprey":
        p = dict(PREDPREY_PARAMS, **(params or {}))
        return SystemDef(name, 2, lambda x: predprey_rhs(x, **p),
                         np.array([[0.5, 3.0], [0.5, 3.0]]), p)
    if name == "toggle":
        p = dict(TOGGLE_PARAMS, **(params or {}))
        return SystemDef(name, 2, _nonneg_guard(lambda x: toggle_rhs(x, **p)),
                         np.array([[0.0, 4.0], [0.0, 4.0]]), p)
    if name == "glycolysis":
        p = dict(GLYCOLYSIS_PARAMS, **(params or {}))
        box = np.column_stack([GLYCOLYSIS_X0, GLYCOLYSIS_X0])
        return SystemDef(name, 7, _nonneg_guard(lambda x: glycolysis_rhs(x, **p)), box, p)
    raise KeyError(name)


SYSTEM_NAMES = ("vanderpol", "duffing", "predprey", "toggle", "glycolysis")


def get_system(name: str, params: dict | None = None) -> SystemDef:
    """Look up a benchmark system by name, optionally overriding parameters."""
    if name not in SYSTEM_NAMES:
        raise ValueError(f"unknown system {name!r}; valid names: {', '.join(SYSTEM_NAMES)}")
    return _build(name, params)
