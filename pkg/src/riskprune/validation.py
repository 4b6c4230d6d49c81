"""Empirical checks of the calibration guarantees.

Random streams come from numpy's ``PCG64`` bit generator seeded through
``SeedSequence``.  Simulated trial ``t`` under seed ``s`` always uses the
stream ``default_rng([s, t])``, so results do not depend on how trials are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses as L
from .fwer import fallback_graph, fixed_sequence
from .network import as_network
from .pruning import MagnitudeOrder
from .pvalues import pvalue_table

DEFAULT_U = (0.01, 0.02, 0.05, 0.1, 0.2)
_BOOTSTRAP_CHUNK = 500


@dataclass
class BootstrapReport:
    risks: np.ndarray
    point_risk: float
    ratio: float | None
    seed: int
    B: int
    config: dict = field(default_factory=dict)

    def mass_above(self, alpha: float) -> float:
        """Share of resampled risks strictly above ``alpha``."""
        return float(np.mean(self.risks > alpha))

    def histogram(self, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.risks, bins=bins, range=(0.0, max(1e-12, float(self.risks.max()))))

    def to_dict(self) -> dict:
        return {"kind": "bootstrap", "config": dict(self.config), "ratio": self.ratio,
                "seed": self.seed, "B": self.B, "point_risk": self.point_risk,
                "risks": self.risks.tolist()}


def bootstrap_risk(losses, B: int = 10_000, seed: int = 0, ratio: float | None = None,
                   config: dict | None = None) -> BootstrapReport:
    """Resample per-sample validation losses ``B`` times with replacement.

    Each resample draws ``m = len(losses)`` indices and averages their losses.
    """
    losses = np.asarray(losses, dtype=np.float64)
    m = losses.size
    if m == 0:
        raise ValueError("validation set is empty")
    if B < 1:
        raise ValueError("B must be at least 1")
    rng = np.random.default_rng(seed)
    risks = np.empty(B)
    for start in range(0, B, _BOOTSTRAP_CHUNK):
        stop = min(B, start + _BOOTSTRAP_CHUNK)
        idx = rng.integers(0, m, size=(stop - start, m))
        risks[start:stop] = losses[idx].sum(axis=1) / m
    return BootstrapReport(risks, L.empirical_risk(losses), ratio, seed, B, dict(config or {}))


def bootstrap_network_risk(net, ratio: float, X, y=None, loss: str = "disagree", B: int = 10_000,
                           seed: int = 0) -> BootstrapReport:
    """Bootstrap the validation risk of ``net`` pruned at ``ratio``."""
    net = as_network(net)
    X = np.asarray(X, dtype=np.float64)
    yhat_full = net.predict(X)
    yhat = MagnitudeOrder(net).prune(ratio).predict(X)
    if loss not in L.LABEL_FREE_LOSSES and y is None:
        raise ValueError(f"loss {loss!r} needs labels")
    values = L.classification_losses(loss, y, yhat, yhat_full)
    return bootstrap_risk(values, B, seed, ratio, {"loss": loss, "m": int(values.size)})


# ---------------------------------------------------------------------------
# Monte Carlo: super-uniformity and FWER


def simulate_superuniformity(pvalue_kind: str, n: int, alpha: float, trials: int, seed: int = 0,
                             u=DEFAULT_U) -> dict[float, float]:
    """Empirical ``P(p <= u)`` when every loss is Bernoulli(alpha), the boundary of the null."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    table = pvalue_table(pvalue_kind, n, alpha)
    counts = np.random.default_rng(seed).binomial(n, alpha, size=trials)
    p = table[counts]
    return {float(x): float(np.mean(p <= x)) for x in u}


def superuniformity_margin(u: float, trials: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(u * (1 - u) / trials)


def logistic_curve(center: float = 0.5, width: float = 0.05, low: float = 0.0,
                   high: float = 0.2) -> Callable[[np.ndarray], np.ndarray]:
    """Increasing risk curve from ``low`` to ``high``, half-way at ``center``."""
    def curve(lam):
        lam = np.asarray(lam, dtype=np.float64)
        return low + (high - low) / (1.0 + np.exp(-(lam - center) / width))
    return curve


def constant_curve(value: float) -> Callable[[np.ndarray], np.ndarray]:
    def curve(lam):
        return np.full(np.shape(lam), float(value))
    return curve


def linear_curve(start: float, stop: float) -> Callable[[np.ndarray], np.ndarray]:
    def curve(lam):
        return start + (stop - start) * np.asarray(lam, dtype=np.float64)
    return curve


def parse_curve(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """``logistic:center,width,low,high`` | ``constant:value`` | ``linear:start,stop``."""
    name, _, args = spec.partition(":")
    values = [float(a) for a in args.split(",") if a.strip()]
    builders = {"logistic": logistic_curve, "constant": constant_curve, "linear": linear_curve}
    if name not in builders:
        raise ValueError(f"unknown curve {name!r}; use logistic, constant or linear")
    try:
        return builders[name](*values)
    except TypeError as exc:
        raise ValueError(f"bad arguments for {name} curve: {args!r}") from exc


@dataclass
class SimReport:
    trials: int
    violations: np.ndarray  # bool per trial
    selected: list  # per-trial selected ratio (1-D) or index pair (2-D), None if nothing
    config: dict = field(default_factory=dict)

    @property
    def violation_rate(self) -> float:
        return float(np.mean(self.violations))

    def to_dict(self) -> dict:
        return {"kind": "simulation", "config": dict(self.config), "trials": self.trials,
                "violation_rate": self.violation_rate,
                "rows": [{"trial": t, "selected": s, "violation": bool(v)}
                         for t, (s, v) in enumerate(zip(self.selected, self.violations))]}


def _coupled_counts(rng, n: int, risk: np.ndarray) -> np.ndarray:
    # one uniform per calibration sample; sample i has loss 1 at a setting iff u_i < r
    u = np.sort(rng.random(n))
    return np.searchsorted(u, risk.ravel(), side="left").reshape(risk.shape)


def simulate_fwer(curve, n: int, alpha: float, delta: float, pvalue_kind: str = "binomial",
                  procedure: str = "fixed-sequence", trials: int = 2000, seed: int = 0,
                  grid=None) -> SimReport:
    """Fraction of trials in which a setting with true risk above ``alpha`` is certified.

    ``curve`` is either a callable mapping pruning ratios to true risks (used
    with the fixed-sequence procedure on ``grid``, default ``j/100``), or a
    2-D array of true risks for the fallback procedure.
    """
    table = pvalue_table(pvalue_kind, n, alpha)
    if procedure == "fixed-sequence":
        grid = np.arange(100) / 100 if grid is None else np.asarray(grid, dtype=np.float64)
        risk = np.asarray(curve(grid), dtype=np.float64) if callable(curve) else np.asarray(curve, dtype=np.float64)
        if risk.ndim != 1 or risk.shape != grid.shape:
            raise ValueError("fixed-sequence simulation needs a 1-D risk curve over the grid")
    elif procedure == "fallback":
        risk = np.asarray(curve, dtype=np.float64)
        if risk.ndim != 2:
            raise ValueError("fallback simulation needs a 2-D risk surface")
    else:
        raise ValueError(f"unknown procedure {procedure!r}")
    if np.any((risk < 0) | (risk > 1)) or np.any(np.isnan(risk)):
        raise ValueError("true risks must lie in [0, 1]")
    true_null = risk > alpha

    violations = np.zeros(trials, dtype=bool)
    selected: list = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        p = table[_coupled_counts(rng, n, risk)]
        if procedure == "fixed-sequence":
            rej = fixed_sequence(p, delta)
            violations[t] = bool(true_null[rej].any()) if rej else False
            selected.append(float(grid[rej[-1]]) if rej else None)
        else:
            rej = fallback_graph(p, delta).rejected
            violations[t] = any(true_null[k, j] for k, j in rej)
            selected.append(max(rej, key=lambda c: (c[1], -c[0])) if rej else None)
    config = {"n": n, "alpha": alpha, "delta": delta, "pvalue": pvalue_kind,
              "procedure": procedure, "seed": seed, "shape": list(risk.shape)}
    return SimReport(trials, violations, selected, config)
