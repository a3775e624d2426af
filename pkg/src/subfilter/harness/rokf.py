"""Two-dimensional comparison of covariance and precision projections onto a subspace."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..gaussian import make_rng


def projection_variances(c: np.ndarray, p: np.ndarray):
    """Marginal ``P^T C P`` and conditional ``(P^T C^-1 P)^-1`` projections of ``C``."""
    c = np.asarray(c, dtype=float)
    p = np.asarray(p, dtype=float).reshape(c.shape[0], -1)
    marginal = p.T @ c @ p
    conditional = np.linalg.inv(p.T @ np.linalg.solve(c, p))
    return 0.5 * (marginal + marginal.T), 0.5 * (conditional + conditional.T)


def loewner_gap(c: np.ndarray, p: np.ndarray) -> float:
    """Smallest eigenvalue of ``P^T C P - (P^T C^-1 P)^-1``; nonnegative for SPD ``C``."""
    marginal, conditional = projection_variances(c, p)
    return float(np.linalg.eigvalsh(marginal - conditional).min())


@dataclass
class DemoTrial:
    m: list
    forecast_cov: list
    marginal: float
    conditional: float

    @property
    def gap(self) -> float:
        return self.marginal - self.conditional


def demo_trial(m: np.ndarray, psi: float = 1.0, q: np.ndarray | float = 0.1) -> DemoTrial:
    """Propagate variance ``psi`` along the first axis through ``m`` and project back."""
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise DimensionMismatch("the demo uses 2 x 2 dynamics")
    p = np.array([[1.0], [0.0]])
    qm = q * np.eye(2) if np.ndim(q) == 0 else np.asarray(q, dtype=float)
    mp = m @ p
    c = psi * (mp @ mp.T) + qm
    marginal, conditional = projection_variances(c, p)
    return DemoTrial(m.tolist(), c.tolist(), float(marginal[0, 0]), float(conditional[0, 0]))


@dataclass
class DemoRecord:
    seed: int
    q: float
    trials: list[DemoTrial] = field(default_factory=list)
    tolerance: float = 1e-10

    @property
    def min_gap(self) -> float:
        return min(t.gap for t in self.trials) if self.trials else 0.0

    @property
    def passed(self) -> bool:
        return self.min_gap >= -self.tolerance

    def to_json(self) -> str:
        d = {"seed": self.seed, "q": self.q, "tolerance": self.tolerance, "n_trials": len(self.trials),
             "min_gap": self.min_gap, "passed": self.passed, "trials": [asdict(t) for t in self.trials]}
        return json.dumps(d, sort_keys=True)


def rokf_demo(seed: int, n_trials: int, q: float = 0.1, psi: float = 1.0) -> DemoRecord:
    """Random 2 x 2 dynamics with N(0, 1) entries, P = e_1 and Q = q I, one trial per draw."""
    rec = DemoRecord(seed, q)
    for i in range(n_trials):
        m = make_rng((seed, i)).standard_normal((2, 2))
        rec.trials.append(demo_trial(m, psi, q))
    return rec
