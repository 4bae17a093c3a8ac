from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DomainError
from .functions import FAMILIES

__all__ = ["DesignSpec", "DesignProblem", "DesignSolution"]


@dataclass(frozen=True)
class DesignSpec:
    """Settings of one gain design.

    ``epsilons`` holds one violation probability per constraint family
    (q upper, q lower, v upper, v lower); ``None`` leaves the family out.
    ``stability`` selects the eigenvalue test (``"eigen"``) or the norm-based
    sufficient test for non-symmetric ``X`` (``"norm"``). With
    ``normalize_objective`` the objective is divided by its value at the
    starting point, so the proximal weight ``d`` is measured against an
    objective of order one whatever the units of ``q``.
    """

    v_min: object = 0.95
    v_max: object = 1.05
    q_min: object = None
    q_max: object = None
    epsilons: tuple = (None, None, 0.05, 0.05)
    xi: float = 1e-4
    d: float = 1.0
    tol: float = 1e-6
    max_iter: int = 200
    step_rule: str = "diminishing"
    gamma: float = 1.0
    decay: float = 0.6
    stability: str = "eigen"
    majorizer: str = "anchor"
    eta0: float = 0.5
    alpha0: float = 3.5
    normalize_objective: bool = True

    def __post_init__(self):
        eps = tuple(self.epsilons)
        if len(eps) != 4:
            raise DomainError("epsilons needs one entry per constraint family")
        for e in eps:
            if e is not None and not 0 < e <= 1:
                raise DomainError(f"violation probabilities must lie in (0, 1], got {e}")
        if (eps[0] is not None or eps[1] is not None) and (self.q_min is None or self.q_max is None):
            raise DomainError("reactive-power chance constraints need q_min and q_max")
        object.__setattr__(self, "epsilons", eps)
        if np.any(np.asarray(self.v_min) >= np.asarray(self.v_max)):
            raise DomainError("need v_min < v_max")
        if self.q_min is not None and np.any(np.asarray(self.q_min) >= np.asarray(self.q_max)):
            raise DomainError("need q_min < q_max")
        if self.xi <= 0 or self.d <= 0 or self.tol <= 0:
            raise DomainError("xi, d and tol must be positive")
        if self.step_rule not in ("diminishing", "constant"):
            raise DomainError(f"unknown step rule {self.step_rule!r}")
        if not 0 < self.gamma <= 1:
            raise DomainError("gamma must lie in (0, 1]")
        if self.stability not in ("eigen", "norm"):
            raise DomainError(f"unknown stability test {self.stability!r}")
        if self.majorizer not in ("origin", "safe", "anchor"):
            raise DomainError(f"unknown majorizer rule {self.majorizer!r}")

    @property
    def active_families(self):
        return tuple(i for i, e in zip(FAMILIES, self.epsilons) if e is not None)

    def step_size(self, p):
        if self.step_rule == "constant":
            return self.gamma
        return self.gamma / (1.0 + p) ** self.decay


@dataclass
class DesignProblem:
    """Sensitivity model plus ``samples[m, s, n]`` of the no-control voltage."""

    model: object
    samples: np.ndarray
    spec: DesignSpec = field(default_factory=DesignSpec)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, None, :]
        elif s.ndim == 2:
            s = s[None, :, :]
        if s.ndim != 3 or s.shape[-1] != self.model.size:
            raise DomainError(
                f"samples must have shape (b, n_samples, {self.model.size}), got {np.shape(self.samples)}"
            )
        if not np.all(np.isfinite(s)):
            raise DomainError("non-finite voltage samples")
        self.samples = s

    @property
    def n_intervals(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def size(self):
        return self.samples.shape[2]

    def linear_constraints(self):
        """Rows ``(a, b)`` of the deterministic constraints ``a @ x <= b``."""
        one = np.array([1.0, 1.0])
        if self.spec.stability == "eigen":
            rows = [(one, 2.0 - self.model.lambda_max), (-one, 0.0)]
        else:
            nx = self.model.norm2
            rows = [(one, 2.0 - nx), (-one, -nx)]
        rows += [(np.array([-1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0)]
        A = np.array([r[0] for r in rows])
        b = np.array([r[1] for r in rows])
        return A, b

    def deterministic_feasible(self, x, strict=False):
        A, b = self.linear_constraints()
        r = A @ np.asarray(x, dtype=float) - b
        return bool(np.all(r < 0) if strict else np.all(r <= 1e-12))


@dataclass
class DesignSolution:
    x: np.ndarray
    gains: object
    u: dict
    n_iter: int
    step_norm: float
    objective: float
    converged: bool
    violation_rates: dict
    cvar_margins: dict
    history: list = field(default_factory=list, repr=False)
    x0: np.ndarray = None

    def to_dict(self):
        return {
            "eta": self.gains.eta,
            "alpha": self.gains.alpha,
            "x": [float(v) for v in self.x],
            "x0": None if self.x0 is None else [float(v) for v in self.x0],
            "iterations": self.n_iter,
            "step_norm": self.step_norm,
            "converged": self.converged,
            "objective": self.objective,
            "violation_rates": {k: np.asarray(v).tolist() for k, v in self.violation_rates.items()},
            "cvar_margins": {k: np.asarray(v).tolist() for k, v in self.cvar_margins.items()},
        }
