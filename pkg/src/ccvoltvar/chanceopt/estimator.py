"""scikit-learn style front end of the gain design."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..controller import equilibrium
from ..exceptions import DomainError
from ..sensitivity import SensitivityModel
from .problem import DesignProblem, DesignSpec
from .sca import initial_point, ogd_sca

__all__ = ["GainDesigner"]


def _check_samples(rho, n):
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 1:
        rho = rho[None, :]
    if rho.shape[-1] != n:
        raise DomainError(f"expected {n} voltage columns, got {rho.shape[-1]}")
    if not np.all(np.isfinite(rho)):
        raise DomainError("non-finite voltage samples")
    return rho


class GainDesigner(BaseEstimator):
    """Chance-constrained design of the incremental Volt/Var gains.

    Parameters
    ----------
    X : array-like of shape (n, n) or SensitivityModel
        Voltage sensitivity to reactive injections at the controlled nodes.
    epsilon : float, default=0.05
        Violation probability for the upper and lower voltage limits.
    v_min, v_max : float or array-like, default=0.95, 1.05
        Voltage limits in p.u.
    epsilon_q : float or None, default=None
        Violation probability for the reactive power boxes; ``None`` leaves
        them out of the design (the controller still clips to the box).
    q_min, q_max : array-like or None
        Reactive power box, needed only when ``epsilon_q`` is set.
    xi, d, tol, max_iter, step_rule, gamma, decay, stability, majorizer, eta0, alpha0, normalize_objective
        See :class:`DesignSpec`.

    Attributes
    ----------
    gains_ : Gains
    eta_, alpha_ : float
    x_ : ndarray of shape (2,)
    solution_ : DesignSolution
    n_iter_ : int
    """

    def __init__(self, X=None, epsilon=0.05, v_min=0.95, v_max=1.05, epsilon_q=None,
                 q_min=None, q_max=None, xi=1e-4, d=1.0, tol=1e-6, max_iter=200,
                 step_rule="diminishing", gamma=1.0, decay=0.6, stability="eigen",
                 majorizer="anchor", eta0=0.5, alpha0=3.5, normalize_objective=True):
        self.X = X
        self.epsilon = epsilon
        self.v_min = v_min
        self.v_max = v_max
        self.epsilon_q = epsilon_q
        self.q_min = q_min
        self.q_max = q_max
        self.xi = xi
        self.d = d
        self.tol = tol
        self.max_iter = max_iter
        self.step_rule = step_rule
        self.gamma = gamma
        self.decay = decay
        self.stability = stability
        self.majorizer = majorizer
        self.eta0 = eta0
        self.alpha0 = alpha0
        self.normalize_objective = normalize_objective

    def _model(self):
        if self.X is None:
            raise DomainError("GainDesigner needs a sensitivity matrix X")
        if isinstance(self.X, SensitivityModel):
            return self.X
        return SensitivityModel(np.atleast_2d(np.asarray(self.X, dtype=float)))

    def design_spec(self):
        return DesignSpec(
            v_min=self.v_min, v_max=self.v_max, q_min=self.q_min, q_max=self.q_max,
            epsilons=(self.epsilon_q, self.epsilon_q, self.epsilon, self.epsilon),
            xi=self.xi, d=self.d, tol=self.tol, max_iter=self.max_iter,
            step_rule=self.step_rule, gamma=self.gamma, decay=self.decay,
            stability=self.stability, majorizer=self.majorizer,
            eta0=self.eta0, alpha0=self.alpha0,
            normalize_objective=self.normalize_objective,
        )

    def fit(self, rho, y=None, x0=None):
        """Design gains from no-control voltage samples.

        ``rho`` has shape ``(n_samples, n)`` for a single interval or
        ``(b, n_samples, n)`` for ``b`` forecast intervals.
        """
        model = self._model()
        problem = DesignProblem(model, rho, self.design_spec())
        if x0 is None:
            x0, trace = initial_point(problem, return_trace=True)
            self.initial_trace_ = trace
        sol = ogd_sca(problem, x0=x0)
        self.model_ = model
        self.problem_ = problem
        self.solution_ = sol
        self.gains_ = sol.gains
        self.eta_ = sol.gains.eta
        self.alpha_ = sol.gains.alpha
        self.x_ = sol.x
        self.n_iter_ = sol.n_iter
        self.n_features_in_ = model.size
        return self

    def predict(self, rho):
        """Equilibrium reactive set-points ``q*`` for each row of ``rho``."""
        check_is_fitted(self, "gains_")
        rho = _check_samples(rho, self.n_features_in_)
        q, _ = equilibrium(self.gains_, self.model_.X, rho.reshape(-1, rho.shape[-1]).T)
        return q.T.reshape(rho.shape)

    def transform(self, rho):
        """Equilibrium voltages ``X q* + rho`` for each row of ``rho``."""
        q = self.predict(rho)
        return q @ self.model_.X.T + _check_samples(rho, self.n_features_in_)

    def score(self, rho, y=None):
        """Fraction of rows whose equilibrium voltages all stay within limits."""
        v = self.transform(rho)
        ok = np.all((v >= np.asarray(self.v_min)) & (v <= np.asarray(self.v_max)), axis=-1)
        return float(np.mean(ok))
