"""Linear voltage sensitivity ``v ~ X q + rho`` and its spectral data."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import NotPositiveDefinite, NumericalError, ParseError, TopologyError

__all__ = [
    "SensitivityModel",
    "build_x_lindistflow",
    "path_incidence",
    "eig_decompose",
    "reduce_to_der_nodes",
    "load_x_matrix",
    "save_x_matrix",
]

SYM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SensitivityModel:
    """Sensitivity matrix with cached eigen-decomposition ``X = P diag(eigvals) P_inv``.

    ``nodes`` lists the 1-based network node of each row (``None`` when the
    matrix is not tied to a single-phase node set, e.g. multi-phase input).
    """

    X: np.ndarray
    eigvals: np.ndarray = field(init=False)
    P: np.ndarray = field(init=False, repr=False)
    P_inv: np.ndarray = field(init=False, repr=False)
    symmetric: bool = field(init=False)
    norm2: float = field(init=False)
    nodes: np.ndarray = None
    reduced: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        check_positive_definite(X)
        symmetric = bool(np.max(np.abs(X - X.T), initial=0.0) <= SYM_TOL * max(1.0, np.abs(X).max()))
        lam, P, P_inv = eig_decompose(X, symmetric=symmetric)
        object.__setattr__(self, "symmetric", symmetric)
        object.__setattr__(self, "eigvals", lam)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "P_inv", P_inv)
        object.__setattr__(self, "norm2", float(np.sqrt(np.linalg.eigvalsh(X.T @ X).max())))

    @property
    def size(self):
        return self.X.shape[0]

    @property
    def lambda_min(self):
        return float(np.min(self.eigvals.real))

    @property
    def lambda_max(self):
        return float(np.max(self.eigvals.real))


def check_positive_definite(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise NotPositiveDefinite(f"sensitivity matrix must be square, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NotPositiveDefinite("sensitivity matrix has non-finite entries")
    sym_min = np.linalg.eigvalsh(0.5 * (X + X.T)).min()
    if sym_min <= 0:
        raise NotPositiveDefinite(
            f"sensitivity matrix is not positive definite (min eigenvalue of "
            f"symmetric part {sym_min:.3e}); the gain design method does not apply"
        )


def path_incidence(net):
    """``B[i, k] = 1`` when line ``k`` lies on the slack-to-node ``i+1`` path."""
    B = np.zeros((net.n_nodes, len(net.lines)))
    for nd in range(1, net.n_nodes + 1):
        B[nd - 1, net.path_to_root(nd)] = 1.0
    return B


def build_x_lindistflow(net):
    """Common-path reactance matrix ``X[i, j] = sum of x over shared lines``."""
    if len(net.lines) != net.n_nodes:
        raise TopologyError("LinDistFlow sensitivity requires a radial network")
    B = path_incidence(net)
    X = (B * net.line_x) @ B.T
    return SensitivityModel(X, nodes=np.arange(1, net.n_nodes + 1))


def eig_decompose(X, symmetric=None, rtol=1e-10):
    """Return ``(eigvals, P, P_inv)`` with ``X = P diag(eigvals) P_inv``.

    Symmetric input uses an orthogonal decomposition (``P_inv = P.T``);
    otherwise eigenvalues may be complex.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise NumericalError("non-finite matrix")
    if symmetric is None:
        symmetric = bool(np.allclose(X, X.T, rtol=0, atol=SYM_TOL))
    if symmetric:
        lam, P = np.linalg.eigh(0.5 * (X + X.T))
        P_inv = P.T
    else:
        lam, P = np.linalg.eig(X)
        P_inv = np.linalg.inv(P)
        if np.all(np.abs(lam.imag) <= 1e-14 * np.abs(lam).max()):
            lam, P, P_inv = lam.real, P.real, P_inv.real
    recon = (P * lam) @ P_inv
    err = np.max(np.abs(recon - X))
    if err > rtol * max(1.0, np.max(np.abs(X))):
        raise NumericalError(f"eigen-decomposition reconstruction error {err:.3e}")
    return lam, P, P_inv


def reduce_to_der_nodes(model, fleet):
    """Principal submatrix of ``X`` over the nodes hosting a DER."""
    if not fleet.one_per_node:
        raise TopologyError("aggregate co-located DERs before reducing X")
    if model.nodes is None:
        raise TopologyError("sensitivity model is not indexed by network nodes")
    pos = {int(n): k for k, n in enumerate(model.nodes)}
    idx = np.array([pos[int(n)] for n in fleet.nodes])
    if len(idx) == model.size and np.array_equal(idx, np.arange(model.size)):
        return model
    return SensitivityModel(model.X[np.ix_(idx, idx)], nodes=model.nodes[idx], reduced=True)


def load_x_matrix(path):
    path = Path(path)
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if X.shape[0] != X.shape[1]:
        raise ParseError(f"{path}: matrix must be square, got {X.shape}")
    return SensitivityModel(X)


def save_x_matrix(model, path):
    with open(path, "w") as fh:
        for row in model.X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
