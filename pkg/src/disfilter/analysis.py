"""Network-wide error dynamics and stability certificates.

Stacking every node's estimation error ``eps_l = x - x_hat_l`` gives

    E[n+1] = Cc (F E[n] + P (1 kron v[n]) - G W[n+1])

with ``Cc = C kron I``, ``F = diag((I - G_l H_l) A)``, ``P = diag(I - G_l H_l)``
and ``G = diag(G_l)``. ``W[n+1]`` stacks the observation noises of the
measurements used to produce the new estimate.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ._linalg import asymmetry, psd_sqrt, spectral_radius, symmetrize
from .filters import EIG_CAP, _weights, observation_information

UNIT_CIRCLE_TOL = 1e-9
RANK_TOL = 1e-8


def _block_diag(blocks):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


@dataclass(frozen=True)
class StackedErrorSystem:
    C_cal: np.ndarray
    F_cal: np.ndarray
    P_cal: np.ndarray
    G_cal: np.ndarray
    node_count: int
    state_dim: int

    @property
    def CF(self):
        return self.C_cal @ self.F_cal


def stack_errors(per_node_errors):
    errs = [np.asarray(e, dtype=float) for e in per_node_errors]
    dims = {e.shape for e in errs}
    if len(dims) != 1 or errs[0].ndim != 1:
        raise ValueError(f"per-node errors must be equal-length vectors, got shapes {sorted(dims)}")
    return np.concatenate(errs)


def unstack_errors(E, node_count):
    E = np.asarray(E, dtype=float)
    if E.shape[-1] % node_count:
        raise ValueError(f"length {E.shape[-1]} is not a multiple of {node_count}")
    return E.reshape(E.shape[:-1] + (node_count, E.shape[-1] // node_count))


def build_stacked_system(C, gains, obs_models, model):
    Cw = _weights(C)
    N, d = Cw.shape[0], model.state_dim
    if len(gains) != N or len(obs_models) != N:
        raise ValueError(f"expected {N} gains and observation models")
    eye = np.eye(d)
    P_blocks = []
    for l, (G, om) in enumerate(zip(gains, obs_models)):
        if G.shape != (d, om.obs_dim) or om.state_dim != d:
            raise ValueError(f"node {l}: gain {G.shape} does not fit H {om.H.shape}")
        P_blocks.append(eye - G @ om.H)
    P_cal = _block_diag(P_blocks)
    F_cal = _block_diag([Pl @ model.A for Pl in P_blocks])
    G_cal = _block_diag([np.asarray(G, dtype=float) for G in gains])
    return StackedErrorSystem(np.kron(Cw, eye), F_cal, P_cal, G_cal, N, d)


def error_recursion_step(sys, E_n, v_n, W):
    """Evaluate the stacked error recursion for one step."""
    E_n = np.asarray(E_n, dtype=float)
    v_n = np.asarray(v_n, dtype=float)
    W = np.asarray(W, dtype=float)
    Nd = sys.node_count * sys.state_dim
    if E_n.shape != (Nd,) or v_n.shape != (sys.state_dim,) or W.shape != (sys.G_cal.shape[1],):
        raise ValueError(f"dimension mismatch: E {E_n.shape}, v {v_n.shape}, W {W.shape}")
    drive = sys.F_cal @ E_n + sys.P_cal @ np.tile(v_n, sys.node_count) - sys.G_cal @ W
    return sys.C_cal @ drive


def _unstable_eigenvalues(A, unit_tol):
    lam = np.linalg.eigvals(A)
    return lam[np.abs(lam) >= 1.0 - unit_tol]


def _full_rank(M, tol):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return False
    return s[-1] > tol * s[0]


def pbh_detectability(A, H_col, tol=RANK_TOL, unit_tol=UNIT_CIRCLE_TOL):
    """PBH test: ``[lambda I - A; H]`` has full column rank at every ``|lambda| >= 1``."""
    A = np.asarray(A, dtype=float)
    H = np.atleast_2d(np.asarray(H_col, dtype=float))
    n = A.shape[0]
    if H.size == 0:
        H = np.zeros((0, n))
    return all(
        _full_rank(np.vstack([lam * np.eye(n) - A, H]), tol) for lam in _unstable_eigenvalues(A, unit_tol)
    )


def pbh_stabilizability(A, sigma_v_sqrt, tol=RANK_TOL, unit_tol=UNIT_CIRCLE_TOL):
    """PBH test: ``[lambda I - A, B]`` has full row rank at every ``|lambda| >= 1``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(sigma_v_sqrt, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    return all(
        _full_rank(np.hstack([lam * np.eye(n) - A, B]).conj().T, tol)
        for lam in _unstable_eigenvalues(A, unit_tol)
    )


def contraction_certificate(sys, k_max):
    """Spectral radius of ``Cc F`` and the smallest ``k <= k_max`` with ``||(Cc F)^k||_2 < 1``.

    Returns ``(rho, k)`` with ``k = None`` if no such power was found.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    T = sys.CF
    rho = spectral_radius(T)
    if rho >= 1.0:
        # ||T^k|| >= rho^k >= 1 for every k
        return rho, None
    power = T.copy()
    for k in range(1, int(k_max) + 1):
        if np.linalg.norm(power, 2) < 1.0:
            return rho, k
        power = T @ power
    return rho, None


def bias_propagation(sys, E1_mean, n):
    """``(Cc F)^n E1`` by repeated multiplication."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    E = np.asarray(E1_mean, dtype=float).copy()
    T = sys.CF
    for _ in range(int(n)):
        E = T @ E
    return E


def centralized_closed_loop_radius(M, model, obs_models):
    """``rho((I - M sum_l H_l^T R_l^{-1} H_l) A)`` for a centralized Riccati matrix ``M``."""
    info = observation_information(obs_models).sum(axis=0)
    return spectral_radius((np.eye(model.state_dim) - M @ info) @ model.A)


def eigen_range_report(M_sets, information=False):
    """Per-step ``(min, max)`` eigenvalue over all nodes.

    ``M_sets`` has shape ``(T, N, d, d)`` (or ``(N, d, d)`` for one step).
    With ``information=True`` the matrices are information matrices and the
    reported covariance eigenvalues are their reciprocals, capped at 1e12.
    """
    M = np.asarray(M_sets, dtype=float)
    if M.ndim == 3:
        M = M[None]
    if asymmetry(M) > 1e-8 * max(1.0, float(np.abs(M).max(initial=0.0))):
        raise ValueError(f"input is not symmetric (max asymmetry {asymmetry(M):.3e})")
    lam = np.linalg.eigvalsh(symmetrize(M)).reshape(M.shape[0], -1)
    if information:
        with np.errstate(divide="ignore"):
            lam = np.where(lam > 1.0 / EIG_CAP, 1.0 / lam, EIG_CAP)
    else:
        lam = np.minimum(lam, EIG_CAP)
    return np.stack([lam.min(axis=1), lam.max(axis=1)], axis=1)


@dataclass
class StabilityCertificate:
    detectable: bool
    stabilizable: bool
    rho_CF: float
    contraction_exponent: int | None
    centralized_rho: float
    primitivity_exponent: int | None = None
    riccati_iterations: int | None = None
    riccati_converged: bool | None = True

    @property
    def stable(self):
        return self.rho_CF < 1.0

    def to_text(self):
        """``key: value`` lines."""
        lines = []
        for key, val in asdict(self).items():
            if isinstance(val, bool):
                val = str(val).lower()
            elif val is None:
                val = "none"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key}: {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        out = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, _, val = line.partition(":")
            key, val = key.strip(), val.strip()
            if key not in cls.__dataclass_fields__:
                continue
            if val in ("true", "false"):
                out[key] = val == "true"
            elif val == "none":
                out[key] = None
            elif key in ("rho_CF", "centralized_rho"):
                out[key] = float(val)
            else:
                out[key] = int(val)
        return cls(**out)


def stabilizability_factor(model):
    """Symmetric square root of ``sigma_v`` (exists for singular ``sigma_v`` too)."""
    return psd_sqrt(model.sigma_v)
