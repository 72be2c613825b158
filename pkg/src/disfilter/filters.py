"""Centralized and diffusion Kalman filters and their gain schedules.

Three schedules produce the per-node gains ``G_l = M_l H_l^T R_l^{-1}``:

* ``central``  -- the centralized Riccati recursion over all observations;
* ``modern``   -- the distributed Riccati recursion, where every node fuses
  its neighbours' information matrices ``S_i``;
* ``classical`` -- each node runs a Riccati recursion on its own
  observations only; fusion touches the estimates, not the matrices.

Matrix stacks are laid out node-major: ``M`` has shape ``(N, d, d)``.
Estimates may carry leading batch dimensions, ``x_hat`` shape ``(..., N, d)``,
which is how Monte-Carlo runs share one gain sequence.
"""

import numpy as np

from ._linalg import NumericalError, min_eig, psd_factor, spd_inv, symmetrize

SCHEDULES = ("central", "modern", "classical")
EIG_CAP = 1e12


def _weights(C):
    return np.asarray(getattr(C, "C", C), dtype=float)


def _r_inv(R, node=None):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.size and np.linalg.matrix_rank(R) < R.shape[0]:
        where = "" if node is None else f" at node {node}"
        raise NumericalError(f"weighting matrix R is singular{where}")
    return np.linalg.inv(R) if R.size else R


def _r_blocks(obs_models, R_blocks):
    if R_blocks is None:
        return [om.R for om in obs_models]
    if len(R_blocks) != len(obs_models):
        raise ValueError("need one R block per node")
    return list(R_blocks)


def observation_information(obs_models, R_blocks=None):
    """Stack of ``H_l^T R_l^{-1} H_l``, shape ``(N, d, d)``."""
    Rs = _r_blocks(obs_models, R_blocks)
    return np.array(
        [symmetrize(om.H.T @ _r_inv(R, l) @ om.H) for l, (om, R) in enumerate(zip(obs_models, Rs))]
    )


def stack_observation_matrices(obs_models):
    return np.vstack([om.H for om in obs_models])


def predict_covariance(M, model):
    """``A M A^T + sigma_v`` for a matrix or a stack of matrices."""
    return symmetrize(model.A @ M @ model.A.T + model.sigma_v)


def _inv_nodes(X, what, step=None):
    """Batched SPD inverse that names the first node whose matrix is not PD."""
    lam = min_eig(X)
    bad = np.flatnonzero(lam <= 0)
    if bad.size:
        l = int(bad[0])
        at = "" if step is None else f" at step {step}"
        raise NumericalError(
            f"{what} lost positive definiteness at node {l}{at}: smallest eigenvalue {lam[l]:.6e}"
        )
    return spd_inv(X)


def _require_pd(X, what):
    lam = min_eig(X)
    if lam <= 0:
        raise NumericalError(f"{what} is not positive definite: smallest eigenvalue {lam:.6e}")
    return X


# -- centralized -----------------------------------------------------------------


def centralized_riccati_step(M, model, obs_models, R_blocks=None):
    """One step of ``M' = ((A M A^T + sigma_v)^{-1} + sum_l H_l^T R_l^{-1} H_l)^{-1}``."""
    info = observation_information(obs_models, R_blocks).sum(axis=0)
    P = _require_pd(predict_covariance(np.asarray(M, dtype=float), model), "A M A^T + sigma_v")
    return spd_inv(spd_inv(P) + info)


def centralized_gain(M, obs_models, R_blocks=None):
    """``G = M H_col^T R^{-1}`` assembled node by node, shape ``(d, sum p_l)``."""
    Rs = _r_blocks(obs_models, R_blocks)
    blocks = [M @ om.H.T @ _r_inv(R, l) for l, (om, R) in enumerate(zip(obs_models, Rs))]
    return np.hstack(blocks)


def centralized_step(x_hat, y_col, G, H_col, model):
    """``x' = (I - G H_col) A x + G y_col``; ``x_hat`` may be batched ``(..., d)``."""
    x_hat = np.asarray(x_hat, dtype=float)
    y_col = np.asarray(y_col, dtype=float)
    d = model.state_dim
    if G.shape != (d, H_col.shape[0]) or H_col.shape[1] != d or y_col.shape[-1] != H_col.shape[0]:
        raise ValueError(
            f"dimension mismatch: G {G.shape}, H_col {H_col.shape}, y_col {y_col.shape}"
        )
    K = (np.eye(d) - G @ H_col) @ model.A
    return x_hat @ K.T + y_col @ G.T


# -- distributed -----------------------------------------------------------------


def distributed_gain(M_l, obs_model, node=None):
    """``G_l = M_l H_l^T R_l^{-1}``."""
    return M_l @ obs_model.H.T @ _r_inv(obs_model.R, node)


def distributed_gains(M, obs_models):
    return [distributed_gain(M[l], om, l) for l, om in enumerate(obs_models)]


def distributed_riccati_step(M, C, model, obs_models, info=None, step=None):
    """Distributed Riccati recursion.

    Every node forms ``S_l = (A M_l A^T + sigma_v)^{-1} + H_l^T R_l^{-1} H_l``
    from its own data, then fuses ``M_l^{-1} = sum_i c_li S_i`` over its
    neighbourhood.

    Returns
    -------
    M_new, S_new : ndarray, shape (N, d, d)
    """
    Cw = _weights(C)
    if info is None:
        info = observation_information(obs_models)
    M = np.asarray(M, dtype=float)
    P = predict_covariance(M, model)
    S = _inv_nodes(P, "predicted covariance", step) + info
    fused = symmetrize(np.einsum("li,ijk->ljk", Cw, S))
    return _inv_nodes(fused, "fused information matrix", step), S


def diffusion_step(x_hat, observations, gains, obs_models, C, model):
    """Adapt-then-combine diffusion update.

    ``observations[l]`` is node ``l``'s measurement of the state being
    estimated, shape ``(..., p_l)``. The adapt phase reads only pre-step
    estimates and the combine phase reads only adapt outputs.

    Returns
    -------
    x_new, phi : ndarray, shape (..., N, d)
    """
    x_hat = np.asarray(x_hat, dtype=float)
    Cw = _weights(C)
    N, d = x_hat.shape[-2:]
    if len(observations) != N or len(gains) != N or len(obs_models) != N or Cw.shape != (N, N):
        raise ValueError("observations, gains, obs_models and C must all cover every node")
    if d != model.state_dim:
        raise ValueError(f"estimate dimension {d} != state_dim {model.state_dim}")
    A, eye = model.A, np.eye(d)

    phi = np.empty_like(x_hat)
    for l in range(N):
        G, H = gains[l], obs_models[l].H
        y = np.asarray(observations[l], dtype=float)
        if G.shape != (d, H.shape[0]) or y.shape[-1] != H.shape[0]:
            raise ValueError(f"node {l}: gain {G.shape}, H {H.shape}, observation {y.shape} mismatch")
        K = (eye - G @ H) @ A
        phi[..., l, :] = x_hat[..., l, :] @ K.T + y @ G.T

    x_new = np.einsum("li,...id->...ld", Cw, phi)
    return x_new, phi


def classical_local_riccati_step(Y, model, info):
    """Local-only Riccati recursion kept in information form.

    ``Y`` is the information matrix ``M^{-1}`` (single or a node stack) and
    ``info`` the matching ``H^T R^{-1} H``. Covariance directions that no
    local sensor sees make ``M`` grow without bound; their information
    decays towards zero instead, which stays representable.

    For invertible ``A`` the prediction uses Woodbury with a thin factor of
    ``sigma_v``, never forming ``M``.
    """
    Y = symmetrize(np.asarray(Y, dtype=float))
    A = model.A
    if np.linalg.cond(A) < 1e12:
        Ainv = np.linalg.inv(A)
        Y0 = symmetrize(Ainv.T @ Y @ Ainv)
        F = psd_factor(model.sigma_v)
        if F.shape[1]:
            YF = Y0 @ F
            inner = np.eye(F.shape[1]) + F.T @ YF
            Ypred = Y0 - YF @ np.linalg.solve(inner, np.swapaxes(YF, -1, -2))
        else:
            Ypred = Y0
    else:
        Ypred = spd_inv(predict_covariance(spd_inv(Y), model))
    Ynew = symmetrize(Ypred + info)
    lam = min_eig(Ynew)
    if np.any(lam < -1e-8 * np.maximum(1.0, np.abs(Ynew).max(axis=(-1, -2)))):
        raise NumericalError(f"local information matrix became indefinite (min eigenvalue {np.min(lam):.3e})")
    return Ynew


# -- P/Z rearrangement -----------------------------------------------------------


def neighborhood_observation(C, l, obs_models):
    """Neighbourhood-stacked ``H_bar_l`` (blocks ``sqrt(c_li) H_i``) and ``R_bar_l``."""
    Cw = _weights(C)
    nb = np.flatnonzero(Cw[l])
    H_bar = np.vstack([np.sqrt(Cw[l, i]) * obs_models[i].H for i in nb])
    R_bar = _block_diag([obs_models[i].R for i in nb])
    return H_bar, R_bar


def _block_diag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        p = b.shape[0]
        out[k : k + p, k : k + p] = b
        k += p
    return out


def neighborhood_information(C, obs_models):
    """Stack of ``H_bar_l^T R_bar_l^{-1} H_bar_l``."""
    out = []
    for l in range(len(obs_models)):
        H_bar, R_bar = neighborhood_observation(C, l, obs_models)
        out.append(symmetrize(H_bar.T @ _r_inv(R_bar, l) @ H_bar))
    return np.array(out)


def pz_initial(M_prev, C, model):
    """``P_l = A M_l A^T + sigma_v`` and ``Z_l^{-1} = sum_i c_li P_i^{-1}``."""
    P = predict_covariance(np.asarray(M_prev, dtype=float), model)
    return P, spd_inv(np.einsum("li,ijk->ljk", _weights(C), spd_inv(P)))


def pz_form_step(P, Z, C, model, obs_models, hbar_info=None, step=None):
    """Rearranged distributed recursion on the pair ``(P_l, Z_l)``.

    ``P_l' = A (Z_l^{-1} + H_bar_l^T R_bar_l^{-1} H_bar_l)^{-1} A^T + sigma_v``
    followed by ``Z_l'^{-1} = sum_i c_li P_i'^{-1}``.
    """
    if hbar_info is None:
        hbar_info = neighborhood_information(C, obs_models)
    post = _inv_nodes(_inv_nodes(Z, "Z", step) + hbar_info, "posterior information", step)
    P_new = predict_covariance(post, model)
    Z_new = _inv_nodes(
        symmetrize(np.einsum("li,ijk->ljk", _weights(C), _inv_nodes(P_new, "P", step))), "Z", step
    )
    return P_new, Z_new


def m_from_pz(Z, C, obs_models, hbar_info=None):
    """Recover ``M_l`` from ``Z_l`` via ``M_l^{-1} = Z_l^{-1} + H_bar_l^T R_bar_l^{-1} H_bar_l``."""
    if hbar_info is None:
        hbar_info = neighborhood_information(C, obs_models)
    return spd_inv(spd_inv(Z) + hbar_info)


# -- fixed points ----------------------------------------------------------------


def converge_centralized_riccati(model, obs_models, M0=None, tol=1e-10, max_iter=100_000):
    """Iterate the centralized recursion until ``max |M' - M| < tol``.

    Returns ``(M, iterations, converged)``.
    """
    d = model.state_dim
    M = np.eye(d) if M0 is None else np.array(M0, dtype=float)
    for it in range(1, max_iter + 1):
        M_new = centralized_riccati_step(M, model, obs_models)
        delta = np.max(np.abs(M_new - M))
        M = M_new
        if delta < tol:
            return M, it, True
    return M, max_iter, False


def converge_distributed_riccati(model, obs_models, C, M0=None, tol=1e-10, max_iter=100_000):
    """Iterate the distributed recursion until ``max_l max |M_l' - M_l| < tol``.

    Returns ``(M, S, iterations, converged)``.
    """
    N, d = len(obs_models), model.state_dim
    M = np.tile(np.eye(d), (N, 1, 1)) if M0 is None else np.array(M0, dtype=float)
    info = observation_information(obs_models)
    S = None
    for it in range(1, max_iter + 1):
        M_new, S = distributed_riccati_step(M, C, model, obs_models, info=info, step=it)
        delta = np.max(np.abs(M_new - M))
        M = M_new
        if delta < tol:
            return M, S, it, True
    return M, S, max_iter, False


# -- driver ----------------------------------------------------------------------


class DiffusionKalmanFilter:
    """Runs one gain schedule together with the diffusion (or centralized) estimator.

    Each call to :meth:`step` consumes the observations of the next state:
    the Riccati matrices advance first, gains are refreshed from them, then
    the estimates are updated. Gains stop changing after
    ``freeze_gains_after`` steps when that is set.

    Parameters
    ----------
    model : StateSpaceModel
    obs_models : list of NodeObservationModel
    C : CombinationMatrix or ndarray
    schedule : {"central", "modern", "classical"}
    M0 : ndarray, optional
        Initial Riccati matrix, identity by default.
    x0 : ndarray, optional
        Initial estimate ``(d,)`` shared by every node, zero by default.
    batch : int, optional
        Number of independent estimate copies (Monte-Carlo runs).
    fixed_gains : list of ndarray, optional
        Use these per-node gains for every step instead of a schedule.
    """

    def __init__(
        self,
        model,
        obs_models,
        C,
        schedule="modern",
        M0=None,
        x0=None,
        batch=None,
        freeze_gains_after=None,
        fixed_gains=None,
    ):
        if schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {schedule!r}")
        self.model = model
        self.obs_models = list(obs_models)
        self.C = _weights(C)
        self.schedule = schedule
        self.freeze_gains_after = freeze_gains_after
        self.n = 0
        N, d = len(self.obs_models), model.state_dim
        self.node_count = N
        M0 = np.eye(d) if M0 is None else np.array(M0, dtype=float)
        x0 = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
        lead = () if batch is None else (int(batch),)
        self.x_hat = np.broadcast_to(x0, lead + (N, d)).copy()
        self.phi = self.x_hat.copy()
        self.info = observation_information(self.obs_models)
        self.H_col = stack_observation_matrices(self.obs_models)

        if schedule == "central":
            self.M = M0.copy()
            self.G = centralized_gain(self.M, self.obs_models)
        elif schedule == "modern":
            self.M = np.tile(M0, (N, 1, 1))
            self.S = None
        else:
            self.Y = np.tile(spd_inv(M0), (N, 1, 1))
        if schedule != "central":
            self.gains = self._gains()
        if fixed_gains is not None:
            if schedule == "central":
                raise ValueError("fixed_gains applies to the diffusion schedules only")
            self.gains = [np.asarray(G, dtype=float) for G in fixed_gains]
            self.freeze_gains_after = 0

    def _gains(self):
        if self.schedule == "classical":
            return [
                np.linalg.solve(self.Y[l], om.H.T @ _r_inv(om.R, l))
                for l, om in enumerate(self.obs_models)
            ]
        return distributed_gains(self.M, self.obs_models)

    @property
    def frozen(self):
        return self.freeze_gains_after is not None and self.n >= self.freeze_gains_after

    def advance_gains(self):
        """Advance the Riccati recursion one step and refresh the gains."""
        step = self.n + 1
        if self.schedule == "central":
            self.M = centralized_riccati_step(self.M, self.model, self.obs_models)
            self.G = centralized_gain(self.M, self.obs_models)
            return
        if self.schedule == "modern":
            self.M, self.S = distributed_riccati_step(
                self.M, self.C, self.model, self.obs_models, info=self.info, step=step
            )
        else:
            self.Y = classical_local_riccati_step(self.Y, self.model, self.info)
        self.gains = self._gains()

    def step(self, observations):
        """Consume per-node observations ``observations[l]`` of shape ``(..., p_l)``."""
        if not self.frozen:
            self.advance_gains()
        self.n += 1
        if self.schedule == "central":
            y_col = np.concatenate([np.asarray(y, dtype=float) for y in observations], axis=-1)
            x_c = centralized_step(self.x_hat[..., 0, :], y_col, self.G, self.H_col, self.model)
            self.x_hat = np.repeat(x_c[..., None, :], self.node_count, axis=-2)
            self.phi = self.x_hat
        else:
            self.x_hat, self.phi = diffusion_step(
                self.x_hat, observations, self.gains, self.obs_models, self.C, self.model
            )
        return self.x_hat

    def node_gains(self):
        """Per-node gains; the centralized gain's column blocks for ``central``."""
        if self.schedule != "central":
            return list(self.gains)
        out, k = [], 0
        for om in self.obs_models:
            out.append(self.G[:, k : k + om.obs_dim])
            k += om.obs_dim
        return out

    def eigen_range(self):
        """``(min, max)`` eigenvalue over the current Riccati matrices, capped at 1e12."""
        if self.schedule == "classical":
            lam = np.linalg.eigvalsh(self.Y)
            with np.errstate(divide="ignore"):
                cov = np.where(lam > 1.0 / EIG_CAP, 1.0 / lam, EIG_CAP)
            return float(cov.min()), float(cov.max())
        lam = np.linalg.eigvalsh(self.M)
        return float(lam.min()), float(min(lam.max(), EIG_CAP))
