"""Linear-Gaussian state-space model, seeded simulation and the 2-D tracking model.

Noise is drawn from counter-based Philox streams keyed by ``(seed, role)``.
The process noise has its own stream and every node has its own
observation-noise stream, so adding or removing nodes never changes the
noise seen by the others.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import check_psd, psd_sqrt

PROCESS_STREAM = 0
OBSERVATION_STREAM = 1


@dataclass(frozen=True)
class StateSpaceModel:
    """``x[n+1] = A x[n] + v[n]`` with ``v ~ N(0, sigma_v)``."""

    A: np.ndarray
    sigma_v: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        sv = np.array(self.sigma_v, dtype=float)
        if sv.shape != A.shape:
            raise ValueError(f"sigma_v shape {sv.shape} does not match A shape {A.shape}")
        sv = check_psd(sv, "sigma_v")
        A.setflags(write=False)
        sv.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma_v", sv)

    @property
    def state_dim(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class NodeObservationModel:
    """Observation ``y = H x + w`` at one node, with weighting matrix ``R``.

    ``R`` only has to be PSD here; the gain formulas additionally need it
    invertible and check that themselves.
    """

    H: np.ndarray
    sigma_w: np.ndarray
    R: np.ndarray = None

    def __post_init__(self):
        H = np.atleast_2d(np.array(self.H, dtype=float))
        p = H.shape[0]
        sw = np.atleast_2d(np.array(self.sigma_w, dtype=float))
        if sw.shape != (p, p):
            raise ValueError(f"sigma_w must be {p}x{p}, got {sw.shape}")
        sw = check_psd(sw, "sigma_w")
        R = sw.copy() if self.R is None else np.atleast_2d(np.array(self.R, dtype=float))
        if R.shape != (p, p):
            raise ValueError(f"R must be {p}x{p}, got {R.shape}")
        R = check_psd(R, "R")
        for arr in (H, sw, R):
            arr.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "sigma_w", sw)
        object.__setattr__(self, "R", R)

    @property
    def obs_dim(self):
        return self.H.shape[0]

    @property
    def state_dim(self):
        return self.H.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Simulated states, per-node observations and the noises that produced them.

    ``states`` has shape ``(T, d)``; ``process_noises`` ``(T - 1, d)``;
    ``observations[l]`` and ``observation_noises[l]`` have shape ``(T, p_l)``.
    """

    states: np.ndarray
    observations: list
    process_noises: np.ndarray
    observation_noises: list = field(repr=False)

    @property
    def steps(self):
        return self.states.shape[0]

    @property
    def node_count(self):
        return len(self.observations)


def noise_stream(seed, *key):
    """Deterministic Philox generator for substream ``key`` of ``seed``.

    ``seed`` may be an int or a ``numpy.random.SeedSequence``; in the latter
    case ``key`` extends its spawn key.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def sample_gaussian(cov, rng, size=None):
    """Zero-mean Gaussian draw(s) with covariance ``cov``.

    Uses the symmetric PSD square root, so singular covariances are fine.
    ``size`` prepends leading sample dimensions.
    """
    cov = check_psd(np.atleast_2d(cov), "cov")
    d = cov.shape[0]
    shape = (d,) if size is None else tuple(np.atleast_1d(size)) + (d,)
    z = rng.standard_normal(shape)
    return z @ psd_sqrt(cov).T


def simulate_trajectory(model, obs_models, steps, seed, x1=None):
    """Simulate ``steps`` states of ``model`` and the observations of every node."""
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    d = model.state_dim
    for l, om in enumerate(obs_models):
        if om.state_dim != d:
            raise ValueError(
                f"node {l}: H has {om.state_dim} columns but the model has state_dim {d}"
            )
    x1 = np.zeros(d) if x1 is None else np.array(x1, dtype=float)
    if x1.shape != (d,):
        raise ValueError(f"x1 must have shape ({d},), got {x1.shape}")

    v = sample_gaussian(model.sigma_v, noise_stream(seed, PROCESS_STREAM), steps - 1)
    states = np.empty((steps, d))
    states[0] = x1
    for n in range(steps - 1):
        states[n + 1] = model.A @ states[n] + v[n]

    observations, obs_noises = [], []
    for l, om in enumerate(obs_models):
        w = sample_gaussian(om.sigma_w, noise_stream(seed, OBSERVATION_STREAM, l), steps)
        observations.append(states @ om.H.T + w)
        obs_noises.append(w)
    return Trajectory(states, observations, v, obs_noises)


def make_tracking_model(dt=0.04, q=0.01, r=0.16):
    """Constant-velocity 2-D target model with horizontal and vertical position sensors.

    State is ``(x, y, vx, vy)``. The white acceleration input of intensity
    ``q`` enters through ``B``; it is folded into a rank-2 process-noise
    covariance ``B (q I) B^T``.

    Returns
    -------
    model : StateSpaceModel
    horizontal, vertical : NodeObservationModel
        Position sensors on the x and y axes, with ``sigma_w = R = [[r]]``.
    """
    for name, val in (("dt", dt), ("q", q), ("r", r)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    A = np.array(
        [[1.0, 0.0, dt, 0.0], [0.0, 1.0, 0.0, dt], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
    )
    B = np.array([[dt * dt / 2, 0.0], [0.0, dt * dt / 2], [dt, 0.0], [0.0, dt]])
    sigma_v = B @ (q * np.eye(2)) @ B.T
    horizontal = NodeObservationModel(H=[[1.0, 0.0, 0.0, 0.0]], sigma_w=[[r]], R=[[r]])
    vertical = NodeObservationModel(H=[[0.0, 1.0, 0.0, 0.0]], sigma_w=[[r]], R=[[r]])
    return StateSpaceModel(A, sigma_v), horizontal, vertical
