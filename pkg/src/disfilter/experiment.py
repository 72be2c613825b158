"""Target-tracking experiments: scenario assembly, simulation runs and certificates."""

import configparser
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    StabilityCertificate,
    build_stacked_system,
    centralized_closed_loop_radius,
    contraction_certificate,
    pbh_detectability,
    pbh_stabilizability,
    stabilizability_factor,
)
from .filters import (
    SCHEDULES,
    DiffusionKalmanFilter,
    converge_centralized_riccati,
    converge_distributed_riccati,
    distributed_gains,
    stack_observation_matrices,
)
from .model import NodeObservationModel, make_tracking_model, simulate_trajectory
from .network import (
    generate_topology,
    is_primitive,
    metropolis_weights,
    pendant_nodes,
    read_edge_list,
    uniform_weights,
)

CSV_HEADER = "step,run,metric,node_or_agg,value"
CONTRACTION_BUDGET = 100_000


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dt: float = 0.04
    q: float = 0.01
    r: float = 0.16
    nodes: int = 20
    edges: int | None = None
    topology_seed: int | None = None
    topology_file: str | None = None
    weights: str = "uniform"
    vertical_observer: bool = True
    schedule: str = "modern"
    steps: int = 2000
    runs: int = 1
    seed: int = 0
    freeze_gains_after: int | None = None
    max_iter: int = 100_000
    output: str | None = None
    format: str = "csv"
    reproducible: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}")
        if self.weights not in ("uniform", "metropolis"):
            raise ConfigError("weights must be 'uniform' or 'metropolis'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        for name in ("dt", "q", "r"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    @property
    def edge_count(self):
        if self.edges is not None:
            return self.edges
        n = self.nodes
        core = n - 1
        return min(2 * n, core * (core - 1) // 2 + 1) if n > 2 else n - 1

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def load_config(path, **overrides):
    """Read an INI-style ``key = value`` file (optionally under ``[experiment]``)."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    section = parser["experiment"] if parser.has_section("experiment") else parser.defaults()
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"{path}: unknown key {key!r}")
        values[key] = _coerce(key, raw, ExperimentConfig.__dataclass_fields__[key].default)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def _coerce(key, raw, default):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "yes", "1")
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, int) or key in ("edges", "topology_seed", "freeze_gains_after"):
            return int(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


@dataclass
class Scenario:
    model: object
    obs_models: list
    network: object
    C: object
    vertical_node: int | None

    @property
    def node_count(self):
        return self.network.node_count


def build_scenario(config=None):
    """Model, network, weights and observers described by ``config``.

    All nodes observe the horizontal position except one vertical observer,
    placed on the (first) pendant node, or on a lowest-degree node when the
    graph has none. A single node observes both axes.
    """
    config = config or ExperimentConfig()
    model, horizontal, vertical = make_tracking_model(config.dt, config.q, config.r)
    if config.topology_file:
        net = read_edge_list(config.topology_file)
    else:
        tseed = config.seed if config.topology_seed is None else config.topology_seed
        net = generate_topology(config.nodes, config.edge_count, tseed)
    C = uniform_weights(net) if config.weights == "uniform" else metropolis_weights(net)

    N = net.node_count
    if N == 1:
        both = NodeObservationModel(
            H=np.vstack([horizontal.H, vertical.H]), sigma_w=config.r * np.eye(2), R=config.r * np.eye(2)
        )
        obs = [both] if config.vertical_observer else [horizontal]
        return Scenario(model, obs, net, C, 0 if config.vertical_observer else None)

    vnode = None
    if config.vertical_observer:
        leaves = pendant_nodes(net)
        vnode = leaves[0] if leaves else int(np.argmin(net.degrees()))
    obs = [vertical if l == vnode else horizontal for l in range(N)]
    return Scenario(model, obs, net, C, vnode)


def reference_scenario(seed=0):
    """The 20-node, 40-link tracking scenario with default parameters."""
    return build_scenario(ExperimentConfig(seed=seed))


def run_seed(seed, run):
    return np.random.SeedSequence(int(seed), spawn_key=(int(run),))


# -- certificates ----------------------------------------------------------------


def certificate_for_gains(scenario, gains, k_max=CONTRACTION_BUDGET, M_central=None):
    model, obs = scenario.model, scenario.obs_models
    sys = build_stacked_system(scenario.C, gains, obs, model)
    rho, k = contraction_certificate(sys, k_max)
    if M_central is None:
        M_central, _, _ = converge_centralized_riccati(model, obs)
    return StabilityCertificate(
        detectable=pbh_detectability(model.A, stack_observation_matrices(obs)),
        stabilizable=pbh_stabilizability(model.A, stabilizability_factor(model)),
        rho_CF=rho,
        contraction_exponent=k,
        centralized_rho=centralized_closed_loop_radius(M_central, model, obs),
        primitivity_exponent=is_primitive(scenario.C).exponent,
    )


def certify(config=None, scenario=None, tol=1e-10):
    """Converge the distributed Riccati recursion and certify the resulting gains.

    The contraction exponent is searched up to 10^5 powers. The certificate
    is inconclusive (``riccati_converged`` false) when the recursion does not
    meet ``tol`` within ``config.max_iter`` iterations.
    """
    config = config or ExperimentConfig()
    scenario = scenario or build_scenario(config)
    M, _, iters, converged = converge_distributed_riccati(
        scenario.model, scenario.obs_models, scenario.C, tol=tol, max_iter=config.max_iter
    )
    M_c, _, _ = converge_centralized_riccati(scenario.model, scenario.obs_models, max_iter=config.max_iter)
    cert = certificate_for_gains(scenario, distributed_gains(M, scenario.obs_models), M_central=M_c)
    cert.riccati_iterations = iters
    cert.riccati_converged = converged
    return cert


def is_inconclusive(cert):
    return not cert.riccati_converged or (cert.rho_CF < 1 and cert.contraction_exponent is None)


# -- simulation runs -------------------------------------------------------------


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    certificate: StabilityCertificate | None = None
    errors: np.ndarray | None = field(default=None, repr=False)
    eigen_ranges: np.ndarray | None = field(default=None, repr=False)

    def mean_squared_error(self):
        """Network-average squared error, shape ``(runs, steps)``."""
        return (self.errors**2).sum(axis=(-1, -2)) / self.errors.shape[-2]


def run_experiment(config=None, scenario=None, x1=None):
    """Simulate ``config.runs`` trajectories and filter them with ``config.schedule``.

    Runs share one gain sequence and are filtered as one batch. Step 1 is the
    initial estimate (zero) against ``x1``.
    """
    config = config or ExperimentConfig()
    scenario = scenario or build_scenario(config)
    model, obs = scenario.model, scenario.obs_models
    N, d, T, R = scenario.node_count, model.state_dim, config.steps, config.runs

    trajs = [simulate_trajectory(model, obs, T, run_seed(config.seed, r), x1=x1) for r in range(R)]
    states = np.stack([t.states for t in trajs])
    ys = [np.stack([t.observations[l] for t in trajs]) for l in range(N)]

    filt = DiffusionKalmanFilter(
        model, obs, scenario.C, config.schedule, batch=R, freeze_gains_after=config.freeze_gains_after
    )
    errors = np.empty((R, T, N, d))
    eig = np.empty((T, 2))
    errors[:, 0] = states[:, 0, None, :] - filt.x_hat
    eig[0] = filt.eigen_range()
    for n in range(1, T):
        filt.step([y[:, n] for y in ys])
        errors[:, n] = states[:, n, None, :] - filt.x_hat
        eig[n] = filt.eigen_range()

    report = ExperimentReport(config, errors=errors, eigen_ranges=eig)
    sq = (errors**2).sum(axis=-1)
    recs = report.records
    for n in range(T):
        step = n + 1
        recs.append((step, "all", "eig_min", "network", eig[n, 0]))
        recs.append((step, "all", "eig_max", "network", eig[n, 1]))
        for r in range(R):
            recs.append((step, r, "sq_error", "mean", sq[r, n].sum() / N))
            for l in range(N):
                recs.append((step, r, "sq_error", l, sq[r, n, l]))

    cert = certificate_for_gains(scenario, filt.node_gains())
    cert.riccati_iterations = filt.n
    cert.riccati_converged = None
    report.certificate = cert
    for key, val in dataclasses.asdict(cert).items():
        recs.append((T, "all", f"certificate.{key}", "network", val))
    return report


def monte_carlo_mean_error(scenario, gains, x1, steps, runs, seed, chunk=250):
    """Monte-Carlo mean and standard error of the stacked error under fixed gains.

    Every run starts from the known state ``x1`` with zero estimates.

    Returns
    -------
    mean, stderr : ndarray, shape (steps, N * d)
        Row ``n`` is the error after ``n`` filter steps.
    """
    model, obs = scenario.model, scenario.obs_models
    N, d = scenario.node_count, model.state_dim
    total = np.zeros((steps, N * d))
    total_sq = np.zeros((steps, N * d))
    for start in range(0, runs, chunk):
        idx = range(start, min(start + chunk, runs))
        trajs = [simulate_trajectory(model, obs, steps, run_seed(seed, r), x1=x1) for r in idx]
        states = np.stack([t.states for t in trajs])
        ys = [np.stack([t.observations[l] for t in trajs]) for l in range(N)]
        filt = DiffusionKalmanFilter(model, obs, scenario.C, batch=len(trajs), fixed_gains=gains)
        E = np.empty((len(trajs), steps, N * d))
        E[:, 0] = (states[:, 0, None, :] - filt.x_hat).reshape(len(trajs), -1)
        for n in range(1, steps):
            filt.step([y[:, n] for y in ys])
            E[:, n] = (states[:, n, None, :] - filt.x_hat).reshape(len(trajs), -1)
        total += E.sum(axis=0)
        total_sq += (E**2).sum(axis=0)
    mean = total / runs
    var = np.maximum(total_sq / runs - mean**2, 0.0) * runs / max(runs - 1, 1)
    return mean, np.sqrt(var / runs)


# -- report output ---------------------------------------------------------------


def _config_echo(config):
    return {k: v for k, v in dataclasses.asdict(config).items() if k not in ("output",)}


def _fmt(val):
    if isinstance(val, bool):
        return str(val).lower()
    if val is None:
        return "none"
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    return str(val)


def format_report(report, fmt="csv", reproducible=False):
    echo = _config_echo(report.config)
    if fmt == "json":
        doc = {
            "config": echo,
            "records": [
                {"step": s, "run": r, "metric": m, "node_or_agg": k, "value": _json_value(v)}
                for s, r, m, k, v in report.records
            ],
        }
        if not reproducible:
            doc["generated"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# {k}: {_fmt(v)}" for k, v in echo.items()]
    if not reproducible:
        lines.append(f"# generated: {time.strftime('%Y-%m-%dT%H:%M:%S%z')}")
    lines.append(CSV_HEADER)
    lines.extend(",".join(_fmt(x) for x in rec) for rec in report.records)
    return "\n".join(lines) + "\n"


def _json_value(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def format_certificate(cert, config, reproducible=False):
    lines = [f"# {k}: {_fmt(v)}" for k, v in _config_echo(config).items()]
    if not reproducible:
        lines.append(f"# generated: {time.strftime('%Y-%m-%dT%H:%M:%S%z')}")
    return "\n".join(lines) + "\n" + cert.to_text()


def write_text(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"output directory does not exist: {directory}")
    with open(path, "w") as fh:
        fh.write(text)
