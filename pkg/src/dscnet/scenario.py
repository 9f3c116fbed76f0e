"""Reproducible experimental instances: geometric networks, Gaussian models.

Node positions are drawn i.i.d. uniform on the unit square; nodes within the
inner radius get the high-capacity tier, nodes within the outer radius the
low tier, and every edge points from smaller to larger x-coordinate (ties
broken by node id), which guarantees acyclicity.  Source correlation decays
exponentially with distance.  Everything is a pure function of the seed and
parameters.
"""

import math

import numpy as np

from . import regions
from .netmodel import Network
from .regions import GaussianSourceModel

INNER_RADIUS = 0.3 / math.sqrt(2.0)
OUTER_RADIUS = 0.3
SW_CAPS = (40.0, 20.0)
CEO_CAPS = (22.0, 11.0)


class ScenarioError(ValueError):
    """Inconsistent generation parameters."""


def generate_geometric_network(n_nodes, n_sources, n_terminals, seed,
                               radii=(INNER_RADIUS, OUTER_RADIUS),
                               caps=SW_CAPS, cost=1.0, roles="sorted"):
    """Random geometric DAG with tiered capacities and uniform edge cost.

    ``roles="sorted"`` declares the leftmost nodes sources and the rightmost
    terminals (deterministic given the seed); ``roles="random"`` samples the
    roles uniformly instead.
    """
    if n_sources + n_terminals > n_nodes:
        raise ScenarioError("more roles than nodes")
    if n_sources < 1 or n_terminals < 1:
        raise ScenarioError("need at least one source and one terminal")
    if not radii[0] <= radii[1]:
        raise ScenarioError("inner radius exceeds outer radius")
    rng = np.random.default_rng(seed)
    pts = rng.random((n_nodes, 2))
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            d = float(np.hypot(*(pts[i] - pts[j])))
            if d <= radii[0]:
                cap = caps[0]
            elif d <= radii[1]:
                cap = caps[1]
            else:
                continue
            # direction: left to right, ties by node id
            if (pts[i, 0], i) <= (pts[j, 0], j):
                edges.append((i, j, cap, cost))
            else:
                edges.append((j, i, cap, cost))
    if roles == "sorted":
        by_x = sorted(range(n_nodes), key=lambda v: (pts[v, 0], v))
        sources = by_x[:n_sources]
        terminals = by_x[-n_terminals:]
    elif roles == "random":
        picks = rng.choice(n_nodes, size=n_sources + n_terminals,
                           replace=False)
        sources = [int(v) for v in picks[:n_sources]]
        terminals = [int(v) for v in picks[n_sources:]]
    else:
        raise ScenarioError(f"unknown role policy {roles!r}")
    coords = {i: (float(pts[i, 0]), float(pts[i, 1]))
              for i in range(n_nodes)}
    return Network(list(range(n_nodes)), edges, sources, terminals,
                   coords=coords)


def gaussian_covariance(coords, sigma2, c, beta):
    """Distance-decay covariance: sigma2 on the diagonal, exponential decay
    off it.  Adds a one-shot 1e-9 diagonal jitter if coincident points make
    the matrix numerically singular; errors if that is not enough.
    """
    if sigma2 <= 0 or c <= 0 or beta <= 0:
        raise ScenarioError("correlation parameters must be positive")
    pts = np.asarray(coords, dtype=float)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    cov = sigma2 * np.exp(-c * d ** beta)
    np.fill_diagonal(cov, sigma2)
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        jittered = cov + 1e-9 * np.eye(len(pts))
        try:
            np.linalg.cholesky(jittered)
        except np.linalg.LinAlgError:
            raise ScenarioError(
                "covariance irreparably non-positive-definite "
                "(coincident source nodes?)") from None
        return jittered


def source_model(net, sigma2, c, beta, delta):
    """Gaussian source model over the network's source coordinates."""
    if net.coords is None:
        raise ScenarioError("network has no coordinates")
    coords = [net.coords[v] for v in net.sources]
    return GaussianSourceModel(gaussian_covariance(coords, sigma2, c, beta),
                               delta)


def model_entropies(model):
    """(joint entropy, per-source marginal entropies), all in nats."""
    n = model.n
    joint = regions.sw_conditional_entropy(model, (1 << n) - 1)
    diag = np.diag(model.covariance)
    marginals = 0.5 * np.log(2.0 * math.pi * math.e * diag) \
        - math.log(model.delta)
    return float(joint), marginals


def find_feasible_instance(n_nodes, n_sources, n_terminals, start_seed,
                           sigma2=1.0, c=1.0, beta=1.0, delta=0.01,
                           caps=SW_CAPS, attempts=100, roles="sorted"):
    """Scan seeds from start_seed until the generated instance is feasible.

    Returns (network, model, seed).  Raises ScenarioError when no feasible
    instance shows up within ``attempts`` seeds.
    """
    from . import netmodel

    for seed in range(start_seed, start_seed + attempts):
        net = generate_geometric_network(
            n_nodes, n_sources, n_terminals, seed, caps=caps, roles=roles)
        try:
            model = source_model(net, sigma2, c, beta, delta)
        except ScenarioError:
            continue
        joint, marginals = model_entropies(model)
        if np.any(marginals <= 0):
            continue
        rank = regions.SwEntropyRank(model)
        if netmodel.check_feasibility(net, rank, marginals).feasible:
            return net, model, seed
    raise ScenarioError(
        f"no feasible instance within {attempts} seeds of {start_seed}")
