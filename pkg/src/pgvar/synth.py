"""Synthetic graph processes with known coefficients, and a moving-mesh generator."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import models
from .errors import InstabilityError, InvalidParameterError
from .graph import Graph, complete_graph, edgeless_graph, make_product, normalize_shift, path_graph
from .signal import SignalSequence


@dataclass(frozen=True)
class GraphSpec:
    kind: str = "geometric"  # geometric | erdos_renyi | complete | path | edgeless
    n_nodes: int = 10
    connectivity: float = 0.4  # radius for geometric, edge probability for erdos_renyi
    seed: int = 0


@dataclass(frozen=True)
class SynthSpec:
    graph: GraphSpec = field(default_factory=GraphSpec)
    feature_graph: GraphSpec = field(default_factory=lambda: GraphSpec("complete", 3))
    family: str = "PGVAR"
    P: int = 2
    K: int = 2
    L: int = 0
    product: str = "cartesian"
    rho: float = 0.5
    noise_sigma: float = 0.1
    n_steps: int = 200
    burn_in: int = 100
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise InvalidParameterError("rho must lie in [0, 1)")
        if self.noise_sigma < 0 or self.n_steps < 1 or self.burn_in < 0:
            raise InvalidParameterError("need noise_sigma >= 0, n_steps >= 1, burn_in >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("graph", "feature_graph"):
            if key in d and isinstance(d[key], dict):
                d[key] = GraphSpec(**d[key])
        return cls(**d)


def random_graph(spec):
    """Symmetric random graph (unit weights) from a :class:`GraphSpec`."""
    n, rng = spec.n_nodes, np.random.default_rng(spec.seed)
    if spec.kind == "complete":
        return complete_graph(n)
    if spec.kind == "path":
        return path_graph(n)
    if spec.kind == "edgeless":
        return edgeless_graph(n)
    if spec.kind == "geometric":
        pts = rng.random((n, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        adj = d < spec.connectivity
    elif spec.kind == "erdos_renyi":
        adj = rng.random((n, n)) < spec.connectivity
        adj = np.triu(adj, 1)
        adj = adj | adj.T
    else:
        raise InvalidParameterError(f"unknown graph kind {spec.kind!r}")
    np.fill_diagonal(adj, False)
    # keep the graph connected enough to be useful: chain every node to the next
    chain = np.arange(n - 1)
    adj[chain, chain + 1] = adj[chain + 1, chain] = True
    r, c = np.nonzero(adj)
    return Graph.from_triplets(n, r, c, np.ones(r.size), symmetric=True)


def build_graphs(spec):
    """Node graph, feature graph and (for PGVAR) product operator of a spec."""
    g = random_graph(spec.graph)
    gf = random_graph(spec.feature_graph)
    if spec.normalize:
        g = normalize_shift(g) if g.n_edges else g
        gf = normalize_shift(gf) if gf.n_edges else gf
    op = make_product(g, gf, spec.product) if spec.family == "PGVAR" else None
    return g, gf, op


def _operator_bound(op):
    """Upper bound on the spectral norm of a product shift with unit-norm factors."""
    return sum(abs(s) for _, _, s in op.terms)


def gen_stable_coeffs(spec, graphs=None):
    """Random coefficients rescaled so the lag operators satisfy ``sum_p ||H_p|| <= rho``.

    Coefficients are uniform on ``[-1, 1]`` and then scaled so that
    ``sum |h| * c**k == rho`` where ``c`` bounds the norm of one shift. With
    unit-norm shifts ``c = 1`` and this is plain ``sum |h| == rho``; for a
    product shift ``c = max(1, sum |s_ij|)``.
    """
    rng = np.random.default_rng(spec.seed)
    g, gf, op = graphs if graphs is not None else build_graphs(spec)
    n, f = g.n_nodes, gf.n_nodes
    P, K, L = spec.P, spec.K, spec.L
    if spec.family == "GVAR":
        h = rng.uniform(-1, 1, (1, P, K + 1))
        weight = np.ones(h.shape)
    elif spec.family == "PGVAR":
        h = rng.uniform(-1, 1, (P, K + 1))
        c = max(1.0, _operator_bound(op))
        weight = np.broadcast_to(c ** np.arange(K + 1), h.shape)
    elif spec.family == "GPGVAR":
        h = rng.uniform(-1, 1, (P, K + 1, L + 1))
        weight = np.ones(h.shape)
    else:
        raise InvalidParameterError(f"synthetic family must be GVAR, PGVAR or GPGVAR, not {spec.family}")
    total = float(np.sum(np.abs(h) * weight))
    h = h * (spec.rho / total) if spec.rho > 0 else np.zeros(h.shape)
    if spec.family == "GVAR":
        return models.gvar_model(g, h, f)
    if spec.family == "PGVAR":
        return models.pgvar_model(op, h)
    return models.gpgvar_model(g, gf, h)


def simulate(m, n_steps, noise_sigma=0.0, burn_in=0, seed=0, initial=None):
    """Run ``x_t = -sum_p H_p x_{t-p} + e_t`` forward and return the last ``n_steps``.

    ``initial`` (``(P, NF)``, ``initial[0]`` the most recent) seeds the lag
    buffer; the default is all zeros. Innovations are i.i.d. Gaussian.
    """
    rng = np.random.default_rng(seed)
    total = burn_in + n_steps
    noise = rng.normal(0.0, noise_sigma, (total, m.dim)) if noise_sigma > 0 else np.zeros((total, m.dim))
    hist = np.zeros((m.P, m.dim))
    if initial is not None:
        hist[:] = np.asarray(initial, dtype=float).reshape(m.P, m.dim)
    out = np.empty((total, m.dim))
    for t in range(total):
        x = models.predict_one_step(m, hist) + noise[t]
        if not np.all(np.isfinite(x)):
            raise InstabilityError(f"state became non-finite at step {t}", step=t)
        out[t] = x
        hist = np.roll(hist, 1, axis=0)
        hist[0] = x
    return SignalSequence(out[burn_in:], m.n_nodes, m.n_features)


def gen_moving_mesh(n_nodes, n_steps, seed=0, *, deformation=3.0, coupling=0.3,
                    persistence=0.35, drive_sigma=0.3, n_modes=4, translation=0.5,
                    noise_sigma=0.0):
    """Point cloud moving by translation plus smooth coupled deformation.

    The cloud (an ellipsoidal body) translates along a slow gait-like path.
    On top of that ``n_modes`` smooth spatial modes deform it; the modal
    amplitude of coordinate ``f`` follows

        a_t[f] = persistence * a_{t-1}[f] + coupling * sum_{g != f} a_{t-1}[g] + drive_t[f]

    so with ``coupling != 0`` each coordinate's future depends on the other
    coordinates' past. Returns ``(points_0, sequence)`` with ``F = 3``.
    """
    if n_nodes < 12:
        raise InvalidParameterError("moving mesh needs at least 12 points")
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n_nodes, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    body = u * rng.uniform(0.6, 1.0, (n_nodes, 1)) * np.array([2.0, 0.8, 1.0])

    freqs = rng.normal(size=(n_modes, 3)) * 0.8
    phases = rng.uniform(0, 2 * np.pi, n_modes)
    modes = np.sin(body @ freqs.T + phases)  # (N, M), smooth over the body
    modes /= np.linalg.norm(modes, axis=0, keepdims=True) / np.sqrt(n_nodes)

    total = n_steps + 50
    mix = np.full((3, 3), coupling)
    np.fill_diagonal(mix, persistence)
    if np.max(np.abs(np.linalg.eigvals(mix))) >= 1:
        raise InvalidParameterError("persistence + 2*coupling must keep the modal recursion stable")
    amp = np.zeros((total, n_modes, 3))
    drive = rng.normal(0.0, drive_sigma, (total, n_modes, 3))
    for t in range(1, total):
        amp[t] = amp[t - 1] @ mix.T + drive[t]
    amp = amp[50:]

    t = np.arange(n_steps)
    omega = 2 * np.pi / 25.0
    shift = translation * np.stack(
        [0.05 * t, 0.2 * np.sin(omega * t), 0.1 * np.abs(np.sin(omega * t / 2))], axis=1
    )  # (T, 3)
    deform = 0.2 * deformation * np.einsum("nm,tmf->tnf", modes, amp)
    pos = body[None] + shift[:, None, :] + deform
    if noise_sigma > 0:
        pos = pos + rng.normal(0.0, noise_sigma, pos.shape)
    seq = SignalSequence(pos.reshape(n_steps, 3 * n_nodes), n_nodes, 3)
    return pos[0], seq
