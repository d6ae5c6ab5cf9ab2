import numpy as np
import pytest

from pgvar.errors import InvalidParameterError
from pgvar.graph import build_knn_graph
from pgvar.models import as_dense_var, predict_teacher_forced
from pgvar.synth import GraphSpec, SynthSpec, gen_moving_mesh, gen_stable_coeffs, random_graph, simulate


@pytest.mark.parametrize("family, L", [("GVAR", 0), ("PGVAR", 0), ("GPGVAR", 2)])
def test_coefficient_mass_equals_rho(family, L):
    spec = SynthSpec(GraphSpec(n_nodes=8), family=family, P=3, K=2, L=L, rho=0.6, seed=4)
    m = gen_stable_coeffs(spec)
    h = np.abs(m.coeffs)
    if family == "PGVAR":
        h = h * 2.0 ** np.arange(3)  # cartesian product of unit-norm shifts has norm <= 2
    assert h.sum() == pytest.approx(0.6, rel=1e-12)


def dense_lag_norm_sum(m):
    return sum(np.linalg.norm(A, 2) for A in as_dense_var(m).coeffs)


@pytest.mark.parametrize("seed", range(20))
def test_generated_models_are_contractive(seed):
    spec = SynthSpec(GraphSpec(n_nodes=7, seed=seed), family="PGVAR", P=2, K=3, rho=0.8, seed=seed)
    m = gen_stable_coeffs(spec)
    assert dense_lag_norm_sum(m) <= 0.8 + 1e-6
    seq = simulate(m, 300, noise_sigma=1.0, seed=seed)
    assert np.all(np.isfinite(seq.data))
    assert np.max(np.abs(seq.data)) < 50


def test_long_run_bounded_by_innovations():
    # ||x_t|| <= max_s ||e_s|| / (1 - rho) when sum_p ||H_p|| <= rho and x starts at 0
    spec = SynthSpec(GraphSpec(n_nodes=10, seed=1), family="PGVAR", P=2, K=2, rho=0.7, seed=1)
    m = gen_stable_coeffs(spec)
    rho = dense_lag_norm_sum(m)
    assert rho <= 0.7 + 1e-6
    seq = simulate(m, 10_000, noise_sigma=0.2, seed=5)
    data = np.vstack([np.zeros((2, m.dim)), seq.data])
    innov = data[2:] - predict_teacher_forced(m, data, np.arange(2, data.shape[0]))
    bound = np.max(np.linalg.norm(innov, axis=1)) / (1 - rho)
    assert np.max(np.linalg.norm(seq.data, axis=1)) <= bound * (1 + 1e-9)


def test_simulate_deterministic_and_noiseless_decay():
    spec = SynthSpec(GraphSpec(n_nodes=6), rho=0.5, seed=3)
    m = gen_stable_coeffs(spec)
    a = simulate(m, 50, 0.1, burn_in=10, seed=9)
    b = simulate(m, 50, 0.1, burn_in=10, seed=9)
    assert a.data.tobytes() == b.data.tobytes()
    x0 = np.ones((m.P, m.dim))
    quiet = simulate(m, 200, initial=x0)
    assert np.linalg.norm(quiet.data[-1]) < 1e-12 * np.linalg.norm(x0)
    assert not simulate(m, 5).data.any()


def test_simulate_follows_recursion(rng):
    spec = SynthSpec(GraphSpec(n_nodes=5), P=2, K=1, seed=2)
    m = gen_stable_coeffs(spec)
    seq = simulate(m, 40, noise_sigma=0.0, initial=rng.normal(size=(2, m.dim)))
    np.testing.assert_allclose(predict_teacher_forced(m, seq.data, np.arange(2, 40)), seq.data[2:], atol=1e-14)


@pytest.mark.parametrize("kind", ["geometric", "erdos_renyi", "complete", "path", "edgeless"])
def test_random_graph_kinds(kind):
    g = random_graph(GraphSpec(kind, 9, 0.3, seed=2))
    d = g.to_dense()
    assert g.n_nodes == 9 and np.array_equal(d, d.T)
    assert not np.diag(d).any()
    assert random_graph(GraphSpec(kind, 9, 0.3, seed=2)).to_dense().tobytes() == d.tobytes()


def test_spec_round_trip_and_validation():
    spec = SynthSpec(GraphSpec("path", 4), GraphSpec("complete", 2), family="GPGVAR", L=1)
    assert SynthSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(InvalidParameterError):
        SynthSpec(rho=1.0)
    with pytest.raises(InvalidParameterError):
        random_graph(GraphSpec("lattice", 4))
    with pytest.raises(InvalidParameterError):
        gen_stable_coeffs(SynthSpec(family="VAR"))


class TestMesh:
    def test_shapes_and_determinism(self):
        p0, seq = gen_moving_mesh(40, 60, seed=3)
        assert p0.shape == (40, 3)
        assert (seq.n_nodes, seq.n_features, seq.n_steps) == (40, 3, 60)
        np.testing.assert_array_equal(seq.data[0].reshape(40, 3), p0)
        _, seq2 = gen_moving_mesh(40, 60, seed=3)
        assert seq.data.tobytes() == seq2.data.tobytes()
        _, seq3 = gen_moving_mesh(40, 60, seed=4)
        assert seq.data.tobytes() != seq3.data.tobytes()

    def test_coupling_creates_cross_feature_dependence(self):
        # lag-1 cross-coordinate correlation of the deformation is larger with coupling
        def cross(c):
            _, seq = gen_moving_mesh(60, 400, seed=1, coupling=c, translation=0.0)
            x = seq.data.reshape(400, 60, 3)
            x = x - x.mean(axis=0)
            a, b = x[1:, :, 0].ravel(), x[:-1, :, 1].ravel()
            return abs(np.corrcoef(a, b)[0, 1])

        assert cross(0.3) > 3 * cross(0.0)

    def test_knn_graph_of_first_frame(self):
        p0, _ = gen_moving_mesh(100, 10)
        g = build_knn_graph(p0, 10)
        assert g.is_symmetric and g.n_edges >= 1000

    def test_errors(self):
        with pytest.raises(InvalidParameterError):
            gen_moving_mesh(5, 10)
        with pytest.raises(InvalidParameterError):
            gen_moving_mesh(20, 10, persistence=0.6, coupling=0.3)
