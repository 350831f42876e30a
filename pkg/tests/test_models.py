import numpy as np
import pytest

from qpinn import circuits as cir
from qpinn import models, qsp, sim
from qpinn.models import ModelSpec


def test_param_counts():
    assert models.param_count(ModelSpec("qpinn")) == 7
    assert models.param_count(ModelSpec("quantum_inspired")) == 6
    assert models.param_count(ModelSpec("counterpart")) == 6
    assert models.param_count(ModelSpec("fully_connected")) == 481


def test_fc_layer_arithmetic():
    assert (2 * 10 + 10) + 4 * (10 * 10 + 10) + (10 * 1 + 1) == 481


def test_qpinn_circuit_shape():
    circ = models.qpinn_circuit()
    assert circ.width == 5
    assert circ.n_params == 7
    entanglers = [g for g in circ.gates if g.inner is not None and g.inner.kind == "rzz"]
    assert len(entanglers) == 1
    assert entanglers[0].inner.qubits == (2, 3)
    assert entanglers[0].controls == ((0, 1),)


def test_qpinn_build_validates_count():
    with pytest.raises(ValueError):
        models.qpinn_build(np.zeros(6))


def test_qpinn_lambda_zero_equals_rank1_unitary():
    rng = np.random.default_rng(51)
    theta = rng.normal(size=6)
    x = [0.3, 0.7]
    u_qpinn = cir.unitary_of(models.qpinn_circuit(), np.concatenate([theta, [0.0]]), x)
    u_rank1 = cir.unitary_of(qsp.rank1_circuit_template(2, 1), theta, x)
    assert np.abs(u_qpinn - u_rank1).max() < 1e-12


def test_dequantization_identity():
    # QPINN(λ=0) via statevector equals the 2×2-chain evaluation pointwise
    rng = np.random.default_rng(52)
    qi = models.make_evaluator(ModelSpec("quantum_inspired"))
    qp = models.make_evaluator(ModelSpec("qpinn"))
    for _ in range(20):
        theta = rng.normal(size=6)
        t = rng.uniform(0.01, 0.99, 100)
        x = rng.uniform(0.01, 0.99, 100)
        a = qi.values(theta[None, :], t, x)
        b = qp.values(np.concatenate([theta, [0.0]])[None, :], t, x)
        assert np.max(np.abs(a - b)) < 1e-12


def test_quantum_core_bounded():
    rng = np.random.default_rng(53)
    for kind in ("qpinn", "quantum_inspired"):
        spec = ModelSpec(kind)
        ev = models.make_evaluator(spec)
        params = rng.normal(size=(5, spec.n_params))
        t = rng.uniform(0.01, 0.99, 50)
        x = rng.uniform(0.01, 0.99, 50)
        core = ev.values(params, t, x) / spec.output_scale
        assert np.max(np.abs(core)) <= 1.0 + 1e-12


def test_init_params_contract():
    for kind in models.KINDS:
        spec = ModelSpec(kind)
        a = models.init_params(spec, 9)
        b = models.init_params(spec, 9)
        assert np.array_equal(a, b)
        assert a.size == spec.n_params
    # qpinn and quantum_inspired share the same chain angles per seed
    qp = models.init_params(ModelSpec("qpinn"), 3)
    qi = models.init_params(ModelSpec("quantum_inspired"), 3)
    assert np.array_equal(qp[:6], qi)
    assert np.all((qp >= 0.0) & (qp < 2 * np.pi))
    fc = models.init_params(ModelSpec("fully_connected"), 3)
    assert np.max(np.abs(fc[:20])) <= np.sqrt(6.0 / 12.0)
    assert np.all(fc[20:30] == 0.0)  # first-layer biases


def test_counterpart_factorized_example():
    fn = models.ModelFunction(ModelSpec("counterpart"), [0.0, 1.0, 0.0, 1.0, 0.0, 0.0])
    t = np.array([0.3, 0.8])
    x = np.array([0.25, 0.5])
    assert np.allclose(fn.values(t, x), 10.0 * x)


def test_fully_connected_zero_params():
    fn = models.ModelFunction(ModelSpec("fully_connected"), np.zeros(481))
    v, v_t, v_x, v_xx = fn.derivatives(np.array([0.4]), np.array([0.6]))
    assert v[0] == v_t[0] == v_x[0] == v_xx[0] == 0.0


def test_model_eval_scalar_paths():
    spec = ModelSpec("counterpart")
    params = [0.1, 0.2, 0.0, 0.3, 0.1, 0.0]
    val = models.model_eval(spec, params, 0.5, 0.5)
    assert isinstance(val, float)
    bundle = models.model_eval(spec, params, 0.5, 0.5, derivatives=True)
    assert bundle.v == pytest.approx(val)
    p1 = 0.1 + 0.2 * 0.5
    p2 = 0.3 + 0.1 * 0.5
    assert bundle.v == pytest.approx(10.0 * p1 * p2)
    assert bundle.v_x == pytest.approx(10.0 * 0.2 * p2)
    assert bundle.v_xx == pytest.approx(0.0, abs=1e-12)


def test_derivatives_vs_finite_differences_all_models():
    rng = np.random.default_rng(54)
    for kind in models.KINDS:
        spec = ModelSpec(kind)
        for _ in range(2):
            fn = models.ModelFunction(spec, models.init_params(spec, int(rng.integers(100))))
            t = rng.uniform(0.05, 0.95, 10)
            x = rng.uniform(0.05, 0.95, 10)
            v, v_t, v_x, v_xx = fn.derivatives(t, x)
            h = 1e-5
            fd_t = (fn.values(t + h, x) - fn.values(t - h, x)) / (2 * h)
            fd_x = (fn.values(t, x + h) - fn.values(t, x - h)) / (2 * h)
            h2 = 1e-4
            fd_xx = (fn.values(t, x + h2) - 2 * fn.values(t, x) + fn.values(t, x - h2)) / h2**2
            scale = np.maximum(1.0, np.abs(fd_t))
            assert np.max(np.abs(v_t - fd_t) / scale) < 1e-4
            assert np.max(np.abs(v_x - fd_x) / np.maximum(1.0, np.abs(fd_x))) < 1e-4
            assert np.max(np.abs(v_xx - fd_xx) / np.maximum(1.0, np.abs(fd_xx))) < 1e-4


def test_inductive_bias_containment():
    # any degree-1 counterpart factor pair with sup ≤ ½ is reproduced by
    # synthesized quantum-inspired parameters
    rng = np.random.default_rng(55)
    for trial in range(3):
        p1 = tuple(rng.uniform(-0.2, 0.2, 2))
        p2 = tuple(rng.uniform(-0.2, 0.2, 2))
        cp = models.ModelFunction(ModelSpec("counterpart"),
                                  list(p1) + [0.0] + list(p2) + [0.0])
        a1, b1 = qsp.synthesize_angles(qsp.UnivariatePoly(p1), 1, seed=trial)
        a2, b2 = qsp.synthesize_angles(qsp.UnivariatePoly(p2), 1, seed=trial + 50)
        qi = models.ModelFunction(
            ModelSpec("quantum_inspired"),
            np.concatenate([a1.theta, b1.theta, a2.theta, b2.theta]),
        )
        t = rng.uniform(0.01, 0.99, 50)
        x = rng.uniform(0.01, 0.99, 50)
        assert np.max(np.abs(cp.values(t, x) - qi.values(t, x))) < 1e-6


def test_params_json_roundtrip():
    spec = ModelSpec("qpinn")
    params = models.init_params(spec, 1)
    doc = models.params_to_json_dict(spec, params)
    spec2, params2 = models.params_from_json_dict(doc)
    assert spec2.kind == "qpinn"
    assert np.allclose(params, params2)
    with pytest.raises(ValueError):
        models.params_from_json_dict({"kind": "qpinn", "values": [0.0] * 6})
