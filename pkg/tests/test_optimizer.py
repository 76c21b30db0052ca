import numpy as np
import pytest

from mtlsense import network
from mtlsense.network import Branch, NetworkSpec
from mtlsense.optimizer import AdamState, TrainConfig, TrainingDiverged, adam_step, train

# Hand recurrence evaluated with mpmath (lr=1e-3, betas 0.9/0.999, eps=1e-8).
ADAM_CONST_G = (-0.0009999999900000001, -0.0019999999800000002)     # theta0=0, g=1, 1
ADAM_MIXED_G = (0.4990000000499999975, 0.49936610356546037044)     # theta0=0.5, g=0.2, -0.4


def _scalar(theta):
    return {"w": np.array([theta])}


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(epochs=0), dict(beta1=1.0), dict(beta2=-0.1), dict(epsilon=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    cfg = TrainConfig()
    assert (cfg.learning_rate, cfg.epochs, cfg.beta1, cfg.beta2, cfg.epsilon) == (1e-3, 4000, 0.9, 0.999, 1e-8)


def test_zero_gradient_leaves_params():
    p = {"w": np.array([1.5, -2.0]), "b": np.array([0.25])}
    state = AdamState.zeros_like(p)
    new, state = adam_step(p, {k: np.zeros_like(v) for k, v in p.items()}, state, TrainConfig())
    for k in p:
        np.testing.assert_array_equal(new[k], p[k])
    assert state.t == 1


def test_single_and_double_step_constant_gradient():
    cfg = TrainConfig()
    p = _scalar(0.0)
    state = AdamState.zeros_like(p)
    g = _scalar(1.0)
    p, state = adam_step(p, g, state, cfg)
    assert abs(p["w"][0] - ADAM_CONST_G[0]) < 1e-12
    p, state = adam_step(p, g, state, cfg)
    assert abs(p["w"][0] - ADAM_CONST_G[1]) < 1e-12
    assert state.t == 2


def test_two_steps_varying_gradient():
    cfg = TrainConfig()
    p = _scalar(0.5)
    state = AdamState.zeros_like(p)
    p, state = adam_step(p, _scalar(0.2), state, cfg)
    assert abs(p["w"][0] - ADAM_MIXED_G[0]) < 1e-12
    p, state = adam_step(p, _scalar(-0.4), state, cfg)
    assert abs(p["w"][0] - ADAM_MIXED_G[1]) < 1e-12


def test_inputs_not_mutated():
    p = _scalar(0.5)
    state = AdamState.zeros_like(p)
    adam_step(p, _scalar(1.0), state, TrainConfig())
    assert p["w"][0] == 0.5 and state.t == 0 and state.m["w"][0] == 0


def test_first_step_bounded_by_learning_rate():
    rng = np.random.default_rng(0)
    p = {"w": rng.normal(size=100)}
    g = {"w": rng.normal(scale=1e3, size=100)}
    new, _ = adam_step(p, g, AdamState.zeros_like(p), TrainConfig(learning_rate=0.01))
    assert np.all(np.abs(new["w"] - p["w"]) <= 0.01 * (1 + 1e-12))


def test_non_finite_gradient_aborts():
    p = _scalar(0.0)
    with pytest.raises(TrainingDiverged, match="'w'"):
        adam_step(p, _scalar(np.nan), AdamState.zeros_like(p), TrainConfig())


def _toy():
    x = np.linspace(-3, 3, 20)[:, None]
    y = 1 / (1 + np.exp(-1.5 * x[:, 0]))
    spec = NetworkSpec((4,), (Branch("o2", (), ("O2",)), Branch("t", (), ("T",), 0.0)), input_dim=1)
    return spec, x, np.column_stack([y, np.zeros_like(y)])


def test_single_epoch_single_update():
    spec, x, y = _toy()
    p0 = network.build(spec, 0)
    p1, trace = train(spec, p0, x, y, TrainConfig(epochs=1))
    assert len(trace) == 1
    expected, _ = adam_step(p0, network.backward(spec, p0, x, y), AdamState.zeros_like(p0), TrainConfig())
    for k in p0:
        np.testing.assert_array_equal(p1[k], expected[k])


def test_toy_convergence():
    spec, x, y = _toy()
    _, trace = train(spec, network.build(spec, 0), x, y, TrainConfig(epochs=2000, learning_rate=1e-2))
    assert trace.global_loss[-1] < 0.1 * trace.global_loss[0]
    n = len(trace) // 10
    assert np.mean(trace.global_loss[-n:]) < np.mean(trace.global_loss[:n])


def test_training_deterministic():
    spec, x, y = _toy()
    cfg = TrainConfig(epochs=50)
    a, ta = train(spec, network.build(spec, 3), x, y, cfg)
    b, tb = train(spec, network.build(spec, 3), x, y, cfg)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert ta.global_loss == tb.global_loss


def test_trace_csv_and_dev(tmp_path):
    spec, x, y = _toy()
    _, trace = train(spec, network.build(spec, 0), x, y, TrainConfig(epochs=6, dev_every=2), dev=(x, y))
    assert sorted(trace.dev_loss) == [2, 4, 6]
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,global_loss,branch_o2_loss,branch_t_loss"
    assert len(lines) == 7 and lines[1].startswith("1,")


def test_lr_schedule_hook():
    spec, x, y = _toy()
    p0 = network.build(spec, 0)
    frozen, _ = train(spec, p0, x, y, TrainConfig(epochs=3), lr_schedule=lambda epoch: 1e-30)
    for k in p0:
        np.testing.assert_allclose(frozen[k], p0[k], rtol=0, atol=1e-25)


def test_divergence_reports_epoch():
    spec, x, y = _toy()
    p = network.build(spec, 0)
    p["o2.out.W"][0, 0] = np.nan
    with pytest.raises(TrainingDiverged, match="epoch 1"):
        train(spec, p, x, y, TrainConfig(epochs=5))


def test_empty_training_set():
    spec, x, y = _toy()
    with pytest.raises(ValueError):
        train(spec, network.build(spec, 0), x[:0], y[:0], TrainConfig(epochs=1))
