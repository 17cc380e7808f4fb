import json

import numpy as np
import pytest

from conftest import gradcheck
from nilm_ssl import models as M
from nilm_ssl.data.windows import NormStats
from nilm_ssl.errors import ConfigurationError, UsageError

S2P_TABLE = [
    ("Conv. layer1", 10, 30), ("Conv. layer2", 8, 30), ("Conv. layer3", 6, 40),
    ("Conv. layer4", 5, 50), ("Conv. layer5", 5, 50),
]


def s2p_count(window):
    """Independent parameter sum: conv kernels+biases, flatten, dense, output."""
    total, cin = 0, 1
    for _, k, f in S2P_TABLE:
        total += k * cin * f + f
        cin = f
    flat = window * cin
    return total + flat * 1024 + 1024 + 1024 * 1 + 1


def bigru_count():
    def gru(n_in, u):
        return 3 * (n_in * u + u * u + u)

    conv = 4 * 1 * 16 + 16
    g1 = 2 * gru(16, 64)
    g2 = 2 * gru(128, 128)
    return conv + g1 + g2 + 256 * 128 + 128 + 128 + 1


def test_parameter_oracles_are_frozen():
    assert s2p_count(79) == 4_084_249
    assert bigru_count() == 261_585


def test_s2p_parameter_count(rng):
    m = M.build_model(M.ArchitectureSpec(M.S2P, 79), rng)
    assert m.params.count() == s2p_count(79) == 4_084_249
    M.apply_freeze(m, M.FREEZE_PARTIAL)
    assert m.params.count(trainable_only=True) == 4_046_849


@pytest.mark.parametrize("window", [5, 10])
def test_bigru_parameter_count_does_not_depend_on_window(window, rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, window), rng)
    assert m.params.count() == bigru_count()


def test_s2p_layer_table(rng):
    rows = M.build_model(M.ArchitectureSpec(M.S2P, 79), rng).layer_table()
    expected = [
        {"layer": name, "filter_size": k, "filters": f, "stride": 1, "activation": "ReLU"}
        for name, k, f in S2P_TABLE
    ] + [
        {"layer": "Dense layer", "units": 1024, "activation": "ReLU"},
        {"layer": "Output", "units": 1, "activation": "Linear"},
    ]
    assert rows == expected


def test_bigru_layer_table(rng):
    rows = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng).layer_table()
    assert rows == [
        {"layer": "Conv. layer", "filter_size": 4, "filters": 16, "stride": 1, "activation": "ReLU"},
        {"layer": "Bi-GRU layer1", "size": 64, "merge": "concat", "activation": "ReLU"},
        {"layer": "Bi-GRU layer2", "size": 128, "merge": "concat", "activation": "ReLU"},
        {"layer": "Dense layer", "units": 128, "activation": "ReLU"},
        {"layer": "Output", "units": 1, "activation": "Linear"},
    ]


def test_bigru_dropout_layers(rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
    rates = [l.spec.rate for l in m.network.layers if l.spec.kind == "dropout"]
    assert rates == [0.5, 0.5, 0.5]


def test_target_modes_and_windows():
    assert M.ArchitectureSpec(M.S2P, 79).target_mode == M.MIDPOINT
    assert M.ArchitectureSpec(M.S2P, 79).target_offset == 39
    assert M.ArchitectureSpec(M.BIGRU, 5).target_offset == 4
    assert M.default_window(M.S2P, "kettle") == 79
    assert M.default_window(M.BIGRU, "fridge") == 5
    assert M.default_window(M.BIGRU, "washing_machine") == 10
    with pytest.raises(ConfigurationError):
        M.ArchitectureSpec(M.S2P, 80)


def test_partial_freeze_leaves_only_head(rng):
    for kind, w in ((M.S2P, 79), (M.BIGRU, 5)):
        m = M.apply_freeze(M.build_model(M.ArchitectureSpec(kind, w), rng), M.FREEZE_PARTIAL)
        assert m.trainable_layers() == ["dense", "output"]


@pytest.mark.parametrize("kind,window", [(M.S2P, 79), (M.BIGRU, 5), (M.BIGRU, 10)])
def test_full_architecture_gradients(kind, window):
    rng = np.random.default_rng(3)
    m = M.build_model(M.ArchitectureSpec(kind, window), rng)
    x = rng.normal(size=(2, window, 1))
    worst, n, skipped = gradcheck(m.network, x, n_coords=150, seed=5, training=True)
    assert n >= 100
    assert skipped <= n // 4
    assert worst < 1e-4


def test_checkpoint_roundtrip_is_exact(tmp_path, rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
    M.apply_freeze(m, M.FREEZE_PARTIAL)
    m.norm = {"aggregate": NormStats(321.5, 0.1 + 1 / 3), "target": NormStats(1e-300, 7.0, "fridge")}
    m.metadata = {"stages": [{"stage": "pretext"}]}
    path = M.save_checkpoint(m, tmp_path / "m.json")
    back = M.load_checkpoint(path)
    for name, p in m.params.items():
        assert np.array_equal(back.params.value(name), p.value)
        assert back.params[name].trainable == p.trainable
    assert back.norm == m.norm
    assert back.metadata == m.metadata
    x = rng.normal(size=(7, 5))
    assert np.array_equal(back.predict(x), m.predict(x))
    # saving again gives the same bytes
    again = M.save_checkpoint(back, tmp_path / "m2.json")
    assert again.read_bytes() == path.read_bytes()


def test_checkpoint_rejects_other_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"hello": 1}))
    with pytest.raises(ConfigurationError):
        M.load_checkpoint(p)


def test_predict_point_checks_window(rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
    assert isinstance(M.predict_point(m, np.zeros(5)), float)
    with pytest.raises(UsageError):
        M.predict_point(m, np.zeros(6))


def test_inference_is_deterministic(rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
    x = rng.normal(size=(9, 5))
    assert np.array_equal(m.predict(x, batch_size=4), m.predict(x, batch_size=4))
    # BLAS blocking may differ with the batch shape, values may not
    np.testing.assert_allclose(m.predict(x, batch_size=2), m.predict(x, batch_size=9), rtol=1e-12)


def test_reinit_head_touches_only_head(rng):
    m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
    before = m.params.snapshot()
    M.reinit_head(m, np.random.default_rng(99))
    for name, v in before.items():
        same = np.array_equal(v, m.params.value(name))
        assert same == (name.split("/")[0] not in M.HEAD_LAYERS or not v.any())


@pytest.mark.parametrize("kind,window", [(M.S2P, 79), (M.BIGRU, 5)])
def test_zero_network_predicts_output_bias(kind, window, rng):
    m = M.build_model(M.ArchitectureSpec(kind, window), rng)
    for _, p in m.params.items():
        p.value[...] = 0.0
    x = rng.normal(size=window)
    assert M.predict_point(m, x) == 0.0
    m.params["output/bias"].value[...] = 0.75
    assert M.predict_point(m, x) == 0.75
    assert M.predict_point(m, rng.normal(size=window)) == 0.75


def test_random_init_predict_point_replays(rng):
    m = M.build_model(M.ArchitectureSpec(M.S2P, 79), rng)
    x = rng.normal(size=79)
    assert M.predict_point(m, x) == M.predict_point(m, x)
