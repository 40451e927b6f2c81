"""End-to-end smoke checks for the python module.

The C++ test suite owns correctness; these only prove the bindings round
values through each major surface: codebooks, entropy, containers, datasets
and a miniature training run.
"""

import math

import pytest

import hemp


def snapped_store(values, levels):
    store = hemp.ParamStore()
    store.add_layer("w", [len(values)], values)
    cb = hemp.Codebook()
    cb.layer_id = 0
    cb.levels = levels
    return store, [cb]


def test_lloyd_fit_and_quantize_roundtrip():
    values = [0.1, 0.11, 0.12, 0.9, 0.91, 0.92]
    cb, trace = hemp.fit_lloyd_max(values, 2, return_trace=True)
    assert cb.level_count() == 2
    assert cb.levels[0] < cb.levels[1]
    assert trace == sorted(trace, reverse=True)
    idx = hemp.quantize(values, cb)
    assert idx == [1, 1, 1, 2, 2, 2]
    recon = hemp.reconstruct(idx, cb)
    assert hemp.quantization_mse(recon, cb) == 0.0


def test_entropy_anchor_two_half_split_params():
    store, cbs = snapped_store([0.25, 0.25], [0.0, 1.0])
    view = hemp.group_tuples(store, 1)
    h = hemp.proxy_entropy(store, cbs, view)
    assert h == pytest.approx(0.8112781244591328, abs=1e-12)
    g = hemp.proxy_gradient(store, cbs, view)
    assert g == pytest.approx([0.5 * math.log2(3.0)] * 2, abs=1e-12)


def test_proxy_collapses_to_plugin_entropy_on_levels():
    levels = [-1.0, 0.0, 2.0]
    values = [levels[i % 3] for i in range(30)]
    store, cbs = snapped_store(values, levels)
    view = hemp.group_tuples(store, 2)
    idx = hemp.quantize_store(store, cbs)
    assert hemp.proxy_entropy(store, cbs, view) == pytest.approx(
        hemp.true_entropy(idx.flat(), 2), abs=1e-12
    )
    stats = hemp.support_stats(store, cbs, view)
    assert stats.max_per_tuple <= 4


def test_stationary_position_balanced_midpoint():
    store, cbs = snapped_store([0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5], [0.0, 1.0])
    assert hemp.stationary_position(6, store, cbs) == pytest.approx(0.5, abs=1e-12)
    assert hemp.gradient_bound(6, store, cbs) == pytest.approx(0.0, abs=1e-9)


def test_archive_encode_decode_roundtrip():
    values = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0]
    store, cbs = snapped_store(values, [0.0, 1.0])
    idx = hemp.quantize_store(store, cbs)
    archive = hemp.make_archive(store, cbs, idx, 2)
    blob = hemp.encode(archive)
    assert len(blob) > hemp.header_bytes(archive) - 4
    back = hemp.decode(blob)
    assert back.order == 2
    assert [l.name for l in back.layers] == ["w"]
    assert back.layers[0].indices == idx.layers[0]
    restored, books = hemp.restore_store(archive)
    assert restored.flat_values() == values
    assert books[0].levels == [0.0, 1.0]


def test_decode_rejects_garbage():
    with pytest.raises(hemp.FormatError):
        hemp.decode(b"not a container")


def test_checkpoint_roundtrip(tmp_path):
    store, _ = snapped_store([0.5, -1.25, 3.0], [0.0, 1.0])
    path = str(tmp_path / "model.ckpt")
    hemp.save_checkpoint(store, path)
    back = hemp.load_checkpoint(path)
    assert back.flat_values() == store.flat_values()
    assert back.layer(0).name == "w"


def test_synthetic_datasets_are_seeded():
    a = hemp.synth_gaussian_blobs(3, 10, 6, seed=42)
    b = hemp.synth_gaussian_blobs(3, 10, 6, seed=42)
    assert a.count() == 30 and a.dim() == 6
    assert a.images == b.images and a.labels == b.labels
    digits = hemp.synth_digits(2, seed=9)
    assert digits.count() == 20 and digits.rows == digits.cols == 28
    assert all(0.0 <= p <= 1.0 for p in digits.images)
    train, test = hemp.stratified_split(a, 21, seed=5)
    assert train.count() == 21 and test.count() == 9


def test_tiny_training_run(tmp_path):
    blobs = hemp.synth_gaussian_blobs(3, 40, 8, seed=11)
    train_ds, test_ds = hemp.stratified_split(blobs, 90, seed=3)
    cfg = hemp.TrainConfig()
    cfg.lr = 0.05
    cfg.batch_size = 30
    cfg.epochs = 3
    cfg.seed = 7
    cfg.levels = 4
    cfg.reg.order = 2
    cfg.reg.lambda_h = 0.5
    cfg.reg.lambda_e = 0.1
    result = hemp.train("8x6x3", train_ds, test_ds, cfg)
    assert len(result.history) == cfg.epochs + 1
    last = result.history[-1]
    assert math.isfinite(last.loss_w) and math.isfinite(last.h_proxy)
    assert 0.0 <= last.acc_wq <= 1.0
    assert result.eval_quantized(test_ds).accuracy == pytest.approx(last.acc_wq)

    blob = hemp.encode(result.to_archive(2))
    assert hemp.decode(blob).total_symbols() == result.indices.total_count()

    csv_path = str(tmp_path / "metrics.csv")
    hemp.write_metrics_csv(result.history, csv_path)
    header = open(csv_path).readline().strip()
    assert header == "epoch,loss_w,loss_wq,acc_w,acc_wq,h_proxy,h_true,e_term,est_bytes"


def test_regularization_update_points_toward_levels():
    store, cbs = snapped_store([0.3, 0.8, 0.2, 0.6], [0.0, 1.0])
    view = hemp.group_tuples(store, 1)
    idx = hemp.quantize_store(store, cbs)
    cfg = hemp.RegConfig()
    cfg.lambda_h = 0.0
    cfg.lambda_e = 1.0
    cfg.insensitivity = False
    update = hemp.regularization_update(
        store, cbs, view, idx, [0.0] * 4, cfg
    )
    # pure reconstruction pull: sign matches the offset from the nearest level
    assert update[0] > 0 and update[2] > 0  # below midpoint, pulled toward 0
    assert update[1] < 0 and update[3] < 0  # above midpoint, pulled toward 1
