import warnings

import numpy as np
import pytest

from ppmlab.binning import DurationBinner, PseudoEmbedder
from ppmlab.encoding import EventEncoder
from ppmlab.errors import ConfigError, ContractError, TrainingDiverged
from ppmlab.models import (
    InputDims,
    ModelConfig,
    OutcomeClassifier,
    build_model,
    collate,
    desk_config,
    infer_dims,
    load_checkpoint,
    parameter_count,
    predict_logits,
    save_checkpoint,
    train_model,
)
from ppmlab.nn.config import LayerConfig, OptimSpec
from ppmlab.representations import GraphBuilder, SequenceBuilder, split_train_val
from ppmlab.synth import bpi12_like_spec, generate_synthetic


def make_reps(family="lstm", n_cases=40, seed=0, duration_aware=True):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        log = generate_synthetic(bpi12_like_spec(n_cases=n_cases, seed=seed))
        train_ids, val_ids = split_train_val(log, 0.8, stratify=True, seed=0)
        enc = EventEncoder().fit(log, train_ids=train_ids)
        train_enc = enc.transform(log.select(train_ids))
        val_enc = enc.transform(log.select(val_ids))
        binner = DurationBinner.zero_nonzero_policy().fit(
            [e.duration_min for c in log.select(train_ids) for e in c.events])
        emb = PseudoEmbedder(binner=binner).fit(train_enc) if duration_aware else None
        if family == "gcn":
            builder = GraphBuilder(embedder=emb).fit(train_enc)
        else:
            max_len = max(len(c.events) for c in log.cases)
            builder = SequenceBuilder(max_len=max_len, embedder=emb).fit(train_enc)
        return builder.transform(train_enc), builder.transform(val_enc)


def lstm_cfg(**kwargs):
    defaults = dict(
        family="lstm", duration_aware=False,
        node_layers=[LayerConfig(kind="lstm", units=8)],
        case_layers=[LayerConfig(kind="dense", units=4)],
        head_layers=[LayerConfig(kind="dense", units=8)],
        optim=OptimSpec(learning_rate=5e-3),
        batch_size=32,
    )
    defaults.update(kwargs)
    return ModelConfig(**defaults)


class TestModelConfig:
    def test_six_gcn_layers_rejected(self):
        with pytest.raises(ConfigError, match="between 1 and 5"):
            ModelConfig(
                family="gcn", duration_aware=False,
                node_layers=[LayerConfig(kind="gcn_conv", units=8)] * 6,
                head_layers=[LayerConfig(kind="dense", units=8)],
            )

    def test_four_lstm_layers_rejected(self):
        with pytest.raises(ConfigError):
            lstm_cfg(node_layers=[LayerConfig(kind="lstm", units=8)] * 4)

    def test_duration_aware_requires_pseudo_stack(self):
        with pytest.raises(ConfigError, match="pseudo"):
            lstm_cfg(duration_aware=True)

    def test_baseline_must_not_have_pseudo_stack(self):
        with pytest.raises(ConfigError):
            lstm_cfg(pseudo_layers=[LayerConfig(kind="lstm", units=8)])

    def test_wrong_kind_in_stack(self):
        with pytest.raises(ConfigError, match="expects"):
            lstm_cfg(node_layers=[LayerConfig(kind="gcn_conv", units=8)])

    def test_bad_batch_size(self):
        with pytest.raises(ConfigError, match="batch_size"):
            lstm_cfg(batch_size=100)

    def test_json_round_trip(self):
        cfg = desk_config("gcn", True)
        clone = ModelConfig.from_json(cfg.to_json())
        assert clone.to_dict() == cfg.to_dict()

    def test_appendix_style_config_expressible(self):
        # two recurrent layers 160/48 with per-layer L2 and dropout, one
        # dense layer 144, adam + exponential schedule
        cfg = ModelConfig(
            family="lstm", duration_aware=False,
            node_layers=[
                LayerConfig(kind="lstm", units=160, l2_coeff=1.956e-4, dropout_rate=0.4914,
                            batch_norm=True, bn_momentum=0.81, bn_eps=3.345e-4),
                LayerConfig(kind="lstm", units=48, l2_coeff=4.433e-3, dropout_rate=0.3156),
            ],
            case_layers=[LayerConfig(kind="dense", units=16)],
            head_layers=[LayerConfig(kind="dense", units=144, activation="relu",
                                     l2_coeff=2.017e-4, dropout_rate=0.4581)],
            optim=OptimSpec(optimizer="adam", learning_rate=2.718e-3, betas=(0.93, 0.992),
                            scheduler="exponential", scheduler_params={"gamma": 0.992}),
            batch_size=32,
        )
        clone = ModelConfig.from_json(cfg.to_json())
        assert clone.node_layers[0].units == 160
        assert clone.node_layers[1].units == 48


class TestBuild:
    def test_lstm_parameter_count_closed_form(self):
        d, u1, u2 = 7, 6, 5
        cfg = lstm_cfg(
            node_layers=[LayerConfig(kind="lstm", units=u1), LayerConfig(kind="lstm", units=u2)],
            case_layers=[],
            head_layers=[LayerConfig(kind="dense", units=4)],
        )
        dims = InputDims(node_dim=d, pseudo_dim=0, case_dim=0, n_classes=3)
        net = build_model(cfg, dims, seed=0)
        lstm_params = 4 * (d * u1 + u1 * u1 + u1) + 4 * (u1 * u2 + u2 * u2 + u2)
        head = u2 * 4 + 4
        out = 4 * 3 + 3
        assert parameter_count(net) == lstm_params + head + out

    def test_dual_branch_shapes_symmetric(self):
        layer = LayerConfig(kind="gcn_conv", units=12)
        cfg = ModelConfig(
            family="gcn", duration_aware=True,
            node_layers=[layer], pseudo_layers=[layer],
            fusion_layers=[LayerConfig(kind="gcn_conv", units=6)],
            head_layers=[LayerConfig(kind="dense", units=4)],
        )
        dims = InputDims(node_dim=5, pseudo_dim=5, case_dim=0, n_classes=2)
        net = build_model(cfg, dims, seed=0)
        assert net.node_stack.layers[0].lin.w.shape == net.pseudo_stack.layers[0].lin.w.shape
        node_w = net.node_stack.layers[0].lin.w.data
        pseudo_w = net.pseudo_stack.layers[0].lin.w.data
        assert not np.array_equal(node_w, pseudo_w)  # independent parameters

    def test_duration_aware_without_channel_rejected(self):
        cfg = desk_config("lstm", True)
        dims = InputDims(node_dim=5, pseudo_dim=0, case_dim=1, n_classes=2)
        with pytest.raises(ConfigError, match="pseudo"):
            build_model(cfg, dims, seed=0)


class TestForward:
    def test_zero_parameters_give_zero_logits(self):
        train, val = make_reps("lstm", n_cases=20)
        cfg = lstm_cfg()
        net = build_model(cfg, infer_dims(train), seed=0)
        for p in net.parameters():
            p.data[...] = 0.0
        logits = predict_logits(net, train[:5])
        assert np.all(logits == 0.0)

    def test_single_node_graph(self):
        train, _ = make_reps("gcn", n_cases=20)
        single = [r for r in train if r.n_events >= 1][0]
        single.node_matrix = single.node_matrix[:1]
        single.pseudo_matrix = single.pseudo_matrix[:1]
        single.edge_index = np.zeros((2, 0), dtype=int)
        single.edge_weight = np.zeros(0)
        cfg = desk_config("gcn", False)
        net = build_model(cfg, infer_dims(train), seed=0)
        logits = predict_logits(net, [single])
        assert logits.shape == (1, 3)
        assert np.isfinite(logits).all()

    def test_mixed_family_batch_rejected(self):
        graphs, _ = make_reps("gcn", n_cases=10)
        seqs, _ = make_reps("lstm", n_cases=10)
        with pytest.raises(ContractError, match="mixed"):
            collate([graphs[0], seqs[0]], need_pseudo=False)

    def test_baseline_ignores_pseudo_channel(self):
        train, _ = make_reps("lstm", n_cases=20)
        cfg = lstm_cfg()
        net = build_model(cfg, infer_dims(train), seed=0)
        before = predict_logits(net, train[:4])
        for rep in train[:4]:
            rep.pseudo_seq = rep.pseudo_seq + 123.0
        after = predict_logits(net, train[:4])
        assert np.array_equal(before, after)

    def test_argmax_shift_invariant(self):
        train, _ = make_reps("lstm", n_cases=20)
        net = build_model(lstm_cfg(), infer_dims(train), seed=1)
        logits = predict_logits(net, train[:6])
        assert np.array_equal(logits.argmax(axis=1), (logits + 7.3).argmax(axis=1))

    def test_sequence_padding_perturbation_invariance(self):
        train, _ = make_reps("lstm", n_cases=20)
        cfg = desk_config("lstm", True)
        net = build_model(cfg, infer_dims(train), seed=0)
        before = predict_logits(net, train)
        rng = np.random.default_rng(0)
        for rep in train:
            pad = ~rep.mask
            rep.seq_matrix[pad] = rng.normal(size=(pad.sum(), rep.seq_matrix.shape[1]))
            rep.pseudo_seq[pad] = rng.normal(size=(pad.sum(), rep.pseudo_seq.shape[1]))
        after = predict_logits(net, train)
        assert np.abs(before - after).max() <= 1e-9

    def test_graph_edge_permutation_invariance(self):
        train, _ = make_reps("gcn", n_cases=20)
        cfg = desk_config("gcn", True)
        net = build_model(cfg, infer_dims(train), seed=0)
        before = predict_logits(net, train)
        rng = np.random.default_rng(0)
        for rep in train:
            k = rep.edge_index.shape[1]
            if k > 1:
                perm = rng.permutation(k)
                rep.edge_index = rep.edge_index[:, perm]
                rep.edge_weight = rep.edge_weight[perm]
        after = predict_logits(net, train)
        assert np.abs(before - after).max() <= 1e-9


class TestTraining:
    def test_zero_lr_schedule_freezes_parameters(self):
        train, val = make_reps("lstm", n_cases=20)
        cfg = lstm_cfg(optim=OptimSpec(
            learning_rate=1e-3, scheduler="piecewise_constant",
            scheduler_params={"boundaries": [], "values": [0.0]}))
        net = build_model(cfg, infer_dims(train + val), seed=0)
        before = {p.name: p.data.copy() for p in net.parameters()}
        train_model(net, train, val, epochs=3, seed=0)
        for p in net.parameters():
            assert np.array_equal(p.data, before[p.name])

    def test_same_seed_identical_history(self):
        train, val = make_reps("lstm", n_cases=24)
        cfg = lstm_cfg()
        dims = infer_dims(train + val)
        h1 = train_model(build_model(cfg, dims, seed=3), train, val, epochs=4, seed=3).history
        h2 = train_model(build_model(cfg, dims, seed=3), train, val, epochs=4, seed=3).history
        assert h1 == h2

    def test_full_batch_permutation_invariance(self):
        train, val = make_reps("lstm", n_cases=24)
        cfg = lstm_cfg(batch_size=512)  # full batch, no dropout in this config
        dims = infer_dims(train + val)
        net1 = build_model(cfg, dims, seed=0)
        train_model(net1, train, val, epochs=2, seed=0)
        net2 = build_model(cfg, dims, seed=0)
        rng = np.random.default_rng(9)
        permuted = [train[i] for i in rng.permutation(len(train))]
        train_model(net2, permuted, val, epochs=2, seed=0)
        for p1, p2 in zip(net1.parameters(), net2.parameters()):
            assert np.abs(p1.data - p2.data).max() <= 1e-9

    def test_constant_objective_stops_at_patience_plus_one(self):
        train, val = make_reps("lstm", n_cases=20)
        cfg = lstm_cfg(optim=OptimSpec(
            learning_rate=1e-3, scheduler="piecewise_constant",
            scheduler_params={"boundaries": [], "values": [0.0]}))
        net = build_model(cfg, infer_dims(train + val), seed=0)
        result = train_model(net, train, val, epochs=50, patience=5, seed=0)
        assert result.epochs_run == 6
        assert result.stopped_early

    def test_separable_toy_reaches_perfect_accuracy(self):
        train, val = make_reps("lstm", n_cases=20, seed=5)
        cfg = desk_config("lstm", False)
        net = build_model(cfg, infer_dims(train + val), seed=0)
        result = train_model(net, train, val, epochs=300, seed=0, target_objective=1.0)
        assert result.best_objective == 1.0
        assert result.epochs_run <= 300

    def test_divergence_reports_diagnostics(self):
        train, val = make_reps("lstm", n_cases=16)
        cfg = lstm_cfg()
        net = build_model(cfg, infer_dims(train + val), seed=0)
        net.out_w.data[...] = np.inf
        with pytest.raises(TrainingDiverged) as err:
            train_model(net, train, val, epochs=2, seed=0)
        assert err.value.epoch == 0
        assert err.value.batch == 0
        assert err.value.lr is not None

    def test_pruner_hook_marks_pruned(self):
        train, val = make_reps("lstm", n_cases=16)
        net = build_model(lstm_cfg(), infer_dims(train + val), seed=0)
        result = train_model(net, train, val, epochs=20, seed=0,
                             pruner=lambda epoch, obj: epoch >= 2)
        assert result.pruned
        assert result.epochs_run == 3


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        train, val = make_reps("gcn", n_cases=16)
        cfg = desk_config("gcn", True)
        net = build_model(cfg, infer_dims(train + val), seed=0)
        train_model(net, train, val, epochs=2, seed=0)
        path = tmp_path / "model.json"
        save_checkpoint(path, net, extra={"note": "test"})
        clone, extra = load_checkpoint(path)
        assert extra["note"] == "test"
        assert np.array_equal(predict_logits(net, val), predict_logits(clone, val))

    def test_batch_norm_stats_round_trip(self, tmp_path):
        train, val = make_reps("lstm", n_cases=16)
        cfg = lstm_cfg(node_layers=[LayerConfig(kind="lstm", units=8, batch_norm=True,
                                                bn_momentum=0.3)])
        net = build_model(cfg, infer_dims(train + val), seed=0)
        train_model(net, train, val, epochs=3, seed=0)
        assert net.batch_norms()
        path = tmp_path / "model.json"
        save_checkpoint(path, net)
        clone, _ = load_checkpoint(path)
        for a, b in zip(net.batch_norms(), clone.batch_norms()):
            assert np.array_equal(a.running_mean, b.running_mean)
            assert np.array_equal(a.running_var, b.running_var)
        assert np.array_equal(predict_logits(net, val), predict_logits(clone, val))

    def test_best_epoch_restore_includes_bn_stats(self):
        train, val = make_reps("lstm", n_cases=20)
        cfg = lstm_cfg(node_layers=[LayerConfig(kind="lstm", units=8, batch_norm=True)])
        net = build_model(cfg, infer_dims(train + val), seed=0)
        result = train_model(net, train, val, epochs=6, seed=0)
        # predictions after restore reproduce the recorded best objective
        pred = predict_logits(net, val).argmax(axis=1)
        accuracy = float(np.mean(pred == np.array([r.outcome_index for r in val])))
        assert accuracy == pytest.approx(result.best_objective)


class TestClassifier:
    def test_sklearn_protocol(self):
        from sklearn.base import clone

        clf = OutcomeClassifier(config=desk_config("lstm", False), max_epochs=5, seed=1)
        params = clf.get_params()
        assert params["max_epochs"] == 5
        clone(clf)  # must not raise

    def test_fit_predict(self):
        train, val = make_reps("lstm", n_cases=30)
        clf = OutcomeClassifier(config=desk_config("lstm", False), max_epochs=30,
                                seed=0, target_objective=1.0)
        clf.fit(train, val=val)
        pred = clf.predict(val)
        assert pred.shape == (len(val),)
        proba = clf.predict_proba(val)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert clf.score(val, [r.outcome_index for r in val]) > 0.5


class TestFixtureConfigs:
    @pytest.mark.parametrize("name", ["sequence_baseline_skewed", "sequence_duration_aware_skewed"])
    def test_packaged_config_loads_and_builds(self, name):
        from ppmlab.models import load_fixture_config

        cfg = load_fixture_config(name)
        dims = InputDims(node_dim=12, pseudo_dim=6, case_dim=3, n_classes=5)
        net = build_model(cfg, dims, seed=0)
        assert parameter_count(net) > 0

    def test_unknown_fixture_rejected(self):
        from ppmlab.models import load_fixture_config

        with pytest.raises(ConfigError):
            load_fixture_config("nope")


class TestDtypeSwitch:
    def test_float32_training(self):
        from ppmlab.nn.tensor import set_default_dtype

        train, val = make_reps("lstm", n_cases=16)
        try:
            set_default_dtype("float32")
            net = build_model(lstm_cfg(), infer_dims(train + val), seed=0)
            train_model(net, train, val, epochs=1, seed=0)
            assert all(p.data.dtype == np.float32 for p in net.parameters())
        finally:
            set_default_dtype("float64")


class TestTraceRepresentation:
    def test_fused_width_is_sum_of_parts(self):
        from ppmlab.models import collate

        train, _ = make_reps("gcn", n_cases=12)
        net = build_model(desk_config("gcn", True), infer_dims(train), seed=0)
        batch = collate(train[:4], need_pseudo=True)
        parts = net.trace_representation(batch)
        assert parts["fused"].shape[1] == parts["z"].shape[1] + parts["case_dense"].shape[1]

    def test_matches_forward_logits_path(self):
        from ppmlab.models import collate
        from ppmlab.nn.tensor import Tensor

        train, _ = make_reps("lstm", n_cases=12)
        net = build_model(desk_config("lstm", False), infer_dims(train), seed=0)
        batch = collate(train[:4], need_pseudo=False)
        parts = net.trace_representation(batch)
        h = net.head_stack(Tensor(parts["fused"]))
        logits = (h @ net.out_w + net.out_b).data
        assert np.allclose(logits, predict_logits(net, train[:4]))
