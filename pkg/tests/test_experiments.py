import math
from dataclasses import replace

import numpy as np
import pytest

from paga.autodiff import Tensor
from paga.experiments import checks
from paga.experiments.ablation import (
    AblationRow,
    AblationTask,
    run_ablation,
    task_operators,
    task_targets,
    variants,
)
from paga.experiments.lanes import LATERAL, SEQUENTIAL, LaneGraphConfig, gen_lane_graph, vertex_id
from paga.experiments.skip import (
    SkipDatasetConfig,
    TrainConfig,
    TrialResult,
    build_model,
    gen_skip_dataset,
    linear_gcn_oracle,
    run_trials,
    skip_labels,
    summarize,
    target_psi,
    train_skip,
)
from paga.graph import check_graph, graph_from_dict, graph_to_dict
from paga.layers import PagaConfig

SMALL = SkipDatasetConfig(n_train=512, n_eval=128, seed=3)


# --- skip dataset --------------------------------------------------------------------

def test_dataset_label_rule():
    d = gen_skip_dataset(SMALL)
    assert d.x_train.shape == (512, 3, 1) and d.x_eval.shape == (128, 3, 1)
    assert np.all(d.x_train[:, 0] == 0.0)
    np.testing.assert_array_equal(d.y_train[:, 0], d.x_train[:, 2])
    np.testing.assert_array_equal(d.y_train[:, 1], d.x_train[:, 1])
    np.testing.assert_array_equal(d.y_train[:, 2], d.x_train[:, 2])
    np.testing.assert_array_equal(d.y_eval, skip_labels(d.x_eval))


def test_labels_follow_target_psi():
    x = np.random.default_rng(0).standard_normal((20, 3, 1))
    np.testing.assert_allclose(skip_labels(x), target_psi() @ x, atol=1e-15)
    assert target_psi().tolist() == [[0, 0, 1], [0, 1, 0], [0, 0, 1]]


def test_zero_input_gives_zero_labels():
    assert np.all(skip_labels(np.zeros((4, 3, 1))) == 0.0)


def test_dataset_is_seeded():
    a, b = gen_skip_dataset(SMALL), gen_skip_dataset(SMALL)
    assert a.x_train.tobytes() == b.x_train.tobytes()
    assert a.x_eval.tobytes() == b.x_eval.tobytes()
    c = gen_skip_dataset(replace(SMALL, seed=4))
    assert a.x_train.tobytes() != c.x_train.tobytes()


def test_oracle_floor_is_positive_for_skip_target():
    d = gen_skip_dataset(SMALL)
    for depth in (1, 2, 3, 4):
        assert linear_gcn_oracle(d, depth) > 0.05


def test_oracle_floor_vanishes_inside_model_class():
    d = gen_skip_dataset(SMALL)
    assert linear_gcn_oracle(d, 2, target="laplacian") < 1e-20


def test_oracle_rejects_unknown_options():
    d = gen_skip_dataset(SMALL)
    with pytest.raises(ValueError):
        linear_gcn_oracle(d, 2, target="other")
    with pytest.raises(ValueError):
        linear_gcn_oracle(d, 2, split="test")


def exact_witness():
    """PAGA parameters that reproduce the skip target exactly."""
    model = build_model("paga", TrainConfig(), np.random.default_rng(0))
    p = model.params
    p["embed/table"].value[:] = 1.0
    if "embed/raw_proj" in p:
        p["embed/raw_proj"].value[:] = 0.0
    p["phi/head_w"].value[:] = [[1.0], [1.0]]
    p["phi/head_b"].value[:] = -1.0
    p["self_gate"].value[:] = 1.0
    p["combiner/weight"].value[:] = 1.0
    p["combiner/bias"].value[:] = 0.0
    return model


def test_exact_parameter_witness():
    model = exact_witness()
    psi = model.psi().value[0]
    want = target_psi()
    mask = np.ones((3, 3), bool)
    # the shared self gate sets psi(a, a) too; x(a) = 0 so it never matters
    mask[0, 0] = False
    np.testing.assert_allclose(psi[mask], want[mask], atol=1e-15)
    d = gen_skip_dataset(SMALL)
    pred = model(Tensor(d.x_eval)).value
    assert np.mean((pred - d.y_eval) ** 2) < 1e-12


def test_unknown_model_kind():
    with pytest.raises(ValueError):
        build_model("mlp", TrainConfig(), np.random.default_rng(0))


FAST = TrainConfig(epochs=3)


@pytest.mark.parametrize("kind", ["paga", "gcn", "gat"])
def test_trial_is_reproducible(kind):
    d = gen_skip_dataset(SMALL)
    a, b = train_skip(kind, d, FAST, seed=5), train_skip(kind, d, FAST, seed=5)
    assert a.train_loss == b.train_loss and a.eval_mse == b.eval_mse
    assert len(a.train_loss) == len(a.eval_loss) == 3
    assert not a.failed and math.isfinite(a.eval_mse)


def test_paga_training_reduces_loss():
    d = gen_skip_dataset(SMALL)
    r = train_skip("paga", d, TrainConfig(epochs=20), seed=0)
    assert r.train_loss[-1] < r.train_loss[0]


def test_single_trial_summary_equals_the_trial():
    s = run_trials("gcn", 1, 11, FAST)
    t = s.trials[0]
    assert s.num_trials == 1 and s.num_failed == 0
    assert s.mean_final_loss == t.final_train_loss and s.std_final_loss == 0.0
    assert s.mean_eval_mse == t.eval_mse and s.vertex_mse == t.vertex_mse
    assert s.mean_floor == t.floor_train and t.floor_train > 0


def test_failed_trials_are_counted_not_averaged():
    good = TrialResult("paga", 0, [0.5], [0.4], 0.4, (0.1, 0.2, 0.3))
    bad = TrialResult("paga", 1, [], [], math.nan, (math.nan,) * 3, failed=True)
    s = summarize("paga", [bad, good])
    assert s.num_trials == 2 and s.num_failed == 1
    assert s.mean_final_loss == 0.5 and s.count_below(1.0) == 1
    assert math.isnan(bad.final_train_loss)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_learning_rate_marks_failure():
    d = gen_skip_dataset(SMALL)
    r = train_skip("gcn", d, TrainConfig(epochs=3, lr=1e200), seed=0)
    assert r.failed
    s = summarize("gcn", [r])
    assert s.num_failed == 1 and math.isnan(s.mean_final_loss)


# --- checks ----------------------------------------------------------------------------

def test_paga_check_threshold():
    trials = [TrialResult("paga", i, [0.0], [0.0], 1e-4 if i < 95 else 1.0, (0, 0, 0))
              for i in range(100)]
    assert checks.check_paga(summarize("paga", trials))[0].passed
    trials[0].eval_mse = 1.0
    assert not checks.check_paga(summarize("paga", trials))[0].passed


def test_check_lines():
    c = checks.Check("x", True, "ok")
    assert c.line() == "[PASS] x: ok"
    assert checks.Check("x", False, "no").line().startswith("[FAIL]")


def test_ablation_checks():
    def row(name, mean, std=0.01):
        return AblationRow(name, mean, std, (mean,))

    ok = checks.check_ablation("phi_form", [row("recurrent", 0.01), row("summation", 0.2),
                                            row("concatenation", 0.02)])
    assert ok[0].passed
    close = checks.check_ablation("phi_form", [row("recurrent", 0.1, 0.1), row("summation", 0.2, 0.1),
                                               row("concatenation", 0.02)])
    assert not close[0].passed
    cap = checks.check_ablation("capacity", [row("ce=32,heads=1", 0.2), row("ce=1,heads=8", 0.05),
                                             row("ce=32,heads=8", 0.01)])
    assert all(c.passed for c in cap) and len(cap) == 2
    feats = checks.check_ablation("edge_features", [row("none", 0.1), row("type", 0.3),
                                                    row("spatial", 0.01), row("type+spatial", 0.01)])
    assert not feats[0].passed


# --- lane graphs -------------------------------------------------------------------------

def test_lane_graph_without_laterals():
    g = gen_lane_graph(LaneGraphConfig(num_chains=2, chain_length=5, lateral_prob=0.0))
    types = g.edge_types.tolist()
    assert g.num_vertices == 10
    assert types.count(SEQUENTIAL) == 8 and types.count(LATERAL) == 0


def test_full_lateral_links_every_pair_both_ways():
    cfg = LaneGraphConfig(num_chains=3, chain_length=4, lateral_prob=1.0)
    g = gen_lane_graph(cfg)
    lat = {(int(s), int(t)) for s, t, k in zip(g.sources, g.targets, g.edge_types) if k == LATERAL}
    for i in range(2):
        for j in range(4):
            a, b = vertex_id(cfg, i, j), vertex_id(cfg, i + 1, j)
            assert (a, b) in lat and (b, a) in lat
    assert len(lat) == 16


def test_forks_add_diagonal_sequential_edges():
    cfg = LaneGraphConfig(num_chains=3, chain_length=6, fork_rate=0.3, seed=2)
    g = gen_lane_graph(cfg)
    diag = [e for e in g.edges if e.edge_type == SEQUENTIAL
            and e.source // cfg.chain_length != e.target // cfg.chain_length]
    assert diag
    assert max(g.out_index.degrees()) >= 2 and max(g.in_index.degrees()) >= 2


@pytest.mark.parametrize("seed", range(5))
def test_lane_graphs_are_valid_and_round_trip(seed):
    g = gen_lane_graph(LaneGraphConfig(fork_rate=0.2, seed=seed))
    assert check_graph(g) is None
    assert graph_to_dict(graph_from_dict(graph_to_dict(g))) == graph_to_dict(g)
    assert g.raw_edge_width == 6


def test_lane_config_validation():
    with pytest.raises(ValueError):
        LaneGraphConfig(num_chains=0)
    with pytest.raises(ValueError):
        LaneGraphConfig(lateral_prob=1.5)


# --- ablation task -----------------------------------------------------------------------

def test_task_operators_on_a_ladder():
    cfg = LaneGraphConfig(num_chains=2, chain_length=3, lateral_prob=1.0, jitter=0.0)
    g = gen_lane_graph(cfg)
    ops = task_operators(g)
    # channel 0: successor then step left (towards chain 1)
    assert ops[0, vertex_id(cfg, 0, 0), vertex_id(cfg, 1, 1)] == 1.0
    assert ops[0, vertex_id(cfg, 1, 0)].sum() == 0.0
    # channel 1: step right (towards chain 0) then successor
    assert ops[1, vertex_id(cfg, 1, 0), vertex_id(cfg, 0, 1)] == 1.0
    assert ops[1, vertex_id(cfg, 0, 0)].sum() == 0.0
    x = np.random.default_rng(0).standard_normal((2, 6, 2))
    y = task_targets(ops, x)
    np.testing.assert_allclose(y[..., 0], x[..., 0] @ ops[0].T)


def test_variant_names():
    base = AblationTask().base
    assert list(variants("phi_form", base)) == ["recurrent", "summation", "concatenation"]
    assert list(variants("edge_features", base)) == ["none", "type", "spatial", "type+spatial"]
    assert set(variants("capacity", base)) == {"ce=32,heads=1", "ce=1,heads=8", "ce=32,heads=8"}
    with pytest.raises(ValueError):
        variants("depth", base)


def test_ablation_smoke():
    task = replace(AblationTask(), steps=20, train_graphs=1, eval_graphs=1, eval_examples=8,
                   base=PagaConfig(lam=2, c_e=4, n_head=2, phi_kind="recurrent", c_x=2, c_y=2,
                                   lstm_hidden=4, nonlinear=True))
    rows = run_ablation("phi_form", [1, 0], task)
    assert [r.variant for r in rows] == ["recurrent", "summation", "concatenation"]
    assert all(len(r.errors) == 2 and math.isfinite(r.mean) for r in rows)
    assert run_ablation("phi_form", [0, 1], task) == rows
    with pytest.raises(ValueError):
        run_ablation("phi_form", [], task)
