import copy

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from src.metrics.service import count_flops, count_params
from src.models.checkpoint import load_checkpoint, save_checkpoint
from src.models.schemas import CheckpointManifest
from src.models.service import build_plain, build_resnet, get_module
from src.pruning.constants import ViolationCode
from src.pruning.exceptions import InvalidPruningRatioException, PlanValidationException
from src.pruning.schemas import LayerPlan, Provenance, PruningPlan, RatioSchedule
from src.pruning.service import apply_plan, load_plan, plan_pruning, removal_count, save_plan, validate_plan
from src.stats.service import ScoreTable
from tests.helpers import randomize_batch_norm


def manual_plan(layers: dict[str, LayerPlan]) -> PruningPlan:
    return PruningPlan(layers=layers, provenance=Provenance(scorer="manual", table_digest="-"))


def random_scores(model, rng: np.random.Generator) -> ScoreTable:
    return ScoreTable(
        "random",
        {unit.layer_id: rng.random(get_module(model, unit.layer_id).out_channels) for unit in model.pruning_units()},
    )


def masked_copy(model, plan: PruningPlan):
    """Same network with the planned channels silenced at their BN."""
    masked = copy.deepcopy(model).eval()
    with torch.no_grad():
        for unit in model.pruning_units():
            removed = sorted(plan.removed(unit.layer_id))
            if removed:
                bn = get_module(masked, unit.bn_id)
                bn.weight[removed] = 0.0
                bn.bias[removed] = 0.0
    return masked


class TestPlanPruning:
    def test_lowest_scores_are_removed(self):
        plan = plan_pruning(ScoreTable("l1", {"L": [0.9, 0.1, 0.8, 0.2]}), 0.5)
        assert plan.layers["L"].remove == [1, 3]
        assert plan.provenance.scorer == "l1"

    def test_zero_ratio_removes_nothing(self):
        plan = plan_pruning(ScoreTable("l1", {"L": [0.9, 0.1, 0.8, 0.2]}), 0.0)
        assert plan.layers["L"].remove == []

    @pytest.mark.parametrize("ratio", [1.0, 1.5, -0.1])
    def test_ratio_outside_unit_interval(self, ratio):
        with pytest.raises(InvalidPruningRatioException):
            plan_pruning(ScoreTable("l1", {"L": [0.9, 0.1]}), ratio)

    def test_removal_count_survives_binary_rounding(self):
        assert removal_count(0.3, 10) == 3
        assert removal_count(0.7, 10) == 7
        assert removal_count(0.19, 64) == 12

    def test_matches_brute_force_selection(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            scores = rng.permutation(16).astype(float) + rng.random()
            ratio = float(rng.uniform(0.0, 0.95))
            plan = plan_pruning(ScoreTable("l1", {"L": scores}), ratio)
            count = int(np.floor(ratio * 16 + 1e-9))
            expected = sorted(i for i in range(16) if sorted(scores).index(scores[i]) < count)
            assert plan.layers["L"].remove == expected

    def test_per_layer_schedule_and_layer_selection(self):
        table = ScoreTable("l1", {"a": [3.0, 1.0, 2.0, 0.0], "b": [1.0, 0.0], "c": [5.0, 4.0]})
        plan = plan_pruning(table, RatioSchedule(default=0.5, layers={"b": 0.0}), layers=["a", "b"])
        assert plan.layers["a"].remove == [1, 3]
        assert plan.layers["b"].remove == []
        assert "c" not in plan.layers

    def test_mapping_gives_unlisted_layers_zero(self):
        table = ScoreTable("l1", {"a": [3.0, 1.0, 2.0, 0.0], "b": [1.0, 0.0]})
        plan = plan_pruning(table, {"a": 0.25})
        assert plan.layers["a"].remove == [3]
        assert plan.layers["b"].remove == []

    @settings(max_examples=50, deadline=None)
    @given(
        scores=st.lists(st.integers(-1000, 1000), min_size=2, max_size=32, unique=True),
        low=st.floats(0.0, 0.95),
        high=st.floats(0.0, 0.95),
    )
    def test_higher_ratio_removes_a_superset(self, scores, low, high):
        low, high = sorted((low, high))
        table = ScoreTable("l1", {"L": scores})
        assert set(plan_pruning(table, low).layers["L"].remove) <= set(plan_pruning(table, high).layers["L"].remove)

    @settings(max_examples=50, deadline=None)
    @given(
        scores=st.lists(st.integers(-1000, 1000), min_size=2, max_size=32, unique=True),
        scale=st.integers(1, 50),
        shift=st.integers(-1000, 1000),
        ratio=st.floats(0.0, 0.95),
    )
    def test_plan_ignores_positive_affine_rescaling(self, scores, scale, shift, ratio):
        original = plan_pruning(ScoreTable("l1", {"L": scores}), ratio)
        rescaled = plan_pruning(ScoreTable("l1", {"L": [scale * s + shift for s in scores]}), ratio)
        assert original.layers["L"].remove == rescaled.layers["L"].remove

    def test_save_and_load(self, tmp_path):
        plan = plan_pruning(ScoreTable("l1", {"L": [0.9, 0.1, 0.8, 0.2]}), 0.5)
        assert load_plan(save_plan(plan, tmp_path / "plan.json")) == plan


class TestValidatePlan:
    def test_valid_plan(self, toy_net):
        report = validate_plan(toy_net, manual_plan({"features.0.conv": LayerPlan(channels=4, ratio=0.25, remove=[2])}))
        assert report.ok
        assert report.survivors == {"features.0.conv": 3}

    def test_empty_layer(self, toy_net):
        report = validate_plan(toy_net, manual_plan({"features.1.conv": LayerPlan(channels=2, ratio=0.5, remove=[0, 1])}))
        assert ViolationCode.EMPTY_LAYER in report.codes()

    def test_index_problems(self, toy_net):
        report = validate_plan(
            toy_net,
            manual_plan(
                {
                    "features.0.conv": LayerPlan(channels=4, ratio=0.5, remove=[1, 1]),
                    "features.1.conv": LayerPlan(channels=2, ratio=0.0, remove=[5]),
                    "features.7.conv": LayerPlan(channels=2, ratio=0.0),
                }
            ),
        )
        assert report.codes() == {
            ViolationCode.DUPLICATE_INDEX,
            ViolationCode.INDEX_OUT_OF_RANGE,
            ViolationCode.UNKNOWN_LAYER,
        }

    def test_channel_mismatch(self, toy_net):
        report = validate_plan(toy_net, manual_plan({"features.0.conv": LayerPlan(channels=8, ratio=0.0)}))
        assert report.codes() == {ViolationCode.CHANNEL_MISMATCH}

    def test_ratio_mismatch_is_a_warning(self, toy_net):
        report = validate_plan(toy_net, manual_plan({"features.0.conv": LayerPlan(channels=4, ratio=0.0, remove=[0])}))
        assert report.ok
        assert [w.code for w in report.warnings] == [ViolationCode.RATIO_MISMATCH]

    def test_residual_coupling(self):
        model = build_resnet(20)
        plan = manual_plan({"layer1.0.conv2": LayerPlan(channels=16, ratio=0.25, remove=[0, 1, 2, 3])})
        strict = validate_plan(model, plan)
        assert strict.codes() == {ViolationCode.RESIDUAL_COUPLING}
        lenient = validate_plan(model, plan, strict=False)
        assert lenient.ok
        assert lenient.ignored == ["layer1.0.conv2"]

    def test_attention_must_be_removed(self, sca_config):
        model = build_plain([4, 2], attention=sca_config)
        report = validate_plan(model, manual_plan({}))
        assert report.codes() == {ViolationCode.ATTENTION_PRESENT}
        with pytest.raises(PlanValidationException):
            apply_plan(model, manual_plan({}))


class TestApplyPlan:
    def test_removing_one_channel_of_the_toy_net(self, toy_net):
        plan = manual_plan({"features.0.conv": LayerPlan(channels=4, ratio=0.25, remove=[1])})
        pruned = apply_plan(toy_net, plan)

        before, after = count_params(toy_net), count_params(pruned)
        assert before.params - after.params == 48
        assert (before.params + before.buffers) - (after.params + after.buffers) == 50
        assert count_flops(toy_net).flops - count_flops(pruned).flops == 95_232
        assert pruned.features[0].conv.out_channels == 3
        assert pruned.features[1].conv.in_channels == 3
        assert pruned.spec.channel_overrides == {"features.0.conv": 3}

    def test_input_model_is_untouched(self, toy_net):
        state = {k: v.clone() for k, v in toy_net.state_dict().items()}
        apply_plan(toy_net, manual_plan({"features.0.conv": LayerPlan(channels=4, ratio=0.5, remove=[0, 3])}))
        assert toy_net.features[0].conv.out_channels == 4
        for key, value in toy_net.state_dict().items():
            assert torch.equal(state[key], value)

    def test_zero_ratio_is_bit_identical(self, toy_net):
        rng = np.random.default_rng(0)
        pruned = apply_plan(toy_net, plan_pruning(random_scores(toy_net, rng), 0.0))
        for key, value in toy_net.state_dict().items():
            assert torch.equal(pruned.state_dict()[key], value)
        x = torch.randn(4, 3, 32, 32)
        assert torch.equal(pruned.eval()(x), toy_net.eval()(x))

    @pytest.mark.parametrize("global_pool", [True, False])
    def test_pruned_net_matches_channel_masking(self, global_pool):
        rng = np.random.default_rng(1 if global_pool else 2)
        generator = torch.Generator().manual_seed(3)
        for _ in range(25):
            layers: list[int | str] = []
            for _ in range(int(rng.integers(1, 4))):
                layers.append(int(rng.integers(2, 9)))
                if rng.random() < 0.5:
                    layers.append("M")
            model = build_plain(layers, num_classes=3, global_pool=global_pool)
            randomize_batch_norm(model, generator)
            model = model.double().eval()

            ratios = {unit.layer_id: float(rng.uniform(0.0, 0.9)) for unit in model.pruning_units()}
            plan = plan_pruning(random_scores(model, rng), ratios)
            pruned = apply_plan(model, plan).eval()
            masked = masked_copy(model, plan)

            x = torch.randn(100, 3, 32, 32, generator=generator, dtype=torch.float64)
            with torch.no_grad():
                torch.testing.assert_close(pruned(x), masked(x), rtol=0, atol=1e-5)

    def test_resnet_inner_convs(self):
        model = build_resnet(20)
        plan = plan_pruning(random_scores(model, np.random.default_rng(4)), 0.5)
        pruned = apply_plan(model, plan)
        assert [pruned.layer1[0].conv1.out_channels, pruned.layer2[0].conv1.out_channels] == [8, 16]
        assert pruned.layer3[2].conv2.out_channels == 64
        assert pruned.eval()(torch.randn(2, 3, 32, 32)).shape == (2, 10)
        assert count_params(pruned).params < count_params(model).params

    def test_pruned_checkpoint_round_trip(self, tmp_path):
        model = build_resnet(20).eval()
        pruned = apply_plan(model, plan_pruning(random_scores(model, np.random.default_rng(5)), 0.3)).eval()
        manifest = CheckpointManifest(tag="pruned", dataset="cifar10", seed=0, config_hash="x")
        restored, _ = load_checkpoint(save_checkpoint(tmp_path / "pruned", pruned, manifest))
        x = torch.randn(2, 3, 32, 32)
        torch.testing.assert_close(restored.eval()(x), pruned(x), rtol=0, atol=0)
        assert restored.layer1[0].conv1.out_channels == 12
