import pytest
import torch
from torch import nn

from src.attention.schemas import AttentionKind
from src.metrics.exceptions import EmptyDatasetException, InvalidLatencyConfigException, ShapeInconsistencyException
from src.metrics.schemas import FlopConvention
from src.metrics.service import (
    count_flops,
    count_params,
    evaluate_accuracy,
    measure_latency,
    reduction,
)
from src.models.service import build_plain, build_resnet


class ConstantLogits(nn.Module):
    def __init__(self, num_classes: int = 10):
        super().__init__()
        self.num_classes = num_classes

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.zeros(x.shape[0], self.num_classes)


class TestCounting:
    def test_single_conv(self):
        conv = nn.Conv2d(3, 64, kernel_size=3, padding=1)
        assert count_params(conv).params == 1792
        assert count_flops(conv).flops == 3_538_944

    def test_pointwise_conv_on_one_pixel(self):
        conv = nn.Conv2d(1, 1, kernel_size=1, bias=False)
        assert count_flops(conv, input_shape=(1, 1, 1, 1)).flops == 2

    def test_empty_network(self):
        model = nn.Sequential()
        assert count_params(model).params == 0
        assert count_flops(model).flops == 0

    def test_flops_add_up_over_stacked_layers(self):
        first = nn.Conv2d(3, 8, kernel_size=3, padding=1)
        second = nn.Conv2d(8, 4, kernel_size=3, padding=1)
        stacked = count_flops(nn.Sequential(first, second)).flops
        assert stacked == count_flops(first).flops + count_flops(second, input_shape=(1, 8, 32, 32)).flops

    def test_breakdown_sums_to_totals(self):
        report = count_flops(build_resnet(20))
        assert report.params == sum(layer.params for layer in report.layers)
        assert report.flops == sum(layer.flops for layer in report.layers)
        assert report.layer("conv1").flops == 2 * 27 * 16 * 1024

    def test_batch_norm_statistics_are_buffers(self):
        report = count_params(nn.BatchNorm2d(5))
        assert (report.params, report.buffers) == (10, 10)

    def test_attention_flops_are_opt_in(self, sca_config):
        model = build_plain([8], attention=sca_config)
        plain = count_flops(model).flops
        assert plain == count_flops(build_plain([8])).flops
        assert count_flops(model, convention=FlopConvention(count_attention=True)).flops > plain

    def test_convention_rates(self):
        model = nn.Sequential(nn.BatchNorm2d(3), nn.ReLU())
        assert count_flops(model, convention=FlopConvention(bn=4, relu=0)).flops == 4 * 3 * 1024

    def test_shortcut_additions_follow_their_rate(self):
        model = build_resnet(20)
        free = count_flops(model).flops
        charged = count_flops(model, convention=FlopConvention(residual_add=5)).flops
        # three blocks per stage at 16x32x32, 32x16x16 and 64x8x8 outputs
        assert charged - free == 5 * 3 * (16 * 1024 + 32 * 256 + 64 * 64)

    def test_plain_nets_have_no_shortcut_cost(self):
        model = build_plain([4, "M", 4])
        assert count_flops(model, convention=FlopConvention(residual_add=5)).flops == count_flops(model).flops

    def test_input_shape_mismatch(self):
        with pytest.raises(ShapeInconsistencyException):
            count_flops(build_resnet(20), input_shape=(1, 4, 32, 32))

    def test_counting_restores_training_mode(self):
        model = build_resnet(20).train()
        count_flops(model)
        assert model.training

    def test_reduction(self):
        assert reduction(200, 50) == 75.0
        assert reduction(0, 0) == 0.0


class TestAccuracy:
    def test_constant_logits_hit_one_class(self):
        images = torch.zeros(100, 3, 32, 32)
        labels = torch.arange(100) % 10
        assert evaluate_accuracy(ConstantLogits(), [(images, labels)]) == pytest.approx(0.10)

    def test_single_correct_sample(self):
        assert evaluate_accuracy(ConstantLogits(), [(torch.zeros(1, 3, 32, 32), torch.tensor([0]))]) == 1.0

    def test_batching_does_not_matter(self, dataset):
        model = build_plain([4, "M", 4]).double()
        images = torch.stack([dataset.test[i][0] for i in range(len(dataset.test))]).double()
        labels = torch.stack([dataset.test[i][1] for i in range(len(dataset.test))])
        whole = evaluate_accuracy(model, [(images, labels)])
        one_by_one = evaluate_accuracy(model, [(images[i : i + 1], labels[i : i + 1]) for i in range(len(labels))])
        assert whole == one_by_one

    def test_empty_dataset(self):
        with pytest.raises(EmptyDatasetException):
            evaluate_accuracy(ConstantLogits(), [])


class TestLatency:
    def test_too_few_repeats(self):
        with pytest.raises(InvalidLatencyConfigException):
            measure_latency(build_plain([4]), repeats=5)

    def test_report_records_environment(self):
        threads = torch.get_num_threads()
        report = measure_latency(build_plain([4]), repeats=10, warmup=1)
        assert report.median_ms > 0
        assert report.threads == 1
        assert report.input_shape == [1, 3, 32, 32]
        assert torch.get_num_threads() == threads

    @pytest.mark.slow
    def test_median_is_stable(self):
        model = build_resnet(20, attention=AttentionKind.NONE)
        first = measure_latency(model, repeats=50).median_ms
        second = measure_latency(model, repeats=50).median_ms
        assert abs(first - second) / first < 0.5
