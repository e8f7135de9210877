import numpy as np
import torch
from torch import nn
from torch.utils.data import TensorDataset

from src.datasets.service import DatasetHandle


def randomize_batch_norm(model: nn.Module, generator: torch.Generator) -> None:
    """Give every BN non-trivial affine terms and running statistics."""
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, nn.BatchNorm2d):
                c = m.num_features
                m.weight.copy_(torch.rand(c, generator=generator) + 0.5)
                m.bias.copy_(torch.randn(c, generator=generator) * 0.1)
                m.running_mean.copy_(torch.randn(c, generator=generator) * 0.1)
                m.running_var.copy_(torch.rand(c, generator=generator) + 0.5)


def synthetic_handle(train_size: int = 64, test_size: int = 32, num_classes: int = 10, seed: int = 0) -> DatasetHandle:
    generator = torch.Generator().manual_seed(seed)
    train = TensorDataset(
        torch.randn(train_size, 3, 32, 32, generator=generator),
        torch.arange(train_size) % num_classes,
    )
    test = TensorDataset(
        torch.randn(test_size, 3, 32, 32, generator=generator),
        torch.arange(test_size) % num_classes,
    )
    return DatasetHandle(name="synthetic", train=train, test=test, num_classes=num_classes)


def sigmoid(v: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-v))


def spatial_oracle(x: np.ndarray, g: int, eps: float, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Per-group spatial map of a (B, C, H, W) array, written out position by position."""
    b, c, h, w = x.shape
    size = c // g
    a_s = np.zeros((b, g, h, w))
    for n in range(b):
        for i in range(g):
            group = x[n, i * size : (i + 1) * size]
            f_avg = [group[k].mean() for k in range(size)]
            f_max = [group[k].max() for k in range(size)]
            sims = np.zeros((h, w))
            for y in range(h):
                for z in range(w):
                    local = [group[k, y, z] for k in range(size)]
                    sims[y, z] = sum(f_avg[k] * local[k] for k in range(size)) + sum(
                        f_max[k] * local[k] for k in range(size)
                    )
            mu = sims.sum() / (h * w)
            sigma = np.sqrt(((sims - mu) ** 2).sum() / (h * w))
            normalized = (sims - mu) / (sigma + eps)
            a_s[n, i] = sigmoid(normalized * scale[i] + shift[i])
    return a_s


def group_norm_oracle(v: np.ndarray, groups: int, eps: float, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Group normalization of a (B, C) array of pooled descriptors."""
    b, c = v.shape
    size = c // groups
    out = np.zeros_like(v)
    for n in range(b):
        for i in range(groups):
            block = v[n, i * size : (i + 1) * size]
            mu = block.mean()
            var = ((block - mu) ** 2).mean()
            for k in range(size):
                j = i * size + k
                out[n, j] = (block[k] - mu) / np.sqrt(var + eps) * gamma[j] + beta[j]
    return out


def channel_oracle(
    x: np.ndarray,
    groups: int,
    eps: float,
    avg_affine: tuple[np.ndarray, np.ndarray],
    max_affine: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """Channel map (B, C) of a (B, C, H, W) array."""
    pooled_avg = x.mean(axis=(2, 3))
    pooled_max = x.max(axis=(2, 3))
    return sigmoid(
        group_norm_oracle(pooled_max, groups, eps, *max_affine) + group_norm_oracle(pooled_avg, groups, eps, *avg_affine)
    )


def separable_handle(train_size: int = 64, test_size: int = 32, seed: int = 0) -> DatasetHandle:
    """Two classes told apart by the sign of an otherwise constant image."""
    generator = torch.Generator().manual_seed(seed)

    def split(size: int) -> TensorDataset:
        labels = torch.arange(size) % 2
        offsets = (labels * 2.0 - 1.0).view(size, 1, 1, 1)
        return TensorDataset(offsets + 0.1 * torch.randn(size, 3, 32, 32, generator=generator), labels)

    return DatasetHandle(name="separable", train=split(train_size), test=split(test_size), num_classes=2)
