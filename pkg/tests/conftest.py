import pytest

from src.attention.schemas import AttentionConfig, AttentionKind, SCAConfig
from src.datasets.service import DatasetHandle
from src.models.base import PrunableNetwork
from src.models.service import build_plain
from src.utils import seed_everything
from tests.helpers import synthetic_handle


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale checks")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def toy_net() -> PrunableNetwork:
    """conv(3->4) - BN - ReLU - conv(4->2) - BN - ReLU - global pool - linear."""
    seed_everything(0)
    return build_plain([4, 2], num_classes=3, conv_bias=True, global_pool=True)


@pytest.fixture
def sca_config() -> AttentionConfig:
    return AttentionConfig(kind=AttentionKind.SCA, sca=SCAConfig(g=2, G=2))


@pytest.fixture
def dataset() -> DatasetHandle:
    return synthetic_handle()
