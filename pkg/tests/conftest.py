import pytest

from tandem_ru.config import ExperimentConfig
from tandem_ru.dataset import build_dataset
from tandem_ru.pipeline import run_all_methods, stack_from_models, train_algorithm, train_config_from
from tandem_ru.scene import build_scene


@pytest.fixture
def default_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def default_scene():
    return build_scene(ExperimentConfig())


@pytest.fixture(scope="session")
def default_dataset():
    return build_dataset(ExperimentConfig())


@pytest.fixture(scope="session")
def trained(default_dataset):
    cfg = train_config_from(default_dataset.config)
    return {a: train_algorithm(default_dataset, a, cfg) for a in (1, 2, 3)}


@pytest.fixture(scope="session")
def trained_stack(default_dataset, trained):
    return stack_from_models({a: m for a, (m, _) in trained.items()}, default_dataset.config)


@pytest.fixture(scope="session")
def default_results(trained_stack, default_dataset):
    return run_all_methods(trained_stack, default_dataset)
