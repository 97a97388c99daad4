import pytest

from attnground import synth


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory):
    """The standard 50-fixture suite at the shipped default resolutions."""
    root = tmp_path_factory.mktemp("suite50")
    synth.make_suite(root, count=50, base_seed=0)
    return root


@pytest.fixture(scope="session")
def small_suite_dir(tmp_path_factory):
    """A fast 6-sample suite at reduced scale for service/CLI tests."""
    root = tmp_path_factory.mktemp("suite_small")
    synth.make_suite(root, count=6, base_seed=100, grid=32, resolutions=(16, 32))
    return root
