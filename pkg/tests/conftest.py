import pytest

from app.config import settings
from app.core.plants import normalized_pair, scalar_cubic, scalar_lti


@pytest.fixture(scope="session")
def lti_bundle():
    return scalar_lti()


@pytest.fixture(scope="session")
def cubic_bundle():
    return scalar_cubic()


@pytest.fixture(scope="session")
def lti_pair(lti_bundle):
    return normalized_pair(lti_bundle)


@pytest.fixture(scope="session")
def cubic_pair(cubic_bundle):
    return normalized_pair(cubic_bundle)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(root))
    return root
