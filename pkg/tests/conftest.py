import pytest


@pytest.fixture(scope="session")
def tmp_path_session(tmp_path_factory):
    """Session-scoped scratch dir, usable inside hypothesis-driven tests."""
    return tmp_path_factory.mktemp("scratch")
