import pytest


@pytest.fixture(autouse=True)
def _isolated_reference_cache(tmp_path, monkeypatch):
    """Keep fine-reference cache files out of the user's home directory."""
    monkeypatch.setenv("WBFV_CACHE_DIR", str(tmp_path / "wbfv-cache"))
