import os

import pytest
from hypothesis import settings

settings.register_profile("poik", max_examples=40, deadline=None)
settings.load_profile("poik")

FULL_SCALE = os.environ.get("POIK_FULL_SCALE") == "1"


def pytest_collection_modifyitems(config, items):
    if FULL_SCALE:
        return
    skip = pytest.mark.skip(reason="set POIK_FULL_SCALE=1 to run k = 10000 checks")
    for item in items:
        if "full_scale" in item.keywords:
            item.add_marker(skip)
