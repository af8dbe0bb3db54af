import random

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from hopsi.nominal import NameSupply, set_supply

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
rngs = seeds.map(random.Random)


@pytest.fixture(autouse=True)
def fresh_supply():
    old = set_supply(NameSupply())
    yield
    set_supply(old)
