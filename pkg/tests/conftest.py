from __future__ import annotations

import pytest

from czklab.gi import GIProtocol, gen_instance


@pytest.fixture(scope="session")
def proto():
    return GIProtocol()


@pytest.fixture(scope="session")
def iso6():
    return gen_instance(6, True, 0)


@pytest.fixture(scope="session")
def noniso6():
    pair, _ = gen_instance(6, False, 0)
    return pair
