import numpy as np
import pytest

from auctionlab.experiment import (
    dominating_treatment_instance,
    full_eligibility_instance,
    identical_bidders_instance,
)
from auctionlab.throttling import QuotaConfig


@pytest.fixture
def table_instance():
    """One query, three advertisers, the worked potential-bid table."""
    return full_eligibility_instance(1, 3, b0=[[2.0, 4.0, 1.0]], b1=[[5.0, 4.0, 3.0]])


@pytest.fixture
def identical_instance():
    return identical_bidders_instance(4, 5.0, 6.0)


@pytest.fixture
def dominating_instance():
    return dominating_treatment_instance([4.0, 4.25, 4.50, 4.75], [6.0, 5.50, 5.25, 5.0])


@pytest.fixture
def saturated_instance():
    """4 queries x 3 advertisers with seeded lognormal bids; quota 2 saturates."""
    rng = np.random.default_rng(42)
    b0 = rng.lognormal(1.0, 0.3, (4, 3))
    b1 = rng.lognormal(1.1, 0.3, (4, 3))
    return full_eligibility_instance(4, 3, b0, b1)


@pytest.fixture
def saturated_quota():
    return QuotaConfig.joint({0: 2, 1: 2, 2: 2})
