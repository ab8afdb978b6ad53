from decimal import Decimal

import pytest

from dppkit.clock import LogicalClock
from dppkit.identity import Gtin, ProductRef, generate_key_pair
from dppkit.lifecycle import CommercialRegistry, create_agent
from dppkit.passport import Role
from dppkit.registry import FeeSchedule, Ledger

GTIN_A = "4006381333931"
GTIN_B = "4006381333948"  # same payload family, recomputed check digit
GTIN_ZERO = "0000000000000"


def seed(n: int) -> bytes:
    return n.to_bytes(4, "big") * 8


@pytest.fixture
def clock():
    return LogicalClock()


@pytest.fixture
def ledger(clock):
    return Ledger(FeeSchedule(), clock)


class World:
    """A ledger plus a cast of registered agents for protocol tests."""

    def __init__(self, clock=None, fees=None, path=None):
        self.clock = clock or LogicalClock()
        self.ledger = Ledger(fees or FeeSchedule(), self.clock, path=path)
        self.commercial = CommercialRegistry()
        self._seed = 1000

    def next_seed(self) -> bytes:
        self._seed += 1
        return seed(self._seed)

    def agent(self, name, role=Role.END_USER, balance="1000", commercial=False, legal_name=None):
        return create_agent(
            self.ledger,
            self.next_seed(),
            name,
            role,
            Decimal(balance),
            self.commercial if commercial else None,
            legal_name,
        )


@pytest.fixture
def world():
    return World()


@pytest.fixture
def product_a():
    return ProductRef(Gtin(GTIN_A), serial="SN-0001")


@pytest.fixture
def product_b():
    return ProductRef(Gtin(GTIN_B), serial="SN-0002")
