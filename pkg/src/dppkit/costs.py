"""Analytic registry costs and reconciliation against charged fees.

Manufacturer cost is linear in the product count x: the fixed term is the
company's own DID registration, the per-product term is what each product
adds on the registry. With default fees that is 50 + 75x tokens for the
DID-per-product design and 50 + 5x for the GTIN-only design, a per-product
ratio of exactly 15.

All arithmetic is decimal; EUR conversion is exact, never binary float.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Union

from .errors import ValidationError
from .registry import FeeSchedule, Ledger, LedgerTransaction

PROPOSAL_DID = "p081"
PROPOSAL_CHAIN = "p082"

_CENT = Decimal("0.01")


@dataclass(frozen=True)
class CostReport:
    proposal: str
    product_count: int
    token_price_eur: Decimal
    total_tokens: Decimal
    total_eur: Decimal
    per_product_tokens: Decimal
    per_product_eur: Decimal

    def __add__(self, other: "CostReport") -> "CostReport":
        if self.token_price_eur != other.token_price_eur:
            raise ValidationError("cannot combine reports with different token prices")
        proposal = self.proposal if self.proposal == other.proposal else "combined"
        return CostReport(
            proposal=proposal,
            product_count=self.product_count,
            token_price_eur=self.token_price_eur,
            total_tokens=self.total_tokens + other.total_tokens,
            total_eur=self.total_eur + other.total_eur,
            per_product_tokens=self.per_product_tokens,
            per_product_eur=self.per_product_eur,
        )

    def eur_text(self) -> str:
        return f"{self.total_eur.quantize(_CENT)} EUR"

    def to_dict(self) -> dict:
        return {
            "proposal": self.proposal,
            "products": self.product_count,
            "tokenPriceEur": str(self.token_price_eur),
            "totalTokens": str(self.total_tokens),
            "totalEur": str(self.total_eur.quantize(_CENT)),
            "perProductTokens": str(self.per_product_tokens),
            "perProductEur": str(self.per_product_eur.quantize(_CENT)),
        }


@dataclass(frozen=True)
class ReconciliationReport:
    analytic_tokens: Decimal
    ledger_tokens: Decimal

    @property
    def delta(self) -> Decimal:
        return self.ledger_tokens - self.analytic_tokens

    @property
    def ok(self) -> bool:
        return self.delta == 0

    def to_dict(self) -> dict:
        return {
            "analyticTokens": str(self.analytic_tokens),
            "ledgerTokens": str(self.ledger_tokens),
            "delta": str(self.delta),
            "ok": self.ok,
        }


def _build(proposal: str, count: int, fixed: Decimal, per_product: Decimal, fees: FeeSchedule) -> CostReport:
    if not isinstance(count, int) or count < 0:
        raise ValidationError("product count must be a non-negative integer")
    total = fixed + per_product * count
    price = fees.token_price_eur
    return CostReport(
        proposal=proposal,
        product_count=count,
        token_price_eur=price,
        total_tokens=total,
        total_eur=total * price,
        per_product_tokens=per_product,
        per_product_eur=per_product * price,
    )


def manufacturer_cost_p081(products: int, fees: FeeSchedule = FeeSchedule()) -> CostReport:
    """Company DID plus, per product, a DID registration and one transfer update."""
    per_product = fees.create_did + fees.update_did
    return _build(PROPOSAL_DID, products, fees.create_did, per_product, fees)


def manufacturer_cost_p082(products: int, fees: FeeSchedule = FeeSchedule()) -> CostReport:
    """Company DID plus, per product, a status list and one registration."""
    per_product = fees.status_list_create + fees.status_list_update
    return _build(PROPOSAL_CHAIN, products, fees.create_did, per_product, fees)


def owner_update_cost(events: int, fees: FeeSchedule = FeeSchedule()) -> CostReport:
    """Document-update price per recorded event (repair, inspection, resale)."""
    return _build(PROPOSAL_DID, events, Decimal(0), fees.update_did, fees)


def anchored_event_cost(events: int, fees: FeeSchedule = FeeSchedule()) -> CostReport:
    """Per-event registration price when events anchor against a GTIN."""
    return _build(PROPOSAL_CHAIN, events, Decimal(0), fees.status_list_update, fees)


def per_product_ratio(fees: FeeSchedule = FeeSchedule()) -> Decimal:
    """How much more each product costs on the DID-per-product design."""
    did = manufacturer_cost_p081(1, fees).per_product_tokens
    chain = manufacturer_cost_p082(1, fees).per_product_tokens
    if chain == 0:
        raise ValidationError("per-product cost of the chain design is zero")
    return did / chain


def reconcile(
    analytic: CostReport,
    ledger: Union[Ledger, Iterable[LedgerTransaction]],
) -> ReconciliationReport:
    """Compare an analytic total with the fees actually debited on a ledger.

    The ledger must cover the same scenario: when a full ledger is given its
    genesis token price must match the analytic report's, otherwise the
    comparison is meaningless and rejected.
    """
    if isinstance(ledger, Ledger):
        if ledger.fees.token_price_eur != analytic.token_price_eur:
            raise ValidationError(
                "scenario mismatch: ledger and analytic report use different token prices"
            )
        transactions: Iterable[LedgerTransaction] = ledger.transactions
    else:
        transactions = ledger
    charged = sum((tx.fee for tx in transactions), Decimal(0))
    return ReconciliationReport(analytic_tokens=analytic.total_tokens, ledger_tokens=charged)
