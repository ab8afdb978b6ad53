"""dppkit: digital product passports over decentralised identifiers.

A library plus CLI implementing two passport designs on a simulated
fee-charging verifiable data registry: DID-per-product with controller
transfer and event anchoring, and GTIN-anchored transfer-credential chains
with revocation.
"""

__version__ = "0.1.0"
