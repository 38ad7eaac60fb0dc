"""Python bindings for spock, a signed-provenance build gatekeeper.

Records come back as plain dicts with the same keys as ``spock --json``.
Errors raise :class:`SpockError` with ``args == (token, message)``, where
token is the CLI's stable error token such as ``"E_PURGED"``.
"""

from ._spock import Ledger, PrivateKey, SpockError, digest, run_cli, verify

__all__ = ["Ledger", "PrivateKey", "SpockError", "digest", "run_cli", "verify"]
__version__ = "0.1.0"
