"""Reference embedding provider: encoders and variants behind the wire protocol."""

from .bankio import BankRecord, read_bank_file, write_bank_file
from .encoders import ClipEncoder, FixtureEncoder, build_encoder
from .extract import ViewSettings, batch_extract
from .llm import VariantGenerator, VariantsUnavailable
from .service import ServiceConfig, create_app

__version__ = "0.1.0"

__all__ = [
    "BankRecord",
    "ClipEncoder",
    "FixtureEncoder",
    "ServiceConfig",
    "VariantGenerator",
    "VariantsUnavailable",
    "ViewSettings",
    "batch_extract",
    "build_encoder",
    "create_app",
    "read_bank_file",
    "write_bank_file",
]
