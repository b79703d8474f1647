from .app import create_app
from .model import ALPHABET, TinyMaskedLm

__all__ = ["ALPHABET", "TinyMaskedLm", "create_app"]
__version__ = "0.1.0"
