from .app import create_app
from .coordinator import InteractiveProvider, SessionCoordinator

__all__ = ["create_app", "InteractiveProvider", "SessionCoordinator"]
