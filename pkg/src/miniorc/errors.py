"""Common error base for all service modules.

Every error raised across module boundaries carries a stable machine
``code`` so the gateway can map it to exactly one (HTTP status, code)
pair. Module-specific exceptions subclass :class:`MiniorcError`.
"""

from __future__ import annotations


class MiniorcError(Exception):
    """Base class for all module errors.

    Attributes:
        code: stable machine token, e.g. ``UNKNOWN_SITE``.
        detail: optional structured context for the API error body.
    """

    code = "INTERNAL"

    def __init__(self, message: str = "", *, code: str | None = None, detail: object = None):
        super().__init__(message or self.__class__.code)
        if code is not None:
            self.code = code
        self.detail = detail

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else self.code
