"""Shared exception types."""


class SizeGuardError(RuntimeError):
    """An enumeration was refused because it exceeds the configured size guard."""

    def __init__(self, what: str, size: int, guard: int):
        super().__init__(f"{what}: {size} elements exceeds guard {guard}")
        self.what = what
        self.size = size
        self.guard = guard
