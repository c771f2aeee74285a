"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument or file violates a documented precondition or invariant."""


class NonFiniteLossError(ArithmeticError):
    """Training produced a NaN/inf loss; carries the offending utterance index."""

    def __init__(self, message: str, utterance_index: int | None = None):
        super().__init__(message)
        self.utterance_index = utterance_index
