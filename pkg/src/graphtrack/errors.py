"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Raised when an argument or configuration violates a documented precondition."""


class TapeReuseError(RuntimeError):
    """Raised when a backward pass is attempted on an already-consumed tape."""


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite.

    Carries the epoch index at which divergence was detected.
    """

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")
