from src.exceptions import NumericException


class TrainingDivergedException(NumericException):
    """Exception raised when the training loss stops being finite."""

    def __init__(self, stage: str, epoch: int, step: int, loss: float):
        super().__init__(
            message=f"{stage} diverged at epoch {epoch}, step {step}: loss={loss}",
            error_code="TRAINING_DIVERGED",
            details={"stage": stage, "epoch": epoch, "step": step, "loss": loss},
        )
