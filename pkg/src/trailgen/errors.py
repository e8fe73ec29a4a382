class StageError(Exception):
    """A pipeline stage cannot proceed (bad input, exhausted reprompts, ...)."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
