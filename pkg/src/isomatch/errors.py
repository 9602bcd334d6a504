"""Exception hierarchy shared by every estimator in the package."""


class IsomatchError(Exception):
    """Base class for domain errors; the CLI maps these to exit code 1."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class MissingColumn(IsomatchError):
    pass


class NonBinaryTreatment(IsomatchError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NonFiniteValue(IsomatchError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DegenerateSample(IsomatchError):
    pass


class DimensionMismatch(IsomatchError):
    pass


class NonUnitAlpha(IsomatchError):
    pass


class WindowTooLarge(IsomatchError):
    pass


class InternalConsistencyError(IsomatchError):
    pass


class EmptyMatchedSet(IsomatchError):
    def __init__(self, message: str, blocks: list[int] | None = None):
        super().__init__(message)
        self.blocks = list(blocks or [])

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["blocks"] = self.blocks
        return out


class DegeneratePropensity(IsomatchError):
    pass


class OptimizerFailed(IsomatchError):
    pass


class AllReplicatesFailed(IsomatchError):
    pass


class TooFewReplicates(IsomatchError):
    pass


class Separation(IsomatchError):
    pass


class RankDeficient(IsomatchError):
    pass


class UnsupportedDesign(IsomatchError):
    pass
