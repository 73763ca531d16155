"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` used by the CLI when it
prints ``ERROR <code>: <message>``.
"""


class PhotoAuthorError(Exception):
    code = "Error"


class MalformedLine(PhotoAuthorError):
    code = "MalformedLine"

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DuplicatePhotoId(PhotoAuthorError):
    code = "DuplicatePhotoId"


class EmptyManifest(PhotoAuthorError):
    code = "EmptyManifest"


class TooFewRecords(PhotoAuthorError):
    code = "TooFewRecords"


class EmptyImage(PhotoAuthorError):
    code = "EmptyImage"


class ImageTooSmall(PhotoAuthorError):
    code = "ImageTooSmall"


class TooFewDescriptors(PhotoAuthorError):
    code = "TooFewDescriptors"


class DimensionMismatch(PhotoAuthorError):
    code = "DimensionMismatch"


class IoFailure(PhotoAuthorError):
    code = "IoFailure"


class BadMagic(PhotoAuthorError):
    code = "BadMagic"


class TruncatedFile(PhotoAuthorError):
    code = "TruncatedFile"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class LengthMismatch(PhotoAuthorError):
    code = "LengthMismatch"


class SingleClass(PhotoAuthorError):
    code = "SingleClass"


class MissingFeatureRow(PhotoAuthorError):
    code = "MissingFeatureRow"


class NonPositiveC(PhotoAuthorError):
    code = "NonPositiveC"


class EmptyTestSet(PhotoAuthorError):
    code = "EmptyTestSet"


class EmptyClass(PhotoAuthorError):
    code = "EmptyClass"


class CyclicHierarchy(PhotoAuthorError):
    code = "CyclicHierarchy"


class UnknownSynset(PhotoAuthorError):
    code = "UnknownSynset"


class MissingLabel(PhotoAuthorError):
    code = "MissingLabel"


class UnknownAuthor(PhotoAuthorError):
    code = "UnknownAuthor"


class TooFewPoints(PhotoAuthorError):
    code = "TooFewPoints"


class BadPerplexity(PhotoAuthorError):
    code = "BadPerplexity"


class TooFewAuthors(PhotoAuthorError):
    code = "TooFewAuthors"


class UnknownAuthorInGroups(PhotoAuthorError):
    code = "UnknownAuthorInGroups"


class NoPredictions(PhotoAuthorError):
    code = "NoPredictions"


class UnknownObjectClass(PhotoAuthorError):
    code = "UnknownObjectClass"


class BboxOutOfBounds(PhotoAuthorError):
    code = "BboxOutOfBounds"


class NoBackgroundForScene(PhotoAuthorError):
    code = "NoBackgroundForScene"


class RetriesExhausted(PhotoAuthorError):
    code = "RetriesExhausted"


class MissingCrop(PhotoAuthorError):
    code = "MissingCrop"


class MaskShapeMismatch(PhotoAuthorError):
    code = "MaskShapeMismatch"


class UnknownSubcommand(PhotoAuthorError):
    code = "UnknownSubcommand"


class BadFlag(PhotoAuthorError):
    code = "BadFlag"
