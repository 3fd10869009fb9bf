"""Exception hierarchy shared by all ppir modules."""


class PpirError(Exception):
    """Base class for every error raised by this package."""


# gf
class FieldError(PpirError, ArithmeticError):
    pass


class DivisionByZero(FieldError, ZeroDivisionError):
    pass


class ModulusMismatch(FieldError, ValueError):
    pass


class FieldTooSmall(FieldError, ValueError):
    pass


class SingularMatrix(FieldError):
    pass


# capacity
class SingularSystem(PpirError, ArithmeticError):
    pass


class ImaginaryResidue(PpirError, ArithmeticError):
    pass


# dataset
class IndexOutOfClass(PpirError, IndexError):
    pass


class BadSeed(PpirError, ValueError):
    pass


class LambdaTooLarge(PpirError, ValueError):
    pass


class DatasetFormatError(PpirError, ValueError):
    pass


# schemes
class UnsupportedSingleDB(PpirError, ValueError):
    pass


class RegimeUnsupported(PpirError):
    """The requested (n, Γ, η) has no executable scheme here.

    ``capacity`` carries the analytic bounds so callers can still report them.
    """

    def __init__(self, message, capacity=None):
        super().__init__(message)
        self.capacity = capacity


class InconsistentTranscript(PpirError, ValueError):
    pass


class BadCandidate(PpirError, ValueError):
    pass


# audit
class BudgetExceeded(PpirError):
    pass


# net
class ProtocolError(PpirError):
    code = "protocol_error"


class MalformedFrame(ProtocolError):
    code = "malformed"


class UnknownKind(ProtocolError):
    code = "unknown_kind"


class OversizeFrame(ProtocolError):
    code = "oversize"


class RetrievalTimeout(PpirError):
    def __init__(self, db, message=None):
        super().__init__(message or f"database {db} timed out")
        self.db = db


class PartialFailure(PpirError):
    def __init__(self, db, message):
        super().__init__(f"database {db}: {message}")
        self.db = db
