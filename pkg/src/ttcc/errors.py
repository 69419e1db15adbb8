"""Exception hierarchy shared by every layer of the engine."""


class TTCCError(Exception):
    """Base class for all errors raised by this package."""


class ConstraintError(TTCCError):
    pass


class UnknownVariable(ConstraintError):
    def __init__(self, name):
        super().__init__("unknown variable %r" % name)
        self.name = name


class ValueOutOfDomain(ConstraintError):
    def __init__(self, value, max_value):
        super().__init__("constant %d outside domain 0..%d" % (value, max_value - 1))
        self.value = value
        self.max = max_value


class DomainTooLarge(ConstraintError):
    """The decision procedure ran past its configured budget."""


class EngineError(TTCCError):
    pass


class UnguardedRecursion(EngineError):
    def __init__(self, names, line=None, column=None):
        where = "" if line is None else "%d:%d: " % (line, column)
        super().__init__("%sUnguardedRecursion: %s" % (where, " -> ".join(names)))
        self.names = tuple(names)
        self.line = line
        self.column = column


class StepBudgetExceeded(EngineError):
    pass


class InconsistentStore(EngineError):
    """Raised by `run` when a tick ends with an inconsistent store."""

    def __init__(self, tick, record=None):
        super().__init__("store became inconsistent at tick %d" % tick)
        self.tick = tick
        self.record = record


class SourceError(TTCCError):
    """Located front-end diagnostic."""

    kind = "SourceError"

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = "" if line is None else "%d:%d: " % (line, column)
        super().__init__("%s%s: %s" % (where, self.kind, message))


class ParseError(SourceError):
    kind = "SyntaxError"


class ArityMismatch(SourceError):
    kind = "ArityMismatch"


class UnknownIdentifier(SourceError):
    kind = "UnknownIdentifier"


class ModelError(TTCCError):
    pass


class UnknownLink(ModelError):
    pass


class InconsistentVirtualLink(ModelError):
    pass


class ChainNotExercised(TTCCError):
    pass
