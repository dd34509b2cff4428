"""Exception types shared across the package."""


class SumrouteError(Exception):
    """Base class for all package errors."""


class EmptyKeywordSet(SumrouteError):
    pass


class ReservedCharacter(SumrouteError):
    """A raw keyword contains the reserved terminator character."""


class CapacityExceeded(SumrouteError):
    """Hash tree capacity (2^c)^d is smaller than the keyword set."""


class RootHasNoParent(SumrouteError):
    pass


class MissingEmbedding(SumrouteError):
    def __init__(self, keyword: str):
        super().__init__(f"no embedding for keyword {keyword!r}")
        self.keyword = keyword


class UnknownKeyword(SumrouteError):
    def __init__(self, keyword: str):
        super().__init__(f"keyword {keyword!r} not present in tree")
        self.keyword = keyword


class EmptySCV(SumrouteError):
    pass


class MalformedTreeFile(SumrouteError):
    pass


class ExceedsStoredBits(SumrouteError):
    """grow_depth target exceeds the stored hash code length."""


class PolicyMismatch(SumrouteError):
    """Code kind does not match the configured summarization policy."""


class InfeasibleDegreeSequence(SumrouteError):
    pass


class ConfigInvalid(SumrouteError):
    def __init__(self, field: str, message: str):
        super().__init__(f"invalid config field {field!r}: {message}")
        self.field = field
