"""Exception hierarchy shared by every germlab module."""


class GermlabError(Exception):
    """Base class for all germlab errors."""


class DomainError(GermlabError, ValueError):
    """An argument lies outside the set where an operation is defined."""


class ConfigError(GermlabError, ValueError):
    """Inconsistent or incomplete configuration."""


class ConstructionError(GermlabError, RuntimeError):
    """A constructed object failed one of its verified invariants."""


class GlueError(GermlabError, RuntimeError):
    """Chart-local distributions failed the overlap condition."""


class NonConvergenceError(GermlabError, RuntimeError):
    """A dyadic sequence did not settle within the allowed depth."""
