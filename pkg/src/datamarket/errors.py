"""Exception types shared across the package."""

from __future__ import annotations


class MarketError(Exception):
    """Base class for data errors raised by the marketplace engine."""


class ParseError(MarketError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class MissingOffer(MarketError, KeyError):
    pass


class UnknownProduct(MarketError, KeyError):
    pass


class UnknownGraph(MarketError, KeyError):
    pass


class MissingValue(MarketError, KeyError):
    pass


class TooLarge(MarketError, ValueError):
    pass


class MissingPair(MarketError, KeyError):
    pass


class SettlementMismatch(MarketError, ValueError):
    pass
