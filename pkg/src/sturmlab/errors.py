"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` used by the command line front end.
"""

from __future__ import annotations


class SturmError(Exception):
    exit_code = 4

    def to_json(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(SturmError, ValueError):
    exit_code = 2


class RationalInput(SturmError, ValueError):
    exit_code = 2


class InsufficientPrecision(SturmError):
    exit_code = 3


class Exhausted(SturmError, IndexError):
    exit_code = 2


class ZeroInput(SturmError, ZeroDivisionError):
    exit_code = 2


class AmbiguousSign(SturmError):
    exit_code = 3


class CouplingTooSmall(ConfigError):
    pass


class CountMismatch(SturmError):
    exit_code = 3

    def __init__(self, expected, found, where: str = ""):
        self.expected = expected
        self.found = found
        msg = f"expected {expected} bands, found {found}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)

    def to_json(self) -> dict:
        d = super().to_json()
        d["expected"] = self.expected
        d["found"] = self.found
        return d


class PrecisionExhausted(SturmError):
    exit_code = 3


class InadmissibleWord(SturmError, ValueError):
    exit_code = 2


class LengthOutOfRange(SturmError, ValueError):
    exit_code = 4


class DegenerateScales(SturmError, ValueError):
    exit_code = 2


class InvariantViolation(SturmError):
    exit_code = 4
