from __future__ import annotations

from dataclasses import dataclass


class BattleError(Exception):
    """Base class for all simulator errors."""


class DomainError(BattleError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class ContractError(BattleError):
    """A caller violated the calling contract of an operation."""


class UnsupportedOperationError(BattleError):
    pass


class UndefinedSnrError(DomainError):
    pass


class SearchFailedError(BattleError):
    def __init__(self, message: str, diagnostics: dict[str, object] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class Diagnostic:
    location: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.location}: {self.message}"


class ConfigError(BattleError):
    """Experiment configuration is unreadable or invalid."""

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))
