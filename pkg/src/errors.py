# src/errors.py
"""
Исключения лаборатории.

Все «отклонённые входы» операций - это InvalidInputError (наследник ValueError,
поэтому привычный `except ValueError` тоже работает).
"""

from __future__ import annotations

from typing import Optional


class LabError(Exception):
    """Базовое исключение проекта."""


class InvalidInputError(LabError, ValueError):
    """Нарушено предусловие операции (n < 1, sigma <= 0, J меньше носителя и т.п.)."""


class ConfigError(InvalidInputError):
    """
    Ошибка конфигурации эксперимента с указанием конкретного поля.
    """

    def __init__(self, field: str, message: str, value: Optional[object] = None) -> None:
        self.field = field
        self.value = value
        self.message = message
        super().__init__(f"config field '{field}': {message}")


class AcceptanceError(LabError):
    """Проверка приёмки не прошла (CLI завершает работу с ненулевым кодом)."""
