"""
Exceptions for cocarry with rich context and suggestions.

Every error carries a primary message, a context mapping and a list of
actionable suggestions, rendered together by ``__str__``.
"""

from typing import Any, Dict, List, Optional, Sequence


class CocarryError(Exception):
    """Base exception for cocarry errors."""

    def __init__(
        self,
        message: str,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        """Initialize error with rich context.

        Args:
            message: Primary error message
            context: Additional context (node name, shapes, key, ...)
            suggestions: Optional suggestions for fixing the error
        """
        super().__init__(message)
        self.message = message
        self.context = context or {}
        self.suggestions = suggestions or []

    def __str__(self) -> str:
        """Format error with context and suggestions."""
        parts = [self.message]

        if self.context:
            parts.append("\nContext:")
            parts.extend(f"  {k}: {v}" for k, v in self.context.items())

        if self.suggestions:
            parts.append("\nSuggestions:")
            for i, suggestion in enumerate(self.suggestions, 1):
                parts.append(f"  {i}. {suggestion}")

        return "\n".join(parts)


class ShapeError(CocarryError):
    """Array shape does not match an operation's contract."""

    def __init__(
        self,
        message: str,
        node: Optional[str] = None,
        expected: Optional[Sequence[Any]] = None,
        actual: Optional[Sequence[Any]] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if node is not None:
            context["node"] = node
        if expected is not None:
            context["expected"] = tuple(expected)
        if actual is not None:
            context["actual"] = tuple(actual)
        self.node = node
        self.expected = None if expected is None else tuple(expected)
        self.actual = None if actual is None else tuple(actual)
        super().__init__(message, context, suggestions)


class GradientError(CocarryError):
    """Backward pass or optimizer received invalid input."""

    def __init__(
        self,
        message: str,
        parameter: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if parameter is not None:
            context["parameter"] = parameter
        self.parameter = parameter
        super().__init__(message, context, suggestions)


class DivergenceError(GradientError):
    """Training produced a non-finite loss."""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        last_finite_loss: Optional[float] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if step is not None:
            context["step"] = step
        if last_finite_loss is not None:
            context["last_finite_loss"] = last_finite_loss
        if suggestions is None:
            suggestions = [
                "Lower the learning rate",
                "Check the dataset for non-finite wrench or velocity values",
            ]
        self.step = step
        super().__init__(message, context=context, suggestions=suggestions)


class ConfigError(CocarryError):
    """Invalid or unknown configuration."""

    def __init__(
        self,
        message: str,
        key: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if key is not None:
            context["key"] = key
        self.key = key
        super().__init__(message, context, suggestions)


class ScheduleError(CocarryError):
    """Invalid diffusion schedule or sampler arguments."""


class WaveletError(CocarryError):
    """Invalid wavelet transform input."""


class SimulationError(CocarryError):
    """Simulation state became invalid (unstable, non-finite, irregular)."""

    def __init__(
        self,
        message: str,
        time: Optional[float] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if time is not None:
            context["time"] = time
        self.time = time
        super().__init__(message, context, suggestions)


class ContainerError(CocarryError):
    """Artifact or log file could not be read."""

    def __init__(
        self,
        message: str,
        path: Optional[Any] = None,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        if path is not None:
            context["path"] = str(path)
        super().__init__(message, context, suggestions)


class VersionMismatchError(ContainerError):
    """Header is missing, corrupted or carries an unsupported version."""

    def __init__(
        self,
        message: str,
        path: Optional[Any] = None,
        found: Optional[Any] = None,
        expected: Optional[Any] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> None:
        context = dict(context or {})
        if found is not None:
            context["found"] = found
        if expected is not None:
            context["expected"] = expected
        super().__init__(
            message,
            path=path,
            context=context,
            suggestions=["Regenerate the file with this version of cocarry"],
        )


class TruncationError(ContainerError):
    """File ends before the payload its header declares."""

    def __init__(
        self,
        message: str,
        path: Optional[Any] = None,
        declared: Optional[int] = None,
        found: Optional[int] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> None:
        context = dict(context or {})
        if declared is not None:
            context["declared"] = declared
        if found is not None:
            context["found"] = found
        super().__init__(
            message,
            path=path,
            context=context,
            suggestions=["The file was likely cut short during writing; regenerate it"],
        )


class BoundDetectionError(CocarryError):
    """Start or end of a trial could not be detected."""

    def __init__(
        self,
        message: str,
        bound: str,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ) -> None:
        context = dict(context or {})
        context["bound"] = bound
        self.bound = bound
        if suggestions is None and bound == "end":
            suggestions = ["Use strict_end=False to accept a dwell that is not held to the end"]
        super().__init__(message, context, suggestions)


class MetricsError(CocarryError):
    """Metric inputs are inconsistent or the integration window is empty."""


__all__ = [
    "BoundDetectionError",
    "CocarryError",
    "ConfigError",
    "ContainerError",
    "DivergenceError",
    "GradientError",
    "MetricsError",
    "ScheduleError",
    "ShapeError",
    "SimulationError",
    "TruncationError",
    "VersionMismatchError",
    "WaveletError",
]
