import logging
from typing import Any, Callable, Dict, Optional, Type

from rich.console import Console
from rich.markup import escape

logger = logging.getLogger(__name__)


class CoarseCltException(Exception):
    """Base class for coarse-clt errors."""

    exit_code = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}


class GraphStructureException(CoarseCltException):
    """Exception raised for invalid graph structures or paths."""

    pass


class AutomatonFormatException(GraphStructureException):
    """Exception raised for malformed automaton documents."""

    pass


class GroupException(CoarseCltException):
    """Exception raised for invalid group data or words."""

    pass


class SpectralException(CoarseCltException):
    """Exception raised when Perron-Frobenius data cannot be computed."""

    pass


class MarkovException(CoarseCltException):
    """Exception raised for errors building or using the Parry chain."""

    pass


class CombingException(CoarseCltException):
    """Exception raised for errors in built-in combings."""

    pass


class ActionException(CoarseCltException):
    """Exception raised for errors evaluating isometric actions."""

    pass


class BudgetExceededException(CoarseCltException):
    """Exception raised when an enumeration would exceed the budget."""

    def __init__(self, detail: str, budget: int):
        super().__init__(f"{detail} (budget {budget})", {"budget": budget})
        self.budget = budget


class SamplingException(CoarseCltException):
    """Exception raised for errors in sphere or Markov sampling."""

    pass


class ExperimentException(CoarseCltException):
    """Exception raised by the experiment pipeline, annotated with its stage."""

    def __init__(self, stage: str, detail: str):
        super().__init__(f"[{stage}] {detail}", {"stage": stage})
        self.stage = stage


class VerificationFailedException(CoarseCltException):
    """Exception raised when the fixture suite has failing checks."""

    exit_code = 2


ExceptionHandler = Callable[[CoarseCltException], str]

_handlers: Dict[Type[CoarseCltException], ExceptionHandler] = {}


def exception_handler(exc_type: Type[CoarseCltException]):
    """Register a message formatter for an exception type."""

    def decorator(func: ExceptionHandler) -> ExceptionHandler:
        _handlers[exc_type] = func
        return func

    return decorator


def add_exception_handlers() -> None:
    """Register the default message formatters."""

    @exception_handler(CoarseCltException)
    def base_handler(exc: CoarseCltException) -> str:
        return exc.detail

    @exception_handler(AutomatonFormatException)
    def automaton_handler(exc: CoarseCltException) -> str:
        return f"Automaton error: {exc.detail}"

    @exception_handler(SpectralException)
    def spectral_handler(exc: CoarseCltException) -> str:
        return f"Spectral error: {exc.detail}"

    @exception_handler(MarkovException)
    def markov_handler(exc: CoarseCltException) -> str:
        return f"Markov chain error: {exc.detail}"

    @exception_handler(BudgetExceededException)
    def budget_handler(exc: CoarseCltException) -> str:
        return f"Budget exceeded: {exc.detail}"

    @exception_handler(ExperimentException)
    def experiment_handler(exc: CoarseCltException) -> str:
        return f"Experiment failed: {exc.detail}"

    @exception_handler(VerificationFailedException)
    def verification_handler(exc: CoarseCltException) -> str:
        return f"Verification failed: {exc.detail}"


def format_exception(exc: CoarseCltException) -> str:
    """Format an exception with the handler of its closest registered type."""
    if not _handlers:
        add_exception_handlers()
    for klass in type(exc).__mro__:
        handler = _handlers.get(klass)
        if handler is not None:
            return handler(exc)
    return str(exc)


def handle_exception(exc: CoarseCltException, console: Console) -> int:
    """Report an exception on the console and return the process exit code."""
    message = format_exception(exc)
    logger.debug(f"{type(exc).__name__}: {exc.detail} {exc.context}")
    console.print(f"[red]Error: {escape(message)}[/red]")
    return exc.exit_code
