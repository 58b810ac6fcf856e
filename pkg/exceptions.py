"""
Custom Exception Classes
Centralized error handling with categorization and user-friendly messages
"""
import re
from datetime import datetime
from typing import Optional


class SparcError(Exception):
    """
    Base exception for all SPARC toolkit errors

    All custom exceptions inherit from this base class so callers
    (CLI, HTTP handlers, the trial runner) can treat them uniformly.
    """

    def __init__(self, message: str, suggestion: str = None):
        """
        Initialize SparcError

        Args:
            message: Error message describing what went wrong
            suggestion: Optional suggestion for resolving the error
        """
        self.message = message
        self.suggestion = suggestion or "Check the inputs and try again"
        super().__init__(self.message)

    def get_error_type(self) -> str:
        """
        Get the error type identifier

        Returns:
            SNAKE_CASE identifier ending in _ERROR
        """
        name = self.__class__.__name__.replace("Error", "")
        name = re.sub('([a-z0-9])([A-Z])', r'\1_\2', name)
        return name.upper() + "_ERROR"

    def to_dict(self) -> dict:
        """
        Convert error to dictionary for API responses and CLI output

        Returns:
            Dictionary with error details
        """
        return {
            "error": self.get_error_type(),
            "message": self.message,
            "suggestion": self.suggestion
        }


# Parameter Errors
class InvalidParameterError(SparcError):
    """
    Raised when an operation's preconditions are violated

    Examples: non-positive rate, M not a power of two, B not dividing L.
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Check the code parameters against the documented ranges"
        super().__init__(message, suggestion)


class DimensionMismatchError(InvalidParameterError):
    """
    Raised when vector or matrix dimensions are inconsistent
    """

    def __init__(self, what: str, expected, actual, suggestion: str = None):
        message = f"Dimension mismatch for {what}: expected {expected}, got {actual}"
        if suggestion is None:
            suggestion = "Make sure every input was built from the same CodeParams"
        super().__init__(message, suggestion)
        self.expected = expected
        self.actual = actual


class OperatorSizeError(InvalidParameterError):
    """
    Raised when a design operator would exceed its size limit
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Use the fast Hadamard operator or reduce L, M or n"
        super().__init__(message, suggestion)


# Decoder Errors
class DecoderDivergenceError(SparcError):
    """
    Raised when an AMP iterate contains non-finite values
    """

    def __init__(self, iteration: int, quantity: str, suggestion: str = None):
        message = f"AMP diverged at iteration {iteration}: non-finite {quantity}"
        if suggestion is None:
            suggestion = "Lower the rate or check the power allocation and noise variance"
        super().__init__(message, suggestion)
        self.iteration = iteration


# Analysis Errors
class QuadratureError(SparcError):
    """
    Raised when the closed-form error prediction does not converge
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Increase quad_points"
        super().__init__(message, suggestion)


# Outer Code Errors
class OuterCodeError(SparcError):
    """
    Raised for LDPC outer-code failures
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Check the parity-check matrix and the section layout"
        super().__init__(message, suggestion)


class LayoutError(OuterCodeError):
    """
    Raised when the outer code does not fit inside the SPARC
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Use a shorter LDPC code or more sections"
        super().__init__(message, suggestion)


class AlistFormatError(OuterCodeError):
    """
    Raised when an alist file cannot be parsed
    """

    def __init__(self, path: str, reason: str, suggestion: str = None):
        message = f"Malformed alist file {path}: {reason}"
        if suggestion is None:
            suggestion = "The file must follow the standard alist layout (n m / degrees / adjacency)"
        super().__init__(message, suggestion)


class RankDeficientError(OuterCodeError):
    """
    Raised when a parity-check matrix admits no systematic encoder
    """

    def __init__(self, rank: int, rows: int, suggestion: str = None):
        message = f"Parity-check matrix is rank deficient (rank {rank} < {rows} checks)"
        if suggestion is None:
            suggestion = "Remove redundant checks from the parity-check matrix"
        super().__init__(message, suggestion)


# Simulation Errors
class SimulationError(SparcError):
    """
    Raised when a simulation sweep cannot be configured or run
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "Check the sweep configuration"
        super().__init__(message, suggestion)


class TrialAbortedError(SimulationError):
    """
    Raised when a single Monte-Carlo trial fails
    """

    def __init__(self, seed: int, reason: str, suggestion: str = None):
        message = f"Trial with seed {seed} aborted: {reason}"
        if suggestion is None:
            suggestion = "The sweep continues; inspect the trial record for details"
        super().__init__(message, suggestion)
        self.seed = seed


# Resource Limit Errors
class ResourceLimitError(SparcError):
    """
    Raised when system resource limits are exceeded
    """

    def __init__(self, message: str, suggestion: str = None):
        if suggestion is None:
            suggestion = "System resources are currently limited. Please try again in a few minutes"
        super().__init__(message, suggestion)


class MaxJobsError(ResourceLimitError):
    """
    Raised when the concurrent simulation job limit is reached
    """

    def __init__(self, max_jobs: int, suggestion: str = None):
        message = f"Maximum concurrent simulation jobs reached ({max_jobs})"
        if suggestion is None:
            suggestion = "Wait for running jobs to finish or try again later"
        super().__init__(message, suggestion)


class MemoryLimitError(ResourceLimitError):
    """
    Raised when memory usage is too high to start a job
    """

    def __init__(self, memory_percent: float, suggestion: str = None):
        message = f"System memory usage too high ({memory_percent:.1f}%)"
        if suggestion is None:
            suggestion = "System is under heavy load. Please try again in a few minutes"
        super().__init__(message, suggestion)


# Job Management Errors
class JobNotFoundError(SparcError):
    """
    Raised when a requested simulation job doesn't exist
    """

    def __init__(self, job_id: str, suggestion: str = None):
        message = f"Job not found: {job_id}"
        if suggestion is None:
            suggestion = "The job id may be wrong or the server was restarted"
        super().__init__(message, suggestion)


class JobNotReadyError(SparcError):
    """
    Raised when a job result is requested before the job finished
    """

    def __init__(self, job_id: str, status: str, suggestion: str = None):
        message = f"Job {job_id} is not finished (status: {status})"
        if suggestion is None:
            suggestion = "Poll the job status until it reports completed"
        super().__init__(message, suggestion)


# Helper function to categorize errors
def categorize_error(error: Exception) -> str:
    """
    Categorize an error into a coarse category

    Args:
        error: Exception to categorize

    Returns:
        Category string (parameter, decoder, analysis, outer_code,
        simulation, resource, application, or unknown)
    """
    if isinstance(error, InvalidParameterError):
        return "parameter"
    elif isinstance(error, DecoderDivergenceError):
        return "decoder"
    elif isinstance(error, QuadratureError):
        return "analysis"
    elif isinstance(error, OuterCodeError):
        return "outer_code"
    elif isinstance(error, SimulationError):
        return "simulation"
    elif isinstance(error, ResourceLimitError):
        return "resource"
    elif isinstance(error, SparcError):
        return "application"
    else:
        return "unknown"


# Helper function to get error response
def get_error_response(error: Exception, job_id: Optional[str] = None) -> dict:
    """
    Convert any exception to a standardized error dictionary

    Args:
        error: Exception to convert
        job_id: Optional simulation job associated with the error

    Returns:
        Dictionary with error details
    """
    if isinstance(error, SparcError):
        response = error.to_dict()
    else:
        response = {
            "error": "INTERNAL_ERROR",
            "message": str(error) if str(error) else "An unexpected error occurred",
            "suggestion": "Please report this together with the command or request that triggered it"
        }

    if job_id:
        response["job_id"] = job_id

    response["timestamp"] = datetime.now().isoformat()
    response["category"] = categorize_error(error)

    return response
