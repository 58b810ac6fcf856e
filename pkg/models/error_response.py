"""
Error payloads returned by the HTTP API
"""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

# Exception attributes copied into ``details`` when present
CONTEXT_ATTRIBUTES = ("iteration", "seed", "expected", "actual")


class ErrorCategory(str, Enum):
    PARAMETER = "parameter"
    DECODER = "decoder"
    ANALYSIS = "analysis"
    OUTER_CODE = "outer_code"
    SIMULATION = "simulation"
    RESOURCE = "resource"
    APPLICATION = "application"
    VALIDATION = "validation"
    UNKNOWN = "unknown"


class ErrorResponse(BaseModel):
    """
    Body of every non-2xx response

    ``details`` carries the decoder iteration, trial seed or the offending
    dimensions when the exception knows them.
    """

    error: str = Field(..., description="Error type identifier, e.g. INVALID_PARAMETER_ERROR")
    message: str = Field(..., description="What went wrong")
    suggestion: str = Field(..., description="How to fix the request")
    category: ErrorCategory = Field(default=ErrorCategory.UNKNOWN, description="Coarse error group")
    job_id: Optional[str] = Field(default=None, description="Simulation job the error belongs to")
    timestamp: str = Field(
        default_factory=lambda: datetime.now().isoformat(),
        description="ISO 8601 time of the error"
    )
    details: Optional[Dict[str, Any]] = Field(default=None, description="Numeric context of the failure")

    model_config = {
        "json_schema_extra": {
            "example": {
                "error": "DIMENSION_MISMATCH_ERROR",
                "message": "received vector has length 500, expected 512",
                "suggestion": "The received vector must have n = ceil(L log2 M / R) entries",
                "category": "parameter",
                "job_id": None,
                "timestamp": "2026-01-15T10:30:00.000",
                "details": {"expected": 512, "actual": 500}
            }
        }
    }


def _context(exception: Exception) -> Optional[Dict[str, Any]]:
    from utils.results import to_plain

    details = {
        name: to_plain(getattr(exception, name))
        for name in CONTEXT_ATTRIBUTES
        if getattr(exception, name, None) is not None
    }
    return details or None


def error_from_exception(exception: Exception, job_id: Optional[str] = None) -> ErrorResponse:
    """
    Build the response body for an exception raised while serving a request

    Args:
        exception: Exception to convert
        job_id: Simulation job id taken from the request path, if any

    Returns:
        ErrorResponse instance
    """
    from exceptions import SparcError, categorize_error

    if isinstance(exception, SparcError):
        error_type = exception.get_error_type()
        message = exception.message
        suggestion = exception.suggestion
    else:
        error_type = "INTERNAL_SERVER_ERROR"
        message = str(exception) or "An unexpected error occurred"
        suggestion = "Please report this together with the request that triggered it"

    try:
        category = ErrorCategory(categorize_error(exception))
    except ValueError:
        category = ErrorCategory.UNKNOWN

    return ErrorResponse(
        error=error_type,
        message=message,
        suggestion=suggestion,
        category=category,
        job_id=job_id,
        details=_context(exception),
    )
