"""
SPARC Toolkit - FastAPI Backend
Main application entry point
"""
import logging
from contextlib import asynccontextmanager
from datetime import datetime
from typing import Optional

from fastapi import FastAPI, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from config import settings
from exceptions import (
    InvalidParameterError,
    JobNotFoundError,
    JobNotReadyError,
    ResourceLimitError,
    SparcError,
)
from models.error_response import error_from_exception
from services.job_manager import JobManager
from services.resource_monitor import ResourceMonitor

# Configure logging
logging.basicConfig(
    level=settings.log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

# Global service instances
resource_monitor: ResourceMonitor = None
job_manager: JobManager = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Lifespan context manager for startup and shutdown events
    """
    logger.info("Starting SPARC Toolkit API...")

    global resource_monitor, job_manager

    resource_monitor = ResourceMonitor(
        max_jobs=settings.max_concurrent_jobs,
        max_memory_percent=settings.max_memory_percent
    )
    job_manager = JobManager(
        resource_monitor=resource_monitor,
        results_dir=settings.results_dir
    )

    logger.info("All services initialized successfully")

    yield

    logger.info("Shutting down SPARC Toolkit API...")
    if job_manager:
        await job_manager.shutdown()
    logger.info("Shutdown complete")


app = FastAPI(
    title="SPARC Toolkit",
    description="Sparse regression codes: power allocation, AMP decoding, state evolution and simulation",
    version=VERSION,
    lifespan=lifespan
)

allowed_origins = settings.cors_origins.split(",")

app.add_middleware(
    CORSMiddleware,
    allow_origins=[origin.strip() for origin in allowed_origins],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

from endpoints.sparc_endpoints import router as sparc_router
from endpoints.simulation_endpoints import router as simulation_router

app.include_router(sparc_router, prefix="/api/v1", tags=["design"])
app.include_router(simulation_router, prefix="/api/v1", tags=["simulation"])


# Custom exception handlers
@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    """
    Handle request validation errors
    """
    logger.warning(f"Validation error: {exc.errors()}")
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={
            "error": "VALIDATION_ERROR",
            "message": "Invalid request data",
            "details": [{"loc": list(e.get("loc", ())), "msg": e.get("msg")} for e in exc.errors()],
            "suggestion": "Please check your request parameters and try again"
        }
    )


@app.exception_handler(SparcError)
async def sparc_exception_handler(request: Request, exc: SparcError):
    """
    Handle all toolkit errors
    """
    logger.error(f"{exc.__class__.__name__}: {str(exc)}")

    error_response = error_from_exception(exc, job_id=request.path_params.get("job_id"))

    if isinstance(exc, InvalidParameterError):
        status_code = status.HTTP_400_BAD_REQUEST
    elif isinstance(exc, JobNotFoundError):
        status_code = status.HTTP_404_NOT_FOUND
    elif isinstance(exc, JobNotReadyError):
        status_code = status.HTTP_409_CONFLICT
    elif isinstance(exc, ResourceLimitError):
        status_code = status.HTTP_503_SERVICE_UNAVAILABLE
    else:
        status_code = status.HTTP_500_INTERNAL_SERVER_ERROR

    return JSONResponse(
        status_code=status_code,
        content=error_response.model_dump(mode="json")
    )


@app.exception_handler(Exception)
async def general_exception_handler(request: Request, exc: Exception):
    """
    Handle all other exceptions
    """
    logger.error(f"Unexpected error: {str(exc)}", exc_info=True)
    error_response = error_from_exception(exc)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content=error_response.model_dump(mode="json")
    )


class HealthResponse(BaseModel):
    """Response model for /health endpoint"""
    status: str
    version: str
    timestamp: str
    active_jobs: int
    system_metrics: Optional[dict] = None


@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": "SPARC Toolkit API",
        "version": VERSION,
        "status": "running"
    }


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """
    Health check endpoint

    Reports "degraded" with status 200 when metrics cannot be collected.
    """
    try:
        active_jobs = job_manager.get_active_job_count()
        metrics = resource_monitor.get_system_metrics(active_jobs)
        return HealthResponse(
            status="healthy",
            version=VERSION,
            timestamp=datetime.now().isoformat(),
            active_jobs=active_jobs,
            system_metrics=metrics.to_dict()
        )
    except Exception as e:
        logger.error(f"Health check error: {str(e)}")
        return HealthResponse(
            status="degraded",
            version=VERSION,
            timestamp=datetime.now().isoformat(),
            active_jobs=0,
            system_metrics=None
        )
