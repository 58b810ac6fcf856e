"""
Code Design Endpoints
Power allocation, state evolution and error prediction without simulation

Handlers are synchronous so the numerical work runs in the FastAPI threadpool.
"""
import logging
import math
from typing import Optional, Tuple

from fastapi import APIRouter
from pydantic import BaseModel, Field

from models.analysis import SEMode
from models.code_params import CodeParams
from models.power_allocation import PAScheme, PowerAllocation
from services.core import make_code_params
from services.power_allocator import allocate, flattening_block
from services.state_evolution import predict_esec_closed, predict_se_esec, se_trajectory
from utils.results import to_plain

logger = logging.getLogger(__name__)

router = APIRouter()


class DesignRequest(BaseModel):
    """Code parameters and power allocation shared by the design endpoints"""
    L: int = Field(..., ge=1, description="Number of sections")
    M: int = Field(..., ge=2, description="Columns per section (power of two)")
    R: float = Field(..., gt=0, description="Rate in bits per real channel use")
    P: float = Field(..., gt=0, description="Average codeword power")
    sigma2: float = Field(default=1.0, ge=0, description="Noise variance")
    pa_scheme: PAScheme = Field(default=PAScheme.ITERATIVE, description="Power allocation scheme")
    rpa: Optional[float] = Field(default=None, ge=0, description="R_PA of the iterative scheme")
    blocks: Optional[int] = Field(default=None, ge=1, description="Blocks B of the iterative scheme")
    pa_a: float = Field(default=1.0, ge=0, description="Steepness a (modified exponential)")
    pa_f: float = Field(default=1.0, ge=0, le=1, description="Flattening fraction f (modified exponential)")


class SERequest(DesignRequest):
    mode: SEMode = Field(default=SEMode.ASYMPTOTIC, description="asymptotic or montecarlo")
    samples: Optional[int] = Field(default=None, ge=1, description="Monte-Carlo samples per step")
    seed: int = Field(default=0, ge=0, description="Monte-Carlo seed")


class PredictRequest(DesignRequest):
    method: str = Field(default="closed", pattern="^(closed|se)$", description="closed form or SE Monte-Carlo")
    quad_points: Optional[int] = Field(default=None, ge=1, description="Gauss-Hermite order")
    samples: Optional[int] = Field(default=None, ge=1, description="Monte-Carlo samples (method=se)")
    seed: int = Field(default=0, ge=0, description="Monte-Carlo seed (method=se)")


def _design(request: DesignRequest) -> Tuple[CodeParams, PowerAllocation]:
    params = make_code_params(request.L, request.M, request.R, request.P, request.sigma2)
    pa = allocate(
        request.pa_scheme,
        params,
        R_PA=request.rpa,
        B=request.blocks,
        a=request.pa_a,
        f=request.pa_f,
    )
    return params, pa


@router.post("/pa")
def power_allocation(request: DesignRequest):
    """Power allocation for the given code, with its flattening block."""
    params, pa = _design(request)
    blocks = request.blocks or params.L
    return to_plain({
        "params": params.to_dict(),
        "allocation": pa.to_dict(),
        "flattening_block": flattening_block(pa, blocks),
    })


@router.post("/se")
def state_evolution(request: SERequest):
    """State-evolution trajectory of the allocation."""
    params, pa = _design(request)
    trajectory = se_trajectory(pa, params, request.mode, samples=request.samples, seed=request.seed)
    logger.info(
        f"SE for L={params.L}, M={params.M}, R={params.R}: T={trajectory.T}, converged={trajectory.converged}"
    )
    return to_plain({"params": params.to_dict(), "trajectory": trajectory.to_dict()})


@router.post("/predict")
def predict(request: PredictRequest):
    """
    Predicted section and codeword error rates.

    ``closed`` evaluates the closed form at tau = sigma; ``se`` runs state
    evolution and estimates the section error rate at tau_T by Monte Carlo.
    """
    params, pa = _design(request)
    if request.method == "closed":
        prediction = predict_esec_closed(pa, math.sqrt(params.sigma2), params.n, params.M, request.quad_points)
        return to_plain({"params": params.to_dict(), "method": "closed", "prediction": prediction.to_dict()})

    trajectory = se_trajectory(pa, params)
    estimate = predict_se_esec(
        math.sqrt(trajectory.tau2_final), pa, params.n, params.M, request.samples, request.seed
    )
    return to_plain({
        "params": params.to_dict(),
        "method": "se",
        "tau2_final": trajectory.tau2_final,
        "converged": trajectory.converged,
        "esec": estimate.to_dict(),
    })
