"""
Data models for the SPARC toolkit
"""
from .code_params import CodeParams, MessageVector, ErrorMetrics
from .power_allocation import PAScheme, PowerAllocation
from .decoder import DecoderConfig, DecoderState, TauMode, Termination
from .analysis import SEMode, SETrajectory, MonteCarloEstimate, ErrorPrediction
from .outer_code import OuterCodeLayout, ParityCheckMatrix, ThreeStageResult
from .simulation import OperatorKind, TrialConfig, TrialRecord, SweepPoint, SweepResult, JobStatus, SimulationJob
from .error_response import ErrorResponse, ErrorCategory, error_from_exception

__all__ = [
    "CodeParams",
    "MessageVector",
    "ErrorMetrics",
    "PAScheme",
    "PowerAllocation",
    "DecoderConfig",
    "DecoderState",
    "TauMode",
    "Termination",
    "SEMode",
    "SETrajectory",
    "MonteCarloEstimate",
    "ErrorPrediction",
    "OuterCodeLayout",
    "ParityCheckMatrix",
    "ThreeStageResult",
    "OperatorKind",
    "TrialConfig",
    "TrialRecord",
    "SweepPoint",
    "SweepResult",
    "JobStatus",
    "SimulationJob",
    "ErrorResponse",
    "ErrorCategory",
    "error_from_exception",
]
