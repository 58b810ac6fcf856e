"""
Seeded Monte-Carlo simulation over an Eb/N0 grid.

Trial t of every Eb/N0 point uses seed = base_seed + t. Inside a trial,
``SeedSequence(seed).spawn(3)`` gives independent streams for the message
bits, the design operator and the channel noise, so a record depends only on
(config, seed) and never on worker count or scheduling.
"""
import logging
import math
import time
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import psutil
from tqdm import tqdm

from config import settings
from exceptions import InvalidParameterError, SimulationError
from models.code_params import CodeParams
from models.decoder import DecoderConfig, TauMode
from models.outer_code import OuterCodeLayout
from models.power_allocation import PAScheme, PowerAllocation
from models.simulation import SweepPoint, SweepResult, TrialConfig, TrialRecord
from services.amp_decoder import amp_decode, encode, estimate_remaining_errors, hard_decision
from services.core import (
    bits_to_message,
    derive_code_length,
    ebn0_to_snr,
    measure_errors,
    message_to_bits,
    random_bits,
)
from services.design_operator import DesignOperator, new_operator
from services.ldpc import SystematicEncoder, build_encoder
from services.outer_code import ThreeStageDecoder, outer_encode, plan_layout
from services.power_allocator import allocate, rpa_grid
from services.state_evolution import predict_esec_closed, se_trajectory
from utils.alist import read_alist

logger = logging.getLogger(__name__)

PRNG_NAME = "PCG64"
# Noise level P and the power allocation are designed for on a noiseless channel
REFERENCE_SIGMA2 = 1.0

# Reports (trials done, trials total) across the whole sweep
ProgressCallback = Callable[[int, int], None]


def awgn(x: np.ndarray, sigma2: float, seed) -> np.ndarray:
    """
    y = x + w with w i.i.d. N(0, sigma2).

    Args:
        x: Codeword
        sigma2: Noise variance (0 returns a copy of x)
        seed: Integer seed, SeedSequence or Generator

    Raises:
        InvalidParameterError: On sigma2 < 0
    """
    if sigma2 < 0:
        raise InvalidParameterError(f"sigma2 must be >= 0, got {sigma2}")
    x = np.asarray(x, dtype=float)
    if sigma2 == 0:
        return x.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return x + rng.normal(0.0, math.sqrt(sigma2), size=x.shape)


def trial_streams(seed: int):
    """(bits, operator, noise) seed sequences of one trial."""
    return np.random.SeedSequence(seed).spawn(3)


def operator_seed_for(config: TrialConfig, seed: int) -> int:
    """Operator seed of a trial: base_seed when fixed, otherwise drawn from the trial seed."""
    if config.fixed_operator:
        return config.base_seed
    return int(trial_streams(seed)[1].generate_state(1, dtype=np.uint64)[0])


def decoder_config(config: TrialConfig) -> DecoderConfig:
    return DecoderConfig(
        max_iterations=config.max_iterations,
        early_stop_threshold=config.early_stop,
        tau_mode=TauMode(config.tau_mode),
    )


@dataclass
class PointContext:
    """Everything a worker needs for the trials of one Eb/N0 point."""
    config: TrialConfig
    ebn0_db: float
    params: CodeParams
    pa: PowerAllocation
    cfg: DecoderConfig
    tau2_schedule: Optional[Sequence[float]] = None
    outer: Optional[ThreeStageDecoder] = None
    operator: Optional[DesignOperator] = None

    @property
    def user_bits(self) -> int:
        return self.outer.layout.user_bits if self.outer is not None else self.params.message_bits


def run_trial(context: PointContext, seed: int) -> TrialRecord:
    """
    One encode / channel / decode round trip.

    Failures are logged and returned as aborted records.
    """
    config, params, pa = context.config, context.params, context.pa
    bits_stream, _, noise_stream = trial_streams(seed)
    operator_seed = operator_seed_for(config, seed)
    try:
        op = context.operator or new_operator(config.operator, params.n, params.L, params.M, operator_seed)
        user_bits = random_bits(context.user_bits, np.random.default_rng(bits_stream))
        if context.outer is not None:
            sparc_bits = outer_encode(user_bits, context.outer.encoder, context.outer.layout)
        else:
            sparc_bits = user_bits
        beta = bits_to_message(sparc_bits, pa, params)
        y = awgn(encode(beta, op), params.sigma2, noise_stream)

        diagnostics = None
        if context.outer is not None:
            result = context.outer.decode(y, op)
            beta_hat, bits_hat = result.beta_hat, result.user_bits
            first = result.first_stage
            iterations, tau2_final = result.iterations_run, result.tau2_final
            diagnostics = result.diagnostics()
        else:
            first = amp_decode(y, op, pa, params, context.cfg, tau2_schedule=context.tau2_schedule)
            beta_hat = hard_decision(first, pa, params.n)
            bits_hat = message_to_bits(beta_hat)
            iterations, tau2_final = first.iterations_run, first.tau2_final

        metrics = measure_errors(beta_hat, beta, bits_hat, user_bits)
        return TrialRecord(
            seed=seed,
            ebn0_db=context.ebn0_db,
            section_errors=metrics.section_errors,
            bit_errors=metrics.bit_errors,
            cw_error=metrics.cw_error,
            iterations_run=iterations,
            tau2_final=tau2_final,
            estimated_section_errors=estimate_remaining_errors(first, pa, params.sigma2, params.n),
            operator_seed=operator_seed,
            stage_diagnostics=diagnostics,
        )
    except Exception as e:
        logger.error(f"Trial with seed {seed} at {context.ebn0_db} dB aborted: {e}", exc_info=True)
        return TrialRecord.aborted_trial(seed, context.ebn0_db, operator_seed, str(e))


def resolve_workers(workers: int) -> int:
    """0 means one worker per logical CPU."""
    if workers == 0:
        workers = settings.default_workers or psutil.cpu_count(logical=True) or 1
    return max(1, workers)


def load_outer_code(config: TrialConfig) -> Optional[SystematicEncoder]:
    """Systematic encoder for the code named by ``outer_alist`` (None without one)."""
    if config.outer_alist is None:
        return None
    return build_encoder(read_alist(config.outer_alist))


def build_code_params(config: TrialConfig, ebn0_db: float, layout: Optional[OuterCodeLayout] = None) -> CodeParams:
    """
    CodeParams of one Eb/N0 point with sigma2 fixed and P = snr * sigma2.

    A noiseless channel takes P from the grid against REFERENCE_SIGMA2.

    With an outer code R is the user rate and n covers the user bits only.
    """
    P = ebn0_to_snr(ebn0_db, config.R) * (config.sigma2 or REFERENCE_SIGMA2)
    if layout is None:
        n, _ = derive_code_length(config.L, config.M, config.R)
    else:
        n = max(1, int(round(float(layout.L_user) * layout.log_m / config.R)))
    return CodeParams(L=config.L, M=config.M, n=n, R=config.R, P=P, sigma2=config.sigma2)


def prepare_point(
    config: TrialConfig,
    ebn0_db: float,
    H: Optional[SystematicEncoder] = None,
) -> PointContext:
    """Code parameters, power allocation and decoders for one Eb/N0 point."""
    layout = None
    outer = None
    cfg = decoder_config(config)
    if H is not None:
        layout = plan_layout(config.L, config.M, H.n, H.k)
    params = build_code_params(config, ebn0_db, layout)
    design = params if params.sigma2 > 0 else params.with_noise(REFERENCE_SIGMA2)
    pa = allocate(
        PAScheme(config.pa_scheme),
        design,
        R_PA=config.rpa,
        B=config.blocks,
        a=config.pa_a,
        f=config.pa_f,
    )
    if H is not None:
        outer = ThreeStageDecoder(
            H, params, pa, cfg,
            minsum_iterations=config.minsum_iterations,
            minsum_scaling=config.minsum_scaling,
        )
    schedule = None
    if cfg.tau_mode is TauMode.OFFLINE_SE:
        schedule = se_trajectory(pa, design).tau2_seq
    operator = None
    if config.fixed_operator:
        operator = new_operator(config.operator, params.n, params.L, params.M, config.base_seed)
    return PointContext(
        config=config,
        ebn0_db=ebn0_db,
        params=params,
        pa=pa,
        cfg=cfg,
        tau2_schedule=schedule,
        outer=outer,
        operator=operator,
    )


def _map_trials(context: PointContext, seeds: Iterable[int], workers: int, pool) -> Iterable[TrialRecord]:
    task = partial(run_trial, context)
    if pool is None:
        return map(task, seeds)
    seeds = list(seeds)
    chunksize = max(1, len(seeds) // (4 * workers))
    return pool.imap(task, seeds, chunksize=chunksize)


def run_trials(
    config: TrialConfig,
    progress: bool = False,
    on_progress: Optional[ProgressCallback] = None,
) -> SweepResult:
    """
    Run ``config.trials`` seeded trials at every Eb/N0 point.

    Args:
        config: Sweep configuration
        progress: Draw a tqdm progress bar
        on_progress: Called with (trials done, trials total) as records arrive

    Returns:
        SweepResult with one SweepPoint per Eb/N0 value, in grid order;
        per-trial records are kept as well

    Raises:
        SimulationError: When the sweep cannot be prepared
    """
    started = time.time()
    workers = resolve_workers(config.workers)
    H = load_outer_code(config)
    total = config.trials * len(config.ebn0_grid)
    done = 0
    points: List[SweepPoint] = []
    records: List[TrialRecord] = []
    logger.info(
        f"Starting sweep: L={config.L}, M={config.M}, R={config.R}, {len(config.ebn0_grid)} points x "
        f"{config.trials} trials, operator={config.operator.value}, workers={workers}"
    )

    pool = Pool(processes=workers) if workers > 1 else None
    try:
        for ebn0_db in config.ebn0_grid:
            try:
                context = prepare_point(config, ebn0_db, H)
            except Exception as e:
                raise SimulationError(f"Cannot prepare Eb/N0 = {ebn0_db} dB: {e}")
            prediction = predict_esec_closed(context.pa, math.sqrt(config.sigma2), context.params.n, config.M)
            point = SweepPoint(
                ebn0_db=ebn0_db,
                L=config.L,
                n_bits=context.user_bits,
                predicted_esec=prediction.esec,
                predicted_ecw=prediction.ecw,
            )
            seeds = range(config.base_seed, config.base_seed + config.trials)
            iterator = _map_trials(context, seeds, workers, pool)
            for record in tqdm(iterator, total=config.trials, desc=f"Eb/N0={ebn0_db:g} dB", disable=not progress):
                point.add(record)
                records.append(record)
                done += 1
                if on_progress is not None:
                    on_progress(done, total)
            if point.aborted:
                logger.warning(f"{point.aborted} of {config.trials} trials aborted at {ebn0_db} dB")
            logger.info(
                f"Eb/N0={ebn0_db:g} dB: esec={point.esec_mean:.3e}, ber={point.ber_mean:.3e}, "
                f"cwer={point.cwer:.3f}, avg_iters={point.avg_iters:.1f}"
            )
            points.append(point)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    metadata = {
        "prng": PRNG_NAME,
        "seed_derivation": "trial seed = base_seed + t; SeedSequence(seed).spawn(3) -> bits, operator, noise",
        "base_seed": config.base_seed,
        "operator": config.operator.value,
        "fixed_operator": config.fixed_operator,
        "code_length": context.params.n,
        "sparc_rate": context.params.sparc_rate,
        "elapsed_seconds": time.time() - started,
    }
    if context.outer is not None:
        metadata["layout"] = context.outer.layout.to_dict()
    if context.pa.scheme is PAScheme.ITERATIVE:
        metadata["rpa"] = context.pa.parameters.get("R_PA")
    return SweepResult(config=config, points=points, records=records, metadata=metadata)


def run_rpa_sweep(
    config: TrialConfig,
    span: int = 5,
    step: Optional[float] = None,
    progress: bool = False,
) -> Dict[str, object]:
    """
    Repeat a sweep for R_PA values around R and pick the best.

    The best R_PA has the lowest section error rate summed over the grid,
    ties broken by codeword error rate.

    Returns:
        {"best_rpa": float, "results": {rpa: SweepResult}}
    """
    results = {}
    for rpa in rpa_grid(config.R, span, step):
        variant = config.model_copy(update={"rpa": rpa, "pa_scheme": PAScheme.ITERATIVE})
        results[rpa] = run_trials(variant, progress=progress)

    def score(result: SweepResult):
        return (
            sum(p.esec_mean for p in result.points),
            sum(p.cwer for p in result.points),
        )

    best = min(results, key=lambda rpa: score(results[rpa]))
    logger.info(f"R_PA sweep over {len(results)} values: best R_PA={best:.4f} (R={config.R})")
    return {"best_rpa": best, "results": results}


def run_m_sweep(config: TrialConfig, m_grid: Sequence[int], progress: bool = False) -> Dict[int, SweepResult]:
    """The same sweep for each M in ``m_grid`` at fixed L and R."""
    results = {}
    for M in m_grid:
        try:
            variant = TrialConfig(**{**config.model_dump(), "M": M})
        except ValueError as e:
            raise InvalidParameterError(f"Invalid M={M} in the M grid: {e}")
        results[M] = run_trials(variant, progress=progress)
    return results
