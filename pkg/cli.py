"""
Command-line interface.

    python cli.py pa --L 1024 --M 512 --R 1.6 --P 15
    python cli.py se --L 1024 --M 512 --R 1.6 --P 15 --out trajectory.csv
    python cli.py predict --L 1024 --M 512 --R 1.6 --P 15
    python cli.py decode --L 64 --M 16 --R 1.0 --ebn0 6
    python cli.py simulate --config sweep.json --out results/sweep.csv --progress
    python cli.py serve --port 8000

Exit status is 2 for invalid parameters or configuration and 1 for other
toolkit errors.
"""
import argparse
import json
import logging
import math
import sys
import typing
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from config import settings
from exceptions import InvalidParameterError, SparcError, TrialAbortedError, get_error_response
from models.analysis import SEMode
from models.power_allocation import PAScheme
from models.simulation import TrialConfig
from services.amp_decoder import amp_decode, estimate_remaining_errors, hard_decision
from services.core import make_code_params, message_to_bits
from services.design_operator import new_operator
from services.power_allocator import allocate, flattening_block, match_modified_exponential
from services.simulator import load_outer_code, prepare_point, run_m_sweep, run_rpa_sweep, run_trial, run_trials
from services.state_evolution import predict_esec_closed, predict_se_esec, se_trajectory
from utils.results import to_json_text, write_allocation_csv, write_json, write_sweep, write_trajectory_csv

logger = logging.getLogger("sparc.cli")

EXIT_ERROR = 1
EXIT_CONFIG = 2

# Extra option strings for TrialConfig fields
_ALIASES = {"outer_alist": ["--outer"]}


def _design_arguments() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--L", type=int, required=True, help="Number of sections")
    parent.add_argument("--M", type=int, required=True, help="Columns per section (power of two)")
    parent.add_argument("--R", type=float, required=True, help="Rate in bits per real channel use")
    parent.add_argument("--P", type=float, required=True, help="Average codeword power")
    parent.add_argument("--sigma2", type=float, default=1.0, help="Noise variance")
    parent.add_argument("--pa-scheme", choices=[s.value for s in PAScheme], default=PAScheme.ITERATIVE.value)
    parent.add_argument("--rpa", type=float, default=None, help="R_PA of the iterative scheme")
    parent.add_argument("--blocks", type=int, default=None, help="Blocks B of the iterative scheme")
    parent.add_argument("--pa-a", type=float, default=1.0, help="Steepness a (modified exponential)")
    parent.add_argument("--pa-f", type=float, default=1.0, help="Flattening fraction f (modified exponential)")
    parent.add_argument("--out", default=None, help="Output file (stdout when omitted)")
    return parent


def _flag_type(annotation) -> Dict[str, Any]:
    """argparse keyword arguments for a TrialConfig field annotation."""
    if typing.get_origin(annotation) is typing.Union:
        annotation = next(a for a in typing.get_args(annotation) if a is not type(None))
    if typing.get_origin(annotation) in (list, List):
        return {"type": typing.get_args(annotation)[0], "nargs": "+"}
    if annotation is bool:
        return {"action": argparse.BooleanOptionalAction}
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        return {"choices": [member.value for member in annotation]}
    return {"type": annotation}


def _trial_config_arguments(parser: argparse.ArgumentParser) -> None:
    """One --flag per TrialConfig field; unset flags stay None."""
    for name, field in TrialConfig.model_fields.items():
        flags = [f"--{name.replace('_', '-')}"] + _ALIASES.get(name, [])
        parser.add_argument(*flags, dest=name, default=None, help=field.description, **_flag_type(field.annotation))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparc", description="Sparse regression code toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    design = _design_arguments()

    pa = sub.add_parser("pa", parents=[design], help="Power allocation")
    pa.add_argument("--match-modexp", action="store_true",
                    help="Also fit the modified exponential (a, f) to the allocation")

    se = sub.add_parser("se", parents=[design], help="State-evolution trajectory (CSV t,tau2,x)")
    se.add_argument("--mode", choices=[m.value for m in SEMode], default=SEMode.ASYMPTOTIC.value)
    se.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples per step")
    se.add_argument("--seed", type=int, default=0)

    predict = sub.add_parser("predict", parents=[design], help="Predicted section/codeword error rates")
    predict.add_argument("--method", choices=["closed", "se"], default="closed")
    predict.add_argument("--quad-points", type=int, default=None)
    predict.add_argument("--samples", type=int, default=None)
    predict.add_argument("--seed", type=int, default=0)

    for name, help_text in (("decode", "Encode, transmit and decode one message"),
                            ("simulate", "Monte-Carlo sweep over an Eb/N0 grid")):
        command = sub.add_parser(name, help=help_text)
        command.add_argument("--config", default=None, help="JSON file with TrialConfig fields")
        command.add_argument("--out", default=None, help="Output .csv or .json (stdout JSON when omitted)")
        _trial_config_arguments(command)
        if name == "decode":
            command.add_argument("--ebn0", type=float, default=None, help="Eb/N0 in dB")
            command.add_argument("--seed", type=int, default=None, help="Trial seed (base_seed by default)")
            command.add_argument("--y", default=None, help="Received vector (.npy, .bin or text) to decode")
            command.add_argument("--operator-seed", type=int, default=None,
                                 help="Seed of the operator that encoded --y (base_seed by default)")
        else:
            command.add_argument("--progress", action="store_true", help="Show a progress bar")
            command.add_argument("--rpa-sweep", type=int, default=None, metavar="SPAN",
                                 help="Sweep R_PA = R(1 + k*step) for |k| <= SPAN and report the best")
            command.add_argument("--rpa-step", type=float, default=None, help="Step of the R_PA sweep")
            command.add_argument("--m-grid", type=int, nargs="+", default=None, help="Repeat the sweep for each M")

    serve = sub.add_parser("serve", help="Run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def load_trial_config(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> TrialConfig:
    """
    TrialConfig from an optional JSON file overlaid with the given flags.

    Raises:
        InvalidParameterError: When the file cannot be read or the result is invalid
    """
    values: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, "r") as f:
                values = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidParameterError(f"Cannot read config file {args.config}: {e}")
        if not isinstance(values, dict):
            raise InvalidParameterError(f"Config file {args.config} must hold a JSON object")
    for name in TrialConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    values.update(extra or {})
    try:
        return TrialConfig(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise InvalidParameterError(f"Invalid simulation config: {problems}", "Fix the listed fields")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")
    logger.info(f"Wrote {path}")


def _design(args: argparse.Namespace):
    params = make_code_params(args.L, args.M, args.R, args.P, args.sigma2)
    pa = allocate(PAScheme(args.pa_scheme), params, R_PA=args.rpa, B=args.blocks, a=args.pa_a, f=args.pa_f)
    return params, pa


def _is_json(out: Optional[str]) -> bool:
    return out is not None and Path(out).suffix.lower() == ".json"


def cmd_pa(args: argparse.Namespace) -> int:
    """CSV (section, power) by default; JSON with flattening block and fit for a .json output."""
    params, pa = _design(args)
    if args.match_modexp:
        a, f, _ = match_modified_exponential(pa, params.capacity, args.blocks)
        logger.info(f"Modified exponential match: a={a:.6g}, f={f:.6g}")
    if not _is_json(args.out):
        write_allocation_csv(pa, args.out if args.out is not None else sys.stdout)
        return 0
    payload = {
        "params": params.to_dict(),
        "allocation": pa.to_dict(),
        "flattening_block": flattening_block(pa, args.blocks or params.L),
    }
    if args.match_modexp:
        payload["modified_exponential_match"] = {"a": a, "f": f}
    write_json(payload, args.out)
    return 0


def cmd_se(args: argparse.Namespace) -> int:
    params, pa = _design(args)
    trajectory = se_trajectory(pa, params, SEMode(args.mode), samples=args.samples, seed=args.seed)
    logger.info(f"State evolution: T={trajectory.T}, tau2_T={trajectory.tau2_final:.6g}, "
                f"converged={trajectory.converged}")
    if _is_json(args.out):
        write_json({"params": params.to_dict(), "trajectory": trajectory.to_dict()}, args.out)
    elif args.out is not None:
        write_trajectory_csv(trajectory, args.out)
    else:
        write_trajectory_csv(trajectory, sys.stdout)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    params, pa = _design(args)
    payload: Dict[str, Any] = {"params": params.to_dict(), "method": args.method}
    if args.method == "closed":
        prediction = predict_esec_closed(pa, math.sqrt(params.sigma2), params.n, params.M, args.quad_points)
        payload["prediction"] = prediction.to_dict()
    else:
        trajectory = se_trajectory(pa, params)
        estimate = predict_se_esec(
            math.sqrt(trajectory.tau2_final), pa, params.n, params.M, args.samples, args.seed
        )
        payload.update({
            "tau2_final": trajectory.tau2_final,
            "converged": trajectory.converged,
            "esec": estimate.to_dict(),
        })
    _emit(to_json_text(payload), args.out)
    return 0


def load_received(path: str) -> np.ndarray:
    """
    Received vector from .npy, raw float64 (.bin) or comma/whitespace separated text.

    Raises:
        InvalidParameterError: When the file cannot be read
    """
    suffix = Path(path).suffix.lower()
    try:
        if suffix == ".npy":
            values = np.load(path)
        elif suffix == ".bin":
            values = np.fromfile(path, dtype=np.float64)
        else:
            with open(path, "r") as f:
                values = np.array(f.read().replace(",", " ").split(), dtype=float)
    except (OSError, ValueError) as e:
        raise InvalidParameterError(f"Cannot read received vector {path}: {e}")
    return np.asarray(values, dtype=float).ravel()


def _decode_received(args: argparse.Namespace, config: TrialConfig, context) -> int:
    params = context.params
    y = load_received(args.y)
    seed = config.base_seed if args.operator_seed is None else args.operator_seed
    op = context.operator or new_operator(config.operator, params.n, params.L, params.M, seed)
    if context.outer is not None:
        result = context.outer.decode(y, op)
        bits = result.user_bits
        first = result.first_stage
        diagnostics = result.diagnostics()
    else:
        first = amp_decode(y, op, context.pa, params, context.cfg, tau2_schedule=context.tau2_schedule)
        bits = message_to_bits(hard_decision(first, context.pa, params.n))
        diagnostics = first.to_dict()
    payload = {
        "params": params.to_dict(),
        "operator_seed": seed,
        "bits": "".join(str(int(b)) for b in bits),
        "tau2_trace": list(first.tau2_trace),
        "estimated_section_errors": estimate_remaining_errors(first, context.pa, params.sigma2, params.n),
        "diagnostics": diagnostics,
    }
    _emit(to_json_text(payload), args.out)
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    """Decode a received vector (--y), or run one seeded encode/channel/decode round trip."""
    extra = {"trials": 1}
    if args.ebn0 is not None:
        extra["ebn0_grid"] = [args.ebn0]
    config = load_trial_config(args, extra)
    context = prepare_point(config, config.ebn0_grid[0], load_outer_code(config))
    if args.y is not None:
        return _decode_received(args, config, context)

    seed = config.base_seed if args.seed is None else args.seed
    record = run_trial(context, seed)
    payload = {"params": context.params.to_dict(), "record": record.to_dict()}
    _emit(to_json_text(payload), args.out)
    if record.aborted:
        raise TrialAbortedError(record.seed, record.error)
    return 0


def _write_variant(result, out: Optional[str], suffix: str) -> None:
    path = Path(out)
    write_sweep(result, path.with_name(f"{path.stem}_{suffix}{path.suffix}"))


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_trial_config(args)

    if args.rpa_sweep is not None:
        sweep = run_rpa_sweep(config, span=args.rpa_sweep, step=args.rpa_step, progress=args.progress)
        best = sweep["best_rpa"]
        if args.out is not None and Path(args.out).suffix.lower() == ".csv":
            for rpa, result in sweep["results"].items():
                _write_variant(result, args.out, f"rpa{rpa:g}")
        payload = {
            "best_rpa": best,
            "results": {f"{rpa:g}": result.to_dict() for rpa, result in sweep["results"].items()},
        }
        if args.out is None or Path(args.out).suffix.lower() == ".json":
            _emit(to_json_text(payload), args.out)
        logger.info(f"Best R_PA = {best:g}")
        return 0

    if args.m_grid:
        results = run_m_sweep(config, args.m_grid, progress=args.progress)
        if args.out is not None and Path(args.out).suffix.lower() == ".csv":
            for M, result in results.items():
                _write_variant(result, args.out, f"M{M}")
        else:
            _emit(to_json_text({str(M): result.to_dict() for M, result in results.items()}), args.out)
        return 0

    result = run_trials(config, progress=args.progress)
    if args.out is None:
        _emit(to_json_text(result.to_dict()), None)
    else:
        write_sweep(result, args.out)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, log_level=settings.log_level.lower())
    return 0


COMMANDS = {
    "pa": cmd_pa,
    "se": cmd_se,
    "predict": cmd_predict,
    "decode": cmd_decode,
    "simulate": cmd_simulate,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return COMMANDS[args.command](args)
    except InvalidParameterError as e:
        sys.stderr.write(json.dumps(get_error_response(e)) + "\n")
        return EXIT_CONFIG
    except SparcError as e:
        sys.stderr.write(json.dumps(get_error_response(e)) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
