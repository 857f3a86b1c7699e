import asyncio
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import config
from .artifact_manager import ArtifactManager
from .audit import (
    SampleTable,
    decomposition_gaps,
    empirical_signal,
    epsilon_report,
    geometric_checkpoints,
    regret_trajectory,
)
from .exceptions import FceLabError, MemoryCapError, ProfileCapError
from .game_io import load_game, parse_signal
from .learners import LearningSession, load_trace, resume
from .logger import get_logger
from .models import EpsilonReport, LearnerConfig, Procedure, RegretFamily, RunConfig

logger = get_logger(__name__)

# Families tracked along the run, per procedure
TRAJECTORY_FAMILIES = {
    Procedure.FCE: (RegretFamily.CFIR,),
    Procedure.EFCE: (RegretFamily.AR, RegretFamily.IR, RegretFamily.CFR),
    Procedure.AFCE: (RegretFamily.AR,),
}

# Epsilon each procedure is expected to drive to zero
TARGET_EPSILON = {
    Procedure.FCE: "fce_local_epsilon",
    Procedure.EFCE: "efce_epsilon",
    Procedure.AFCE: "afce_epsilon",
}


def audit_points(steps: int, audit_every: Optional[int]) -> List[int]:
    """None: powers of two plus T; 0: T only; k: every k steps."""
    if audit_every is None:
        return geometric_checkpoints(steps)
    if audit_every == 0:
        return [steps]
    return list(range(audit_every, steps + 1, audit_every))


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (ProfileCapError, MemoryCapError)):
        return 3
    if isinstance(error, (FceLabError, OSError)):
        return 2
    return 1


def _run_in_worker(run_config: RunConfig) -> Dict[str, Any]:
    return asyncio.run(ExperimentApp(run_config.output_dir).run(run_config))


class ExperimentApp:
    def __init__(self, output_dir: str = config.DEFAULT_OUTPUT_DIR):
        self.output_dir = output_dir
        self._artifact_manager: Optional[ArtifactManager] = None

    @property
    def artifact_manager(self) -> ArtifactManager:
        if self._artifact_manager is None:
            self._artifact_manager = ArtifactManager(self.output_dir)
        return self._artifact_manager

    @staticmethod
    def _new_result() -> Dict[str, Any]:
        return {
            'success': False,
            'error': None,
            'exit_code': 1,
            'summary': {},
            'artifacts': {},
            'debug_info': {},
        }

    @staticmethod
    def _fail(result: Dict[str, Any], error: BaseException) -> Dict[str, Any]:
        result['exit_code'] = exit_code_for(error)
        if isinstance(error, FceLabError):
            logger.error(f"{type(error).__name__}: {error}")
            result['error'] = str(error)
            for attr in ('code', 'line', 'column', 'path', 'count', 'cap', 'rows', 'problems'):
                if hasattr(error, attr):
                    result['debug_info'][attr] = getattr(error, attr)
        elif isinstance(error, OSError):
            logger.error(f"Could not access input: {error}")
            result['error'] = str(error)
        else:
            logger.critical(f"An unexpected error occurred: {error}", exc_info=True)
            result['error'] = f"Unexpected error: {error}"
        return result

    async def run(self, run_config: RunConfig) -> Dict[str, Any]:
        """
        Run one learner on one game, audit the trace and write the artifacts.

        Returns:
            Dict containing:
            - 'success': bool, True when the run finished and met the threshold (if any)
            - 'error': str error message if failed, None if successful
            - 'exit_code': 0 success, 1 threshold missed, 2 invalid input, 3 cap exceeded
            - 'summary': final epsilons, payoff range, row count, wall-clock seconds
            - 'artifacts': paths of the trace, CSV and summary files
            - 'debug_info': error attributes (diagnostic code, line, cap) when failing
        """
        logger.info(f"Starting run: game={run_config.game} procedure={run_config.procedure.value} "
                    f"steps={run_config.steps} seed={run_config.seed}")
        result = self._new_result()
        started = time.perf_counter()
        try:
            run_config.validate()
            game = load_game(run_config.game)
            learner_config = LearnerConfig(mu=run_config.mu, progress=run_config.progress)
            session = LearningSession(game, run_config.procedure, run_config.seed, learner_config)
            run_dir = self.artifact_manager.create_run_directory(
                game.name, run_config.procedure.value, run_config.seed)

            chunk = run_config.checkpoint_every or run_config.steps
            while len(session.records) < run_config.steps:
                session.run(min(chunk, run_config.steps - len(session.records)))
                if len(session.records) < run_config.steps:
                    await self.artifact_manager.save_trace(session.trace(), run_dir)
                    logger.debug(f"Checkpoint at step {len(session.records)}: {session.row_count} rows")
            trace = session.trace()
            result['artifacts']['trace'] = str(await self.artifact_manager.save_trace(trace, run_dir))

            families = TRAJECTORY_FAMILIES[run_config.procedure]
            reports = regret_trajectory(trace, audit_points(run_config.steps, run_config.audit_every), families)
            result['artifacts']['trajectory'] = str(
                await self.artifact_manager.save_trajectory(game, reports, run_dir))

            epsilons = epsilon_report(game, empirical_signal(trace), run_config.profile_cap)
            # joint samples: low-memory learners choose on-path actions after chance is dealt
            joint = epsilon_report(game, empirical_signal(trace, keep_chance=True), run_config.profile_cap)
            summary: Dict[str, Any] = {
                'game': game.name,
                'procedure': run_config.procedure.value,
                'steps': trace.steps,
                'seed': run_config.seed,
                **epsilons.to_dict(),
                **{f"joint_{name}": value for name, value in joint.to_dict().items() if name.endswith("_epsilon")},
                'chain_ok': epsilons.chain_ok,
                'final_regrets': {family.value: reports[-1].maximum(family) for family in families},
                'regret_rows': session.row_count,
                'wall_clock_seconds': round(time.perf_counter() - started, 3),
            }
            result['summary'] = summary
            result['artifacts']['summary'] = str(await self.artifact_manager.save_summary(summary, run_dir))

            target = TARGET_EPSILON[run_config.procedure]
            if run_config.threshold is not None and summary[target] > run_config.threshold:
                result['error'] = f"{target} = {summary[target]:.6g} exceeds threshold {run_config.threshold}"
                result['exit_code'] = 1
                logger.warning(result['error'])
            else:
                result['success'] = True
                result['exit_code'] = 0
                logger.info(f"Run finished in {summary['wall_clock_seconds']} s: {target} = {summary[target]:.6g}")
        except Exception as e:
            self._fail(result, e)
        return result

    async def sweep(self, run_config: RunConfig, seeds: Optional[Sequence[int]] = None) -> Dict[str, Any]:
        """Independent seeds in worker processes; one result per seed under 'runs'."""
        seeds = list(seeds) if seeds is not None else [run_config.seed + k for k in range(run_config.jobs)]
        logger.info(f"Starting sweep over seeds {seeds} with {run_config.jobs} worker(s)")
        result = self._new_result()
        try:
            run_config.validate()
            configs = [dataclasses.replace(run_config, seed=seed, jobs=1, progress=False) for seed in seeds]
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=run_config.jobs) as pool:
                runs = await asyncio.gather(*[loop.run_in_executor(pool, _run_in_worker, c) for c in configs])
        except Exception as e:
            return self._fail(result, e)

        result['summary'] = {'runs': [{'seed': seed, **run['summary']} for seed, run in zip(seeds, runs)]}
        result['artifacts'] = {str(seed): run['artifacts'] for seed, run in zip(seeds, runs)}
        failures = {str(seed): run['error'] for seed, run in zip(seeds, runs) if not run['success']}
        if failures:
            result['error'] = f"{len(failures)} of {len(seeds)} runs failed"
            result['exit_code'] = max(run['exit_code'] for run in runs)
            result['debug_info']['failures'] = failures
        else:
            result['success'] = True
            result['exit_code'] = 0
        return result

    async def resume(self, game_spec: str, trace_path: str, extra: int,
                     output_dir: Optional[str] = None) -> Dict[str, Any]:
        """Continue a saved trace from its checkpoint; the extended trace goes to output_dir or next to the input."""
        result = self._new_result()
        try:
            game = load_game(game_spec)
            trace = resume(load_trace(trace_path, game), extra)
            run_dir = Path(output_dir) if output_dir else Path(trace_path).parent
            run_dir.mkdir(parents=True, exist_ok=True)
            path = await self.artifact_manager.save_trace(trace, run_dir)
            result['artifacts']['trace'] = str(path)
            result['summary'] = {'game': game.name, 'procedure': trace.procedure.value, 'steps': trace.steps}
            result['success'] = True
            result['exit_code'] = 0
        except Exception as e:
            self._fail(result, e)
        return result

    async def verify(self, game_spec: str, signal_path: str, threshold: float = config.TOLERANCE,
                     profile_cap: int = config.PROFILE_CAP) -> Dict[str, Any]:
        """Epsilons of a signal file and the nesting-chain check; success iff all are within threshold."""
        result = self._new_result()
        try:
            game = load_game(game_spec)
            signal = parse_signal(game, Path(signal_path).read_text(encoding="utf-8"))
            report: EpsilonReport = epsilon_report(game, signal, profile_cap)
            result['summary'] = {**report.to_dict(), 'chain_ok': report.chain_ok,
                                 'local_equivalence_ok': report.local_equivalence_ok, 'threshold': threshold}
            exceeded = {name: value for name, value in report.to_dict().items()
                        if name.endswith('_epsilon') and value > threshold}
            if exceeded:
                result['error'] = "epsilon above threshold: " + ", ".join(
                    f"{name}={value:.6g}" for name, value in exceeded.items())
                result['exit_code'] = 1
            elif not report.chain_ok:
                result['error'] = "nesting chain violated"
                result['exit_code'] = 1
            else:
                result['success'] = True
                result['exit_code'] = 0
        except Exception as e:
            self._fail(result, e)
        return result

    async def gapcheck(self, game_spec: str, trace_path: str, tolerance: float = config.TOLERANCE,
                       profile_cap: int = config.PROFILE_CAP) -> Dict[str, Any]:
        """Decomposition inequalities on a saved trace; success iff no gap exceeds tolerance."""
        result = self._new_result()
        try:
            game = load_game(game_spec)
            table = SampleTable.from_trace(load_trace(trace_path, game))
            report = decomposition_gaps(table, tolerance, profile_cap)
            result['summary'] = {
                'entries': len(report.entries),
                'valid_entries': sum(1 for e in report.entries if e.valid),
                'max_gap': report.max_gap,
                'violations': len(report.violations),
                'tolerance': tolerance,
            }
            if report.ok:
                result['success'] = True
                result['exit_code'] = 0
            else:
                result['error'] = f"{len(report.violations)} decomposition gap(s) above {tolerance}"
                result['debug_info']['violations'] = [
                    {'kind': e.kind, 'key': list(e.key), 'lhs': e.lhs, 'rhs': e.rhs} for e in report.violations]
                result['exit_code'] = 1
        except Exception as e:
            self._fail(result, e)
        return result
