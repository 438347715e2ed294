"""
Main Application Class for Stratified HJB.

This module contains the Application class that parses the command line and
orchestrates validation, solving, checking and studies.
"""

import argparse
import logging
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from stratified_hjb.core.errors import (EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_PASS, ConfigError, ResolutionMismatch,
                                        StratifiedHJBError)
from stratified_hjb.core.settings import Settings
from stratified_hjb.data.builtins import BUILTIN_NAMES, builtin_text
from stratified_hjb.data.config_loader import ProblemConfig, check_tolerance, ladder_from, load_config
from stratified_hjb.data.exporters import read_grid, write_grid, write_report, write_study
from stratified_hjb.dynamics.adapted import check_adapted
from stratified_hjb.geometry.afs_validator import validate_afs
from stratified_hjb.hamiltonians.assumptions import check_lp_constant, check_nc, check_tc
from stratified_hjb.solver.semi_lagrangian import solve_value
from stratified_hjb.solver.value_grid import ValueGrid
from stratified_hjb.utils.logging_utils import LOG_LEVELS, set_log_level
from stratified_hjb.verify.dpp import dpp_check
from stratified_hjb.verify.report import CheckReport
from stratified_hjb.verify.studies import filippov_study, refinement_study, scheme_agreement
from stratified_hjb.verify.viscosity import viscosity_sub_check, viscosity_super_check

STUDY_KINDS = ("filippov", "refinement", "agreement")


class Application:
    """Main application class for Stratified HJB."""

    def __init__(self, logger: logging.Logger, settings: Optional[Settings] = None):
        """
        Initialize the application.

        Args:
            logger: Logger instance
            settings: Run defaults; loaded from the app data directory when omitted
        """
        self.logger = logger
        self.settings = settings if settings is not None else Settings()
        self.commands = {
            "validate": self.cmd_validate,
            "solve": self.cmd_solve,
            "check": self.cmd_check,
            "study": self.cmd_study,
            "builtin": self.cmd_builtin,
        }

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="stratified-hjb",
            description="Stratified Hamilton-Jacobi-Bellman solver and verification toolkit",
        )
        parser.add_argument("--log-level", default=None, type=str.upper, choices=LOG_LEVELS,
                            help="Logging level; the settings file value when omitted")
        parser.add_argument("--no-log-file", action="store_true", help="Do not write log files")
        subparsers = parser.add_subparsers(dest="command", required=True)

        def add_common(sub: argparse.ArgumentParser) -> None:
            sub.add_argument("--config", required=True, help="Problem file or builtin:<name>")
            sub.add_argument("--output", default=None, help="Output file or directory")
            sub.add_argument("--threads", type=int, default=None, help="Worker threads for the solver")
            sub.add_argument("--seed", type=int, default=None, help="Seed of the sampled checks")
            sub.add_argument("--tolerance", type=float, default=None, help="Residual tolerance override")

        add_common(subparsers.add_parser("validate", help="Check the AFS axioms and the structural assumptions"))
        add_common(subparsers.add_parser("solve", help="Compute the value function on the configured lattice"))
        check = subparsers.add_parser("check", help="Run viscosity and DPP checks on a stored grid")
        add_common(check)
        check.add_argument("--grid", required=True, help="Grid file written by solve")
        study = subparsers.add_parser("study", help="Run a Filippov, refinement or scheme agreement study")
        add_common(study)
        study.add_argument("--kind", choices=STUDY_KINDS, required=True)
        builtin = subparsers.add_parser("builtin", help="Print a builtin problem file")
        builtin.add_argument("name", nargs="?", default=None, help=f"One of: {', '.join(BUILTIN_NAMES)}")
        builtin.add_argument("--output", default=None, help="Write to this file instead of stdout")
        return parser

    def run(self, argv: List[str]) -> int:
        """
        Run one command.

        Args:
            argv: Command line arguments without the program name

        Returns:
            Exit code: 0 pass, 1 check failure, 2 input error, 3 numerical precondition
        """
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_PASS if not e.code else EXIT_INPUT_ERROR

        try:
            set_log_level(args.log_level or self.settings.log_level)
        except ValueError as e:
            self.logger.error(str(e))
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT_ERROR
        self.settings.apply_overrides(threads=getattr(args, "threads", None))
        self.logger.debug(f"Run settings: {self.settings.as_dict()}")

        try:
            self.logger.info(f"Running command: {args.command}")
            exit_code = self.commands[args.command](args)
            self.logger.info(f"Command {args.command} finished with exit code {exit_code}")
            return exit_code
        except StratifiedHJBError as e:
            self.logger.error(f"{type(e).__name__}: {str(e)}")
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
            return e.exit_code
        except Exception as e:
            self.logger.critical(f"Unexpected error: {str(e)}", exc_info=True)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CHECK_FAILED

    def _load(self, args: argparse.Namespace) -> ProblemConfig:
        config = load_config(args.config)
        if args.seed is not None:
            config.checks.seed = args.seed
        return config

    def _output_directory(self, args: argparse.Namespace) -> str:
        directory = args.output or self.settings.output_directory
        os.makedirs(directory, exist_ok=True)
        return directory

    def _finish(self, reports: Dict[str, CheckReport], directory: str, prefix: str) -> int:
        failed = []
        for name, report in reports.items():
            path = write_report(report, os.path.join(directory, f"{prefix}_{name}.json"))
            status = "PASS" if report.passed else "FAIL"
            print(f"{status}  {name:<20} max residual {report.max_residual:.6g}  ({path})")
            if not report.passed:
                failed.append(name)
        if failed:
            self.logger.warning(f"Failed checks: {', '.join(failed)}")
            return EXIT_CHECK_FAILED
        return EXIT_PASS

    def cmd_validate(self, args: argparse.Namespace) -> int:
        """Run validate_afs, check_adapted, check_nc, check_tc and check_lp_constant."""
        config = self._load(args)
        problem = config.build_problem()
        checks = config.checks
        strat, bl_map = problem.strat, problem.bl_map
        reports: Dict[str, CheckReport] = {
            "validate_afs": validate_afs(strat, checks.sample_density),
            "check_adapted": check_adapted(bl_map, strat, checks.sample_density, times=checks.times,
                                           seed=checks.seed),
            "check_nc": check_nc(bl_map, strat, checks.nc_delta_target, checks.sample_density,
                                 times=checks.times, seed=checks.seed),
            "check_tc": check_tc(bl_map, strat, checks.sample_density, times=checks.times, seed=checks.seed),
            "check_lp_constant": check_lp_constant(bl_map, strat, checks.sample_density, times=checks.times,
                                                   seed=checks.seed),
        }
        nc = reports["check_nc"]
        if nc.nc_delta:
            print("nc_delta: " + ", ".join(f"stratum {k}: {v:.6g}" for k, v in sorted(nc.nc_delta.items())))
        return self._finish(reports, self._output_directory(args), config.name or "problem")

    def cmd_solve(self, args: argparse.Namespace) -> int:
        """Solve on the configured lattice and write the grid."""
        config = self._load(args)
        problem = config.build_problem()
        checks = config.checks
        nc = check_nc(problem.bl_map, problem.strat, checks.nc_delta_target, checks.sample_density,
                      times=checks.times, seed=checks.seed)
        if not nc.passed:
            self.logger.warning("Normal controllability is not certified; the value function may not be "
                                "the unique stratified solution")

        started = time.perf_counter()
        grid = solve_value(problem, config.solver.dx, config.solver.dt, threads=self.settings.threads)
        elapsed = time.perf_counter() - started

        output = args.output or os.path.join(self.settings.output_directory, f"{config.name or 'problem'}_grid.csv")
        write_grid(grid, output)
        bound = problem.value_bound()
        largest = float(np.max(np.abs(grid.values)))
        print(f"nodes: {int(np.prod(grid.shape))}  slices: {grid.steps + 1}  "
              f"U in [{grid.values.min():.6g}, {grid.values.max():.6g}]  wall time: {elapsed:.2f} s")
        print(f"grid written to {output}")
        if largest > bound * (1 + 1e-12):
            self.logger.warning(f"max |U| = {largest:.6g} exceeds |g| + T M = {bound:.6g}")
        return EXIT_PASS

    def _check_resolution(self, grid: ValueGrid, config: ProblemConfig) -> None:
        dx, dt = config.solver.dx, config.solver.dt
        steps = max(1, int(round(config.horizon / dt)))
        if abs(grid.dx - dx) > 1e-9 * dx or grid.steps != steps:
            raise ResolutionMismatch(f"Grid has dx={grid.dx:.12g} and {grid.steps} steps; the config asks for "
                                     f"dx={dx:.12g} and {steps} steps")

    def cmd_check(self, args: argparse.Namespace) -> int:
        """Run viscosity_sub_check, viscosity_super_check and dpp_check on a stored grid."""
        config = self._load(args)
        problem = config.build_problem()
        if not os.path.exists(args.grid):
            raise ConfigError("--grid", f"Grid file not found: {args.grid}")
        grid = read_grid(args.grid)
        self._check_resolution(grid, config)
        tol = args.tolerance if args.tolerance is not None else check_tolerance(
            config, grid.dx, grid.dt, self.settings.tolerance_factor)

        reports: Dict[str, CheckReport] = {
            "viscosity_sub": viscosity_sub_check(grid, problem, tol),
            "viscosity_super": viscosity_super_check(grid, problem, tol),
        }
        for tau_steps in config.checks.dpp_tau_steps:
            if tau_steps > grid.steps:
                self.logger.warning(f"Skipping DPP check with tau = {tau_steps} dt on a grid of {grid.steps} steps")
                continue
            reports[f"dpp_tau{tau_steps}"] = dpp_check(grid, problem, tau_steps)
        return self._finish(reports, self._output_directory(args), config.name or "problem")

    def cmd_study(self, args: argparse.Namespace) -> int:
        """Run a Filippov, refinement or scheme agreement study and write its table."""
        config = self._load(args)
        problem = config.build_problem()
        threads = self.settings.threads
        if args.kind == "filippov":
            if not config.checks.eps_list:
                raise ConfigError("checks.eps_list", "required for a filippov study")
            tolerance = args.tolerance if args.tolerance is not None else config.checks.filippov_tolerance
            report = filippov_study(problem, config.checks.eps_list, config.solver.dx, config.solver.dt,
                                    samples_per_eps=config.checks.samples_per_eps, tolerance=tolerance,
                                    threads=threads)
        elif args.kind == "agreement":
            ladder = ladder_from(config)
            if len(ladder) < 2:
                raise ConfigError("checks.refinement", "an agreement study needs two levels")
            (dx1, dt1), (dx2, dt2) = ladder[:2]
            report = scheme_agreement(problem, dx1, dt1, dx2, dt2, threads=threads)
        else:
            report = refinement_study(problem, ladder_from(config), threads=threads)

        directory = self._output_directory(args)
        prefix = f"{config.name or 'problem'}_{args.kind}"
        table = write_study(report, os.path.join(directory, f"{prefix}_study.csv"))
        print(f"study table written to {table}")
        return self._finish({"study": report}, directory, prefix)

    def cmd_builtin(self, args: argparse.Namespace) -> int:
        """Print a builtin problem file, or the builtin names."""
        if args.name is None:
            print("\n".join(BUILTIN_NAMES))
            return EXIT_PASS
        text = builtin_text(args.name)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as f:
                f.write(text)
            print(f"builtin {args.name} written to {args.output}")
        else:
            print(text, end="" if text.endswith("\n") else "\n")
        return EXIT_PASS
