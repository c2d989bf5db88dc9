#!/usr/bin/env python3
"""
Exception hierarchy shared by the solver library and the CLI.

Configuration problems map to exit code 2, numerical/solver failures to
exit code 3. Infeasible candidate solutions are reported, not raised,
except where a pipeline promises a feasible result.
"""

from __future__ import annotations


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class WptccError(Exception):
    pass


class ConfigError(WptccError):
    def __init__(self, message: str, *, key: str | None = None):
        super().__init__(message)
        self.key = key


class InputError(WptccError, ValueError):
    pass


class DomainError(InputError):
    pass


class SolverError(WptccError):
    pass


class InfeasibleError(SolverError):
    pass


class NumericError(SolverError):
    def __init__(self, message: str, *, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class RecoveryError(SolverError):
    pass


class FeasibilityError(SolverError):
    pass


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (SolverError, InputError)):
        return EXIT_SOLVER
    return 1
