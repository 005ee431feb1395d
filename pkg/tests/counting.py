"""Instrumented stand-ins for the planner and executor used by the budget tests."""

from scenec.backend.base import Capabilities, PlannerBackend
from scenec.errors import ExecError


class CountingBackend(PlannerBackend):
    """Never repairs or revises anything; counts how often it is asked."""

    capabilities = Capabilities(can_propose=False, can_repair=True, can_revise=True, can_critique=True)
    name = "counting"

    def __init__(self, verdict=None):
        self.repairs = 0
        self.revisions = 0
        self.critiques = 0
        self.verdict = verdict

    def repair_program(self, program, error):
        self.repairs += 1
        return program

    def revise_plan(self, plan, reasons):
        self.revisions += 1
        return plan

    def critique(self, asset):
        self.critiques += 1
        return self.verdict


def failing_executor(counts):
    def run(prog):
        counts[prog.part_name] = counts.get(prog.part_name, 0) + 1
        raise ExecError(0, "DegenerateParams", "always fails", prog.part_name)

    return run
