"""The planner backend interface."""

from __future__ import annotations

from dataclasses import dataclass

from scenec.errors import Unsupported


@dataclass(frozen=True)
class Capabilities:
    can_propose: bool = True
    can_repair: bool = True
    can_revise: bool = True
    can_critique: bool = False
    # Nondeterministic backends void the byte-identical rebuild guarantee.
    deterministic: bool = True

    def to_dict(self) -> dict:
        return {
            "can_propose": self.can_propose,
            "can_repair": self.can_repair,
            "can_revise": self.can_revise,
            "can_critique": self.can_critique,
            "deterministic": self.deterministic,
        }


class PlannerBackend:
    """Proposes plans and repairs programs and plans on request.

    Subclasses override the operations they support and declare them in
    ``capabilities``; the defaults raise ``Unsupported``, which the build
    loop counts as a failed attempt.
    """

    capabilities = Capabilities(False, False, False, False)
    name = "base"

    def propose_plan(self, req, strategy):
        raise Unsupported(f"{self.name} backend cannot propose plans")

    def repair_program(self, program, error):
        raise Unsupported(f"{self.name} backend cannot repair programs")

    def revise_plan(self, plan, reasons):
        raise Unsupported(f"{self.name} backend cannot revise plans")

    def critique(self, asset):
        return None
