"""Build shipped templates into assets and simulation assets."""

from scenec.artic import compile_asset
from scenec.backend.template import DEFAULT_DIMS, TemplateBackend, template_plan
from scenec.core import AssetRequest
from scenec.program import build_with_repair
from scenec.router import default_ontology, route


def built(category, seed=0):
    plan = template_plan(category, DEFAULT_DIMS[category], seed)
    return build_with_repair(plan, TemplateBackend(seed), asset_id=category)


def sim_for(category, seed=0):
    strategy = route(AssetRequest(category, category, "", DEFAULT_DIMS[category]), default_ontology())
    return compile_asset(built(category, seed), strategy)
