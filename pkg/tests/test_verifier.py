import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plan_fixtures import edited, fixtures, floating_shade_plan, fused_drawer_plan, sunken_plan
from scenec.backend.template import DEFAULT_DIMS, TEMPLATES, template_plan
from scenec.plan import ObjectPlan, flatten, plan_union_aabb
from scenec.verifier import (
    Rule,
    Severity,
    _components,
    check_completeness,
    check_dimensions,
    check_movable_independence,
    check_spatial,
    part_aabbs,
    verify,
)


@pytest.mark.parametrize("category", sorted(TEMPLATES))
def test_templates_verify_clean(ont, category):
    plan = template_plan(category, DEFAULT_DIMS[category])
    report = verify(plan, ont)
    assert report.ok and report.issues == ()
    assert report.verified_plan is plan


def test_template_count():
    assert len(TEMPLATES) >= 20


def test_missing_part_inserted(ont):
    plan = fixtures()["missing_backrest"]
    issues = check_completeness(plan, ont)
    assert [(i.rule, i.severity) for i in issues] == [(Rule.COMPLETENESS, Severity.FIXED)]
    fixed = verify(plan, ont).verified_plan
    assert "backrest" in {fp.spec.role for fp in flatten(fixed)}


def test_duplicate_role_removed(ont):
    plan = fixtures()["two_seats"]
    assert len(check_completeness(plan, ont)) == 1
    fixed = verify(plan, ont).verified_plan
    assert [p.role for p in fixed.parts].count("seat") == 1
    assert check_completeness(fixed, ont) == []


def test_zero_thickness_clamped(ont):
    plan = fixtures()["zero_thickness"]
    issues = check_dimensions(plan)
    assert issues and issues[0].severity is Severity.FIXED
    top = next(p for p in verify(plan, ont).verified_plan.parts if p.name == "top")
    assert min(top.dims) == pytest.approx(0.001)


def test_overflow_rescaled(ont):
    plan = fixtures()["overflow_x"]
    before = plan_union_aabb(plan).extents
    fixed = verify(plan, ont).verified_plan
    after = plan_union_aabb(fixed).extents
    d = np.asarray(fixed.target_dims)
    assert np.all(after <= 1.05 * d * (1 + 1e-9))
    assert after[0] / before[0] == pytest.approx(1.05 / 1.2, rel=1e-6)


def test_fitting_plan_has_no_dimension_issue():
    assert check_dimensions(template_plan("table", DEFAULT_DIMS["table"])) == []


def test_out_of_bounds_target_rejected(ont):
    plan = edited("table", lambda d: d.__setitem__("target_dims", [30, 1, 1]))
    report = verify(plan, ont)
    assert not report.ok and report.verified_plan is None


def test_floating_part_reconnected(ont):
    plan = floating_shade_plan()
    issues = check_spatial(plan)
    assert len(issues) == 1 and issues[0].rule is Rule.SPATIAL
    fixed = verify(plan, ont).verified_plan
    assert len(_components(list(part_aabbs(fixed).values()))) == 1


def test_sunken_part_lifted(ont):
    fixed = verify(sunken_plan(), ont).verified_plan
    assert min(b.min[2] for b in part_aabbs(fixed).values()) >= -0.001


def test_fused_movable_rejected(ont):
    plan = fused_drawer_plan()
    issues = check_movable_independence(plan)
    assert any(i.severity is Severity.REJECTED for i in issues)
    report = verify(plan, ont)
    assert not report.ok and report.verified_plan is None


def test_removing_symmetry_makes_fused_plan_verifiable(ont):
    data = json.loads(fused_drawer_plan().to_json())
    for p in data["parts"]:
        if p.get("movable"):
            p["symmetry_tag"] = "none"
    assert verify(ObjectPlan.from_dict(data), ont).ok


def test_independence_flag_repaired(ont):
    def unflag(data):
        for p in data["parts"]:
            if p.get("movable"):
                p["must_be_independent"] = False

    plan = edited("nightstand", unflag)
    issues = check_movable_independence(plan)
    assert issues and all(i.severity is Severity.FIXED for i in issues)
    fixed = verify(plan, ont).verified_plan
    assert all(fp.spec.must_be_independent for fp in flatten(fixed) if fp.spec.movable)


def test_individual_doors_accepted(ont):
    assert check_movable_independence(template_plan("wardrobe", DEFAULT_DIMS["wardrobe"])) == []


@pytest.mark.parametrize("name", sorted(fixtures()))
def test_verify_is_a_fixed_point(ont, name):
    report = verify(fixtures()[name], ont)
    if report.verified_plan is None:
        return
    again = verify(report.verified_plan, ont)
    assert again.issues == ()
    assert again.verified_plan.to_json() == report.verified_plan.to_json()


@given(st.sampled_from(sorted(TEMPLATES)), st.floats(0.6, 1.6), st.floats(0.6, 1.6), st.floats(0.6, 1.6))
def test_verify_idempotent_on_scaled_templates(category, sx, sy, sz):
    from scenec.router import default_ontology

    ont = default_ontology()
    d = np.asarray(DEFAULT_DIMS[category]) * [sx, sy, sz]
    report = verify(template_plan(category, d), ont)
    if report.verified_plan is not None:
        assert verify(report.verified_plan, ont).issues == ()


def test_report_serializes(ont):
    report = verify(fixtures()["missing_backrest"], ont)
    data = json.loads(json.dumps(report.to_dict()))
    assert data["issues"][0]["rule"] == "completeness"
    assert "completeness" in report.to_text()
