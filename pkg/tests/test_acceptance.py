"""End-to-end acceptance checks. Each test records one pass/fail line, printed in
the terminal summary by conftest.py (also visible inline with ``-s``)."""

import hashlib
import json
import os
import shutil
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from builders import sim_for
from convex_cases import random_convex
from counting import CountingBackend, failing_executor
from generators import KINDS, random_program
from oracles import col_oracle, nav_oracle, nme_oracle, oob_oracle, opc_oracle, sup_oracle, uvi_oracle, voxel_inertia_oracle
from plan_fixtures import fixtures, fused_drawer_plan
from random_scenes import random_scene
from scene_utils import threshold_house
from scenec.artic import inertia_tensor
from scenec.backend.template import DEFAULT_DIMS, TEMPLATES, template_plan
from scenec.errors import BuildFailure, ExecError
from scenec.kernel.mesh import nonmanifold_edge_count
from scenec.kernel.primitives import make_box, make_cylinder
from scenec.metrics import uv_islands
from scenec.metrics.layout import (
    collision_metric,
    nav_metric,
    oob_metric,
    opening_clearance_metric,
    sample_points,
    sample_seed,
    support_metric,
)
from scenec.program import Bevel, LoopBudgets, MirrorAbout, RadialArray, Solidify, Verdict, build_with_repair, execute_program
from scenec.scene import load_house
from scenec.sdf import emit_sdf, parse_sdf, validate_document
from scenec.verifier import verify

FIXTURE = Path(__file__).parent / "fixtures" / "desk_scene.json"
RESULTS: dict[int, tuple[str, bool, float, str]] = {}


@contextmanager
def criterion(n: int, title: str):
    """Time the body and record its outcome; the assertion error still propagates."""
    note = {}
    start = time.perf_counter()
    ok = False
    try:
        yield note
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        RESULTS[n] = (title, ok, elapsed, note.get("detail", ""))
        print(f"\ncriterion {n:>2} {'PASS' if ok else 'FAIL'} {elapsed:7.2f}s  {title}", flush=True)


def scenec_cli(*args, cwd=None):
    exe = shutil.which("scenec")
    cmd = [exe] if exe else [sys.executable, "-m", "scenec.cli"]
    env = {k: v for k, v in os.environ.items() if k != "PYTHONHASHSEED"}
    return subprocess.run(cmd + [str(a) for a in args], capture_output=True, text=True, cwd=cwd, env=env, timeout=300)


def tree_hashes(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    """The desk scene assembled by the installed CLI, with its wall-clock time."""
    root = tmp_path_factory.mktemp("desk")
    start = time.perf_counter()
    proc = scenec_cli("assemble", FIXTURE, "--house", root / "none.json", "-o", root)
    return root, time.perf_counter() - start, proc


# -- 1 -------------------------------------------------------------------------------


def test_01_kernel_builds_are_manifold():
    with criterion(1, "manifold guarantee over >= 500 random kernel builds, < 60 s") as note:
        start = time.perf_counter()
        built = meshes = rejected = 0
        kinds, modifiers = set(), set()
        seed = 0
        while built < 500:
            prog = random_program(np.random.default_rng(seed), f"p{seed}")
            seed += 1
            try:
                out = execute_program(prog)
            except ExecError:
                rejected += 1
                continue
            built += 1
            kinds.add(prog.ops[0].kind)
            modifiers.update(type(op).__name__ for op in prog.ops if isinstance(op, (Bevel, Solidify, MirrorAbout, RadialArray)))
            for m in out:
                meshes += 1
                assert nonmanifold_edge_count(m) == 0, f"seed {seed - 1} part {m.part_name}"
        assert kinds == set(KINDS)
        assert modifiers == {"Bevel", "Solidify", "MirrorAbout", "RadialArray"}
        note["detail"] = f" ({built} builds, {meshes} meshes, {rejected} programs rejected by the executor)"
        assert time.perf_counter() - start < 60


# -- 2 -------------------------------------------------------------------------------


def test_02_nightstand_drawer_joint():
    with criterion(2, "nightstand SDF has one prismatic joint, axis (0,-1,0), limits [0, 0.4]"):
        plan = template_plan("nightstand", DEFAULT_DIMS["nightstand"])
        (drawer,) = [p for p in plan.parts if p.movable]
        assert drawer.dims[1] == pytest.approx(0.5)
        root = ET.fromstring(emit_sdf(sim_for("nightstand")))
        joints = root.findall("model/joint")
        assert [j.get("type") for j in joints] == ["prismatic"]
        axis = [float(v) for v in joints[0].findtext("axis/xyz").split()]
        assert axis == [0.0, -1.0, 0.0]
        assert abs(float(joints[0].findtext("axis/limit/lower")) - 0.0) <= 1e-6
        assert abs(float(joints[0].findtext("axis/limit/upper")) - 0.4) <= 1e-6


# -- 3 -------------------------------------------------------------------------------


def test_03_loop_budgets():
    with criterion(3, "budgets: 1+3 execute attempts per part, at most 1+2 critic rounds"):
        plan = template_plan("table", DEFAULT_DIMS["table"])
        counts = {}
        with pytest.raises(BuildFailure):
            build_with_repair(plan, CountingBackend(), executor=failing_executor(counts))
        assert counts and set(counts.values()) == {1 + 3}
        critic = CountingBackend(Verdict(False, ("always unhappy",)))
        with pytest.raises(BuildFailure) as info:
            build_with_repair(plan, critic)
        assert info.value.stage == "refine"
        assert critic.critiques == 1 + 2 and critic.revisions == 2
        assert LoopBudgets() == LoopBudgets(3, 2)


# -- 4 -------------------------------------------------------------------------------


def test_04_inertia():
    with criterion(4, "inertia: cube 1e-9, cylinder 0.5%, 50 convex solids within 2% of voxels, < 120 s") as note:
        start = time.perf_counter()
        cube, _, _ = inertia_tensor(make_box([1, 1, 1]), 1.0)
        assert np.abs(cube - np.eye(3) / 6).max() <= 1e-9
        cyl, _, _ = inertia_tensor(make_cylinder(0.5, 1.0, 32), 1.0)
        assert abs(cyl[2, 2] - 0.125) <= 0.005 * 0.125
        worst = 0.0
        for seed in range(50):
            mesh = random_convex(np.random.default_rng(1000 + seed))
            vol, _, oracle = voxel_inertia_oracle(mesh)
            got, _, _ = inertia_tensor(mesh, 1.0)
            err = np.abs(got - oracle / vol).max() / np.abs(oracle / vol).max()
            worst = max(worst, err)
        note["detail"] = f" (worst convex error {100 * worst:.2f}%)"
        assert worst <= 0.02
        assert time.perf_counter() - start < 120


# -- 5 -------------------------------------------------------------------------------


def test_05_metrics_match_oracles():
    with criterion(5, "COL/NAV/OOB/SUP/OPC on 100 scenes and UVI/NME on 100 meshes match oracles, < 5 min"):
        start = time.perf_counter()
        for seed in range(100):
            h = random_scene(np.random.default_rng(seed))
            frac, pairs = collision_metric(h)
            assert (frac, set(pairs)) == col_oracle(h), f"COL seed {seed}"
            assert nav_metric(h) == nav_oracle(h), f"NAV seed {seed}"
            pts = {i: sample_points(o.world_meshes(), 256, sample_seed(i, 0)) for i, o in h.objects.items()}
            frac, flagged = oob_metric(h)
            assert (frac, set(flagged)) == oob_oracle(h, pts), f"OOB seed {seed}"
            frac, bad = support_metric(h)
            assert (frac, set(bad)) == sup_oracle(h), f"SUP seed {seed}"
            frac, blocked = opening_clearance_metric(h)
            assert (frac, set(blocked)) == opc_oracle(h), f"OPC seed {seed}"
        checked, seed = 0, 0
        while checked < 100:
            try:
                meshes = execute_program(random_program(np.random.default_rng(5000 + seed)))
            except ExecError:
                meshes = []
            seed += 1
            for m in meshes[: 100 - checked]:
                assert nonmanifold_edge_count(m) == nme_oracle(m.triangles)
                assert uv_islands(m) == uvi_oracle(m)
                checked += 1
        assert time.perf_counter() - start < 300


# -- 6 -------------------------------------------------------------------------------


def test_06_oob_threshold():
    with criterion(6, "OOB: 99% of samples on the floor is kept, 98% is flagged"):
        assert oob_metric(threshold_house(99), samples_per_object=100) == (0.0, [])
        assert oob_metric(threshold_house(98), samples_per_object=100) == (1.0, ["probe"])


# -- 7 -------------------------------------------------------------------------------


def test_07_round_trip_and_determinism(tmp_path):
    with criterion(7, "SDF round trip for every template; two `scenec build --seed 7` runs are byte-identical"):
        for category in sorted(TEMPLATES):
            sim = sim_for(category)
            doc = parse_sdf(emit_sdf(sim))
            assert [link.name for link in doc.links] == [link.name for link in sim.links]
            for parsed, link in zip(doc.links, sim.links):
                assert abs(parsed.mass - link.attrs.mass) <= 1e-6
                assert np.abs(parsed.inertia - link.attrs.inertia).max() <= 1e-6
                assert np.abs(parsed.com - link.attrs.com).max() <= 1e-6
            for parsed, joint in zip(doc.joints, sim.joints):
                assert (parsed.parent_link, parsed.child_link, parsed.joint_type) == (joint.parent_link, joint.child_link, joint.joint_type)
                assert np.abs(np.subtract(parsed.axis, joint.axis)).max() <= 1e-6
                assert np.abs(np.subtract(parsed.limits, joint.limits)).max() <= 1e-6
            assert len(doc.joints) == len(sim.joints)
        for category in ("nightstand", "cabinet", "potted_plant", "chair"):
            req = tmp_path / f"{category}.json"
            req.write_text(json.dumps({"id": category, "category": category, "target_dims": list(DEFAULT_DIMS[category])}))
            for run in ("a", "b"):
                proc = scenec_cli("build", req, "-o", tmp_path / run, "--seed", 7)
                assert proc.returncode == 0, proc.stderr
        assert tree_hashes(tmp_path / "a") == tree_hashes(tmp_path / "b")


# -- 8 -------------------------------------------------------------------------------


def test_08_regen_isolation(desk, tmp_path):
    with criterion(8, "`scenec regen` leaf count 6 -> 12 changes only the plant's files"):
        root, _, proc = desk
        assert proc.returncode == 0, proc.stderr
        shutil.copytree(root, tmp_path / "h")
        before = tree_hashes(tmp_path / "h")
        out = scenec_cli("regen", "--house", tmp_path / "h" / "house_state.json", "--id", "plant", "--set", "parts[leaf].symmetry_tag.radial.count=12")
        assert out.returncode == 0, out.stderr
        after = tree_hashes(tmp_path / "h")
        owned = lambda k: k.startswith("assets/plant/") or k == "house_state.json"  # noqa: E731
        assert {k: v for k, v in before.items() if not owned(k)} == {k: v for k, v in after.items() if not owned(k)}
        assert any(before.get(k) != after.get(k) for k in after if k.startswith("assets/plant/"))
        leaves = [m for m in load_house(tmp_path / "h" / "house_state.json").objects["plant"].world_meshes(tmp_path / "h") if m.part_name.startswith("leaf")]
        assert len(leaves) == 12


# -- 9 -------------------------------------------------------------------------------


def test_09_verifier(ont):
    with criterion(9, "all templates verify clean, fused movable part rejected, verify is a fixed point"):
        assert len(TEMPLATES) >= 20
        for category in sorted(TEMPLATES):
            assert verify(template_plan(category, DEFAULT_DIMS[category]), ont).issues == (), category
        assert verify(fused_drawer_plan(), ont).verified_plan is None
        for name, plan in fixtures().items():
            report = verify(plan, ont)
            if report.verified_plan is not None:
                again = verify(report.verified_plan, ont)
                assert again.issues == () and again.verified_plan.to_json() == report.verified_plan.to_json(), name


# -- 10 ------------------------------------------------------------------------------


def test_10_desk_scene(desk):
    with criterion(10, "desk scene assembles in < 60 s, loads, SDFs validate, NAV matches oracle, invalid request skipped") as note:
        root, elapsed, proc = desk
        assert proc.returncode == 0, proc.stderr
        report = json.loads((root / "assemble_report.json").read_text())
        house = load_house(root / "house_state.json")
        assert len(report["placed"]) == 12 and set(house.objects) == set(report["placed"])
        assert [s["id"] for s in report["skipped"]] == ["broken"]
        routes = {o.route.value for o in house.objects.values()}
        assert {"WallArt", "ThinCover"} <= routes
        assert sum(bool(o.joints) for o in house.objects.values()) >= 2
        for obj in house.objects.values():
            assert validate_document(parse_sdf((root / obj.sdf_path).read_text())) == []
        nav = nav_metric(house)
        assert nav == nav_oracle(house)
        note["detail"] = f" (assemble {elapsed:.1f}s, NAV {nav:.4f})"
        assert elapsed < 60
