"""Command-line entry point.

Exit codes: 0 success, 1 validation or build failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from scenec.artic import compile_asset
from scenec.core import AssetRequest
from scenec.errors import ScenecError
from scenec.kernel.objio import fmt, write_text
from scenec.plan import ObjectPlan
from scenec.program import LoopBudgets
from scenec.router import load_ontology
from scenec.scene import (
    ASSET_DIR,
    HouseState,
    Room,
    add_object,
    load_house,
    place_object,
    regenerate,
    save_house,
)
from scenec.sdf import SDF_VERSION, parse_sdf, publish_asset_dir, validate_document

log = logging.getLogger("scenec")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
HOUSE_FILE = "house_state.json"


class UsageError(Exception):
    pass


def _read_json(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenecError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def make_backend(args, ont):
    if args.backend == "remote":
        from scenec.backend.remote import RemoteBackend

        if not args.endpoint:
            raise UsageError("--backend remote needs --endpoint")
        return RemoteBackend(args.endpoint, timeout=args.timeout)
    from scenec.backend.template import TemplateBackend

    return TemplateBackend(args.seed, ont)


# -- validate ------------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from scenec.verifier import verify

    ont = load_ontology(args.ontology)
    plan = ObjectPlan.from_dict(_read_json(args.plan))
    report = verify(plan, ont)
    print(report.to_text())
    return EXIT_OK if report.verified_plan is not None else EXIT_FAIL


# -- build ---------------------------------------------------------------------------------


def _build_one(req: AssetRequest, plan: ObjectPlan | None, backend, ont, allow_default: bool):
    from scenec.pipeline import build_plan, build_request
    from scenec.router import route

    if plan is None:
        return build_request(req, backend, ont, LoopBudgets(), allow_default)
    return build_plan(plan, req, route(req, ont, allow_default=True), backend, ont, LoopBudgets())


def cmd_build(args) -> int:
    from scenec.pipeline import request_for_plan

    ont = load_ontology(args.ontology)
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise ScenecError(f"{args.input}: expected a request or plan object")
    if "parts" in data:
        plan = ObjectPlan.from_dict(data)
        req = request_for_plan(plan, args.id or Path(args.input).stem)
    else:
        plan = None
        req = AssetRequest.from_dict(data)
    backend = make_backend(args, ont)
    result = _build_one(req, plan, backend, ont, args.allow_default)
    sim = compile_asset(result.asset, result.route)
    out = publish_asset_dir(args.output, sim, result.asset)
    report = {
        "id": req.id,
        "route": result.route.value,
        "verification": result.report.to_dict(),
        "stats": result.asset.stats,
        "links": [link.name for link in sim.links],
        "joints": [j.to_dict() for j in sim.joints],
        "warnings": list(sim.warnings),
        "path": str(out),
    }
    print(_dump(report), end="")
    return EXIT_OK


# -- assemble ------------------------------------------------------------------------------


def _parse_requests(data) -> tuple[list, list[dict], list]:
    """Rooms, parsed requests and per-entry parse failures from a request file."""
    if isinstance(data, list):
        data = {"requests": data}
    if not isinstance(data, dict) or not isinstance(data.get("requests"), list):
        raise ScenecError("request file needs a 'requests' list")
    rooms = [Room.from_dict(r) for r in data.get("rooms", [])]
    parsed, skipped = [], []
    for n, entry in enumerate(data["requests"]):
        try:
            parsed.append(AssetRequest.from_dict(entry))
        except (ScenecError, KeyError, TypeError, ValueError) as exc:
            rid = entry.get("id", f"#{n}") if isinstance(entry, dict) else f"#{n}"
            skipped.append({"id": rid, "stage": "request", "error": f"{type(exc).__name__}: {exc}"})
    return rooms, parsed, skipped


def _placement_order(reqs: list) -> list:
    """Request order with every support parent ahead of its children."""
    by_id = {r.id: r for r in reqs}
    done, out = set(), []

    def visit(r, stack=()):
        if r.id in done or r.id in stack:
            return
        parent = r.support.parent_id
        if parent in by_id:
            visit(by_id[parent], stack + (r.id,))
        done.add(r.id)
        out.append(r)

    for r in reqs:
        visit(r)
    return out


def _open_house(args, rooms) -> HouseState:
    out = Path(args.output)
    src = Path(args.house)
    if src.exists():
        house = load_house(src)
        if src.parent.resolve() != out.resolve() and (src.parent / ASSET_DIR).exists():
            shutil.copytree(src.parent / ASSET_DIR, out / ASSET_DIR, dirs_exist_ok=True)
        if rooms:
            known = {r.name for r in house.rooms}
            house.rooms.extend(r for r in rooms if r.name not in known)
    else:
        if not rooms:
            raise ScenecError(f"{src} does not exist and the request file declares no rooms")
        house = HouseState(list(rooms), {}, 0)
    house.root = out.resolve()
    return house


def cmd_assemble(args) -> int:
    ont = load_ontology(args.ontology)
    rooms, reqs, skipped = _parse_requests(_read_json(args.requests))
    Path(args.output).mkdir(parents=True, exist_ok=True)
    house = _open_house(args, rooms)
    backend = make_backend(args, ont)
    seen, unique = set(house.objects), []
    for r in reqs:
        if r.id in seen:
            skipped.append({"id": r.id, "stage": "request", "error": "DuplicateId: id already used"})
        else:
            seen.add(r.id)
            unique.append(r)

    def build(req):
        try:
            return req.id, _build_one(req, None, backend, ont, args.allow_default), None
        except ScenecError as exc:
            return req.id, None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        built = {rid: (res, err) for rid, res, err in pool.map(build, unique)}

    placed = []
    for req in _placement_order(unique):
        res, err = built[req.id]
        if err is None:
            try:
                house = add_object(house, place_object(res.asset, req, house, res.route))
                placed.append(req.id)
                continue
            except ScenecError as exc:
                err, stage = exc, "place"
        else:
            stage = getattr(err, "stage", "build")
        log.warning("skipping %s: %s", req.id, err)
        skipped.append({"id": req.id, "stage": stage, "error": f"{type(err).__name__}: {err}"})

    save_house(house, Path(args.output) / HOUSE_FILE)
    report = {"placed": placed, "skipped": skipped, "house": str(Path(args.output) / HOUSE_FILE)}
    write_text(Path(args.output) / "assemble_report.json", _dump(report))
    print(_dump(report), end="")
    return EXIT_OK if placed or not (reqs or skipped) else EXIT_FAIL


# -- regen ---------------------------------------------------------------------------------


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise UsageError(f"--set expects <path>=<value>, got {text!r}")
    path, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path.strip(), value


def cmd_regen(args) -> int:
    ont = load_ontology(args.ontology)
    overrides = dict(_parse_override(s) for s in args.set)
    if not Path(args.house).is_file():
        raise UsageError(f"no such file: {args.house}")
    house = load_house(args.house)
    new = regenerate(house, args.id, overrides, make_backend(args, ont), ont)
    if new is not house:
        save_house(new, args.house)
    print(_dump({"id": args.id, "changed": new is not house, "version": new.version}), end="")
    return EXIT_OK


# -- export --------------------------------------------------------------------------------


def _pose_text(tf) -> str:
    return " ".join(fmt(v) for v in list(tf.translation) + list(tf.rpy()))


def world_sdf(house: HouseState, out_dir: Path) -> str:
    root = ET.Element("sdf", version=SDF_VERSION)
    world = ET.SubElement(root, "world", name="house")
    ground = ET.SubElement(world, "model", name="ground")
    ET.SubElement(ground, "static").text = "true"
    link = ET.SubElement(ground, "link", name="floor")
    col = ET.SubElement(link, "collision", name="floor")
    plane = ET.SubElement(ET.SubElement(col, "geometry"), "plane")
    ET.SubElement(plane, "normal").text = "0 0 1"
    ET.SubElement(plane, "size").text = "100 100"
    for obj_id in sorted(house.objects):
        obj = house.objects[obj_id]
        inc = ET.SubElement(world, "include")
        ET.SubElement(inc, "name").text = obj_id
        ET.SubElement(inc, "uri").text = Path(_relpath(house.root / obj.sdf_path, out_dir)).as_posix()
        ET.SubElement(inc, "pose").text = _pose_text(obj.transform)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def _relpath(target: Path, start: Path) -> str:
    return os.path.relpath(target, start)


def cmd_export(args) -> int:
    if not Path(args.house).is_file():
        raise UsageError(f"no such file: {args.house}")
    house = load_house(args.house)
    out = Path(args.output) if args.output else house.root / "export"
    problems = {}
    for obj_id, obj in sorted(house.objects.items()):
        doc = parse_sdf((house.root / obj.sdf_path).read_text(encoding="utf-8"))
        issues = validate_document(doc)
        if issues:
            problems[obj_id] = issues
    if problems:
        print(_dump({"invalid": problems}), end="")
        return EXIT_FAIL
    if args.format == "sdf":
        target = out / "world.sdf"
        write_text(target, world_sdf(house, out))
    else:
        target = out / "scene_urdf.json"
        entries = [
            {
                "id": obj_id,
                "urdf": Path(_relpath(house.root / obj.urdf_path, out)).as_posix(),
                "xyz": [float(v) for v in obj.transform.translation],
                "rpy": [float(v) for v in obj.transform.rpy()],
            }
            for obj_id, obj in sorted(house.objects.items())
        ]
        write_text(target, _dump({"objects": entries}))
    print(_dump({"format": args.format, "path": str(target), "objects": len(house.objects)}), end="")
    return EXIT_OK


# -- eval ----------------------------------------------------------------------------------


def _table(scene: dict, objects: dict) -> str:
    lines = ["metric  value"]
    for key in ("col", "oob", "nav", "sup", "acc", "opc"):
        v = scene.get(key)
        lines.append(f"{key:<7} {'n/a' if v is None else f'{v:.4f}'}")
    rel = scene.get("relations") or []
    if rel:
        ok = sum(r["satisfied"] for r in rel)
        lines.append(f"rel     {ok}/{len(rel)}")
    if objects:
        lines.append("")
        lines.append(f"{'object':<20} {'mat':>4} {'pbr':>6} {'nme':>4} {'fac':>7} {'vtx':>7} {'uvi':>5}")
        for obj_id, r in sorted(objects.items()):
            lines.append(f"{obj_id:<20} {r['mat']:>4} {r['pbr']:>6.3f} {r['nme']:>4} {r['fac']:>7} {r['vtx']:>7} {r['uvi']:>5}")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    from scenec.metrics import SCENE_METRICS, scene_report
    from scenec.metrics.asset import asset_dir_metrics

    ont = load_ontology(args.ontology)
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(wanted) - set(SCENE_METRICS) - {"obj"}
    if unknown:
        raise UsageError(f"unknown metrics: {', '.join(sorted(unknown))}")
    if not Path(args.house).is_file():
        raise UsageError(f"no such file: {args.house}")
    house = load_house(args.house)
    relations = _read_json(args.relations) if args.relations else []
    scene = scene_report(house, ont, [m for m in wanted if m != "obj"], relations, seed=args.seed).to_dict()
    objects = {}
    if "obj" in wanted:
        for obj_id, obj in sorted(house.objects.items()):
            objects[obj_id] = asset_dir_metrics((house.root / obj.sdf_path).parent).to_dict()
    report = {"scene": scene, "objects": objects}
    if args.json == "-":
        print(_dump(report), end="")
    else:
        if args.json:
            write_text(Path(args.json), _dump(report))
        print(_table(scene, objects), end="")
    return EXIT_OK


# -- entry ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for the backend and metric sampling")
    common.add_argument("--jobs", type=int, default=4, help="parallel object builds")
    common.add_argument("--backend", choices=("template", "remote"), default="template")
    common.add_argument("--endpoint", help="remote planner base URL")
    common.add_argument("--timeout", type=float, default=30.0, help="remote call timeout in seconds")
    common.add_argument("--ontology", help="category ontology JSON (defaults to the shipped one)")
    common.add_argument("--allow-default", action="store_true", help="route unknown categories to StaticFurn")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scenec", description="Compile object plans into simulation-ready assets and scenes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="verify a plan file")
    p.add_argument("plan")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("build", parents=[common], help="build one asset from a request or plan")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--id", help="asset id when building a bare plan (defaults to the file stem)")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("assemble", parents=[common], help="build and place a request file into a house")
    p.add_argument("requests")
    p.add_argument("--house", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_assemble)

    p = sub.add_parser("regen", parents=[common], help="rebuild one object after editing its plan")
    p.add_argument("--house", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--set", action="append", required=True, metavar="PATH=VALUE")
    p.set_defaults(fn=cmd_regen)

    p = sub.add_parser("export", parents=[common], help="write simulator scene files")
    p.add_argument("--house", required=True)
    p.add_argument("--format", choices=("sdf", "urdf"), default="sdf")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("eval", parents=[common], help="score a house")
    p.add_argument("--house", required=True)
    p.add_argument("--metrics", default="col,nav,oob,sup,acc,opc,obj")
    p.add_argument("--relations", help="JSON list of {type, subject, reference}")
    p.add_argument("--json", help="write the JSON report here ('-' prints it instead of the table)")
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"scenec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenecError as exc:
        print(f"scenec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
