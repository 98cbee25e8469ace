"""Built-in simulation scenarios and the run driver that writes CSV, VTK and metadata."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import tensor as tn
from .config import ScenarioConfig
from .errors import ConfigError, StepFailureError
from .fem import BCSchedule, DirichletBC, SolveConfig, Solver, TimeFunction
from .growth import PotentialGrowthMaterial
from .isotropic import IsotropicGrowthMaterial
from .mesh import build_block_mesh, build_stripe_mesh
from .vtk import write_vtk

SERIES_HEADER = ("step", "time", "ux_p1", "uy_p1", "uz_p1", "szz_p1", "dlam", "phi", "rx", "ry", "rz", "diss")
PROBE_HEADER = ("step", "time", "probe", "ux", "uy", "uz", "szz", "dlam", "phi")

# top-face displacement of the constrained block: holds at 0, 0.3, -0.1 and 0 mm
CONSTRAINED_SCHEDULE = ((0, 0.0), (251, 0.3), (451, -0.1), (701, 0.0))

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STEP_FAILURE = 2


@dataclass
class Scenario:
    mesh: object
    material: object
    schedule: BCSchedule
    reaction_set: str
    reaction_sets: tuple


def _zero():
    return TimeFunction.constant(0.0)


def build_material(cfg: ScenarioConfig):
    params = cfg.material_params()
    if cfg.material == "isotropic":
        return IsotropicGrowthMaterial(params)
    return PotentialGrowthMaterial(params)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    material = build_material(cfg)
    if cfg.scenario == "clamped-stripe":
        mesh = build_stripe_mesh(cfg.mesh_level)
        entries = [DirichletBC("clamp", d, _zero()) for d in "xyz"]
        entries += [DirichletBC("sym_x", "x", _zero()), DirichletBC("sym_y", "y", _zero()),
                    DirichletBC("sym_z", "z", _zero())]
        return Scenario(mesh, material, BCSchedule(entries), "clamp", ("clamp", "sym_x", "sym_y", "sym_z"))
    n = 2**cfg.mesh_level
    mesh = build_block_mesh(n, n, n)
    entries = [DirichletBC("x0", "x", _zero()), DirichletBC("y0", "y", _zero()), DirichletBC("z0", "z", _zero())]
    sets = ("x0", "y0", "z0")
    if cfg.scenario == "constrained-block":
        entries.append(DirichletBC("z1", "z", TimeFunction(CONSTRAINED_SCHEDULE)))
        return Scenario(mesh, material, BCSchedule(entries), "z1", sets + ("z1",))
    return Scenario(mesh, material, BCSchedule(entries), "z0", sets)


@dataclass
class ProbeSite:
    name: str
    point: tuple
    node: int
    node_coords: tuple
    element: int
    gauss_point: int
    gauss_coords: tuple


def locate_probes(cfg, mesh, gp_coords):
    """Nearest node for displacements, nearest Gauss point for stresses and growth."""
    flat = gp_coords.reshape(-1, 3)
    sites = []
    for probe in cfg.probes:
        pt = np.asarray(probe.point, float)
        node = mesh.nearest_node(pt)
        g = int(np.argmin(np.linalg.norm(flat - pt, axis=1)))
        sites.append(ProbeSite(probe.name, tuple(probe.point), node, tuple(mesh.nodes[node].tolist()),
                               g // 8, g % 8, tuple(flat[g].tolist())))
    return sites


@dataclass
class RunResult:
    exit_code: int
    status: str
    steps_completed: int
    output_dir: Path
    message: str = ""
    last_row: dict | None = None


def _probe_values(site, u, fields):
    disp = u.reshape(-1, 3)[site.node]
    e, g = site.element, site.gauss_point
    return (float(disp[0]), float(disp[1]), float(disp[2]), float(fields["cauchy"][e, g, 2]),
            float(fields["growth"][e, g]), float(fields["phi"][e, g]))


def _snapshot(path, mesh, u, fields, growth_name):
    cauchy = fields["cauchy"].mean(axis=1)
    write_vtk(path, mesh,
              point_data={"displacement": u.reshape(-1, 3)},
              cell_data={"cauchy": tn.voigt_unpack(cauchy),
                         "szz": cauchy[:, 2],
                         "phi": fields["phi"].mean(axis=1),
                         growth_name: fields["growth"].mean(axis=1)})


def _metadata(cfg, scenario, sites, status, steps_done, message, diagnostics=None):
    growth_name = "theta" if cfg.material == "isotropic" else "dlam"
    return {
        "version": __version__,
        "status": status,
        "steps_completed": steps_done,
        "message": message,
        "config": cfg.to_dict(),
        "mesh": {"nodes": scenario.mesh.n_nodes, "elements": scenario.mesh.n_elements},
        "reaction_set": scenario.reaction_set,
        "columns": {
            "ux_p1,uy_p1,uz_p1": "displacement at the node nearest to probe p1 [mm]",
            "szz_p1": "Cauchy stress zz at the Gauss point nearest to probe p1 [N/mm^2]",
            "dlam": ("growth stretch theta" if growth_name == "theta" else "growth multiplier increment")
                    + " at the p1 Gauss point",
            "phi": "growth potential at the p1 Gauss point",
            "rx,ry,rz": f"reaction force sum over node set {scenario.reaction_set!r} [N]",
            "diss": "volume-integrated dissipation increment of the step",
        },
        "probes": [{"name": s.name, "point": list(s.point), "node": s.node, "node_coords": list(s.node_coords),
                    "element": s.element, "gauss_point": s.gauss_point, "gauss_coords": list(s.gauss_coords)}
                   for s in sites],
        "probe_method": {"displacement": "nearest node", "stress": "nearest Gauss point"},
        "diagnostics": diagnostics or {},
    }


def run_scenario(cfg: ScenarioConfig, progress=None) -> RunResult:
    """Run ``cfg`` to completion, writing ``series.csv``, ``config.json``, ``metadata.json``
    and optional VTK snapshots into ``cfg.output_dir``.

    Returns a :class:`RunResult` whose ``exit_code`` is 0 on success and 2 when a step
    fails (outputs up to the last accepted step are kept).
    """
    try:
        scenario = build_scenario(cfg)
        solver = Solver(scenario.mesh, scenario.material, scenario.schedule,
                        SolveConfig(dt=cfg.dt, steps=cfg.steps), scenario.reaction_sets)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sites = locate_probes(cfg, scenario.mesh, solver.gauss_point_coordinates())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    growth_name = "theta" if cfg.material == "isotropic" else "dlam"
    vtk_dir = out / "vtk"
    if cfg.vtk_every:
        vtk_dir.mkdir(exist_ok=True)
    status, message, diagnostics = "completed", "", {}
    done = 0
    last = None
    with open(out / "series.csv", "w", newline="", encoding="utf-8") as fs, \
            open(out / "probes.csv", "w", newline="", encoding="utf-8") as fp:
        series = csv.writer(fs, lineterminator="\n")
        probes = csv.writer(fp, lineterminator="\n")
        series.writerow(SERIES_HEADER)
        probes.writerow(PROBE_HEADER)
        for _ in range(cfg.steps):
            try:
                res = solver.assemble_and_solve_step()
            except StepFailureError as exc:
                status, message, diagnostics = "step-failure", str(exc), exc.diagnostics
                break
            done = res.step
            fields = res.fields
            vals = [_probe_values(s, res.u, fields) for s in sites]
            r = res.reactions[scenario.reaction_set]
            row = (res.step, res.time) + vals[0] + (float(r[0]), float(r[1]), float(r[2]),
                                                    float(fields["dissipation"]))
            series.writerow(row)
            for s, v in zip(sites, vals):
                probes.writerow((res.step, res.time, s.name) + v)
            last = dict(zip(SERIES_HEADER, row))
            if cfg.vtk_every and (res.step % cfg.vtk_every == 0 or res.step == cfg.steps):
                _snapshot(vtk_dir / f"step_{res.step:05d}.vtk", scenario.mesh, res.u, fields, growth_name)
            if progress is not None:
                progress(res)
    meta = _metadata(cfg, scenario, sites, status, done, message, diagnostics)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="utf-8")
    code = EXIT_OK if status == "completed" else EXIT_STEP_FAILURE
    return RunResult(code, status, done, out, message, last)
