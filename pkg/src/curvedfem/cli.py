"""Command-line interface: convergence studies and mesh export.

Examples
--------
::

    curvedfem study --problem ventcel-disk --r 1,2,3 --k 1,2,3,4 --levels 5
    curvedfem study --config study.toml --out results
    curvedfem mesh --domain flower --r 3 --level 3 --out meshes
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analysis import NORMS, _max_boundary_distance, eoc_table, normalize_problem, run_study, write_csv
from .errors import CurvedFEMError, StudyAborted
from .mesh import elevate, generate_disk_mesh, generate_flower_mesh, generate_sphere_surface_mesh
from .mesh_io import write_vtk

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
LIFTS = ("modified", "elliott")
FORMATS = ("csv", "markdown")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    problem: str = "ventcel_disk"
    r_list: list = field(default_factory=lambda: [1, 2, 3])
    k_list: list = field(default_factory=lambda: [1, 2, 3, 4])
    levels: int = 4
    lift: str = "modified"
    output_dir: str = "."
    format: str = "csv"
    start: int = 1

    def validate(self):
        try:
            self.problem = normalize_problem(self.problem)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.r_list or not self.k_list:
            raise ConfigError("r and k lists must be non-empty")
        if any(r not in (1, 2, 3) for r in self.r_list):
            raise ConfigError("r values must be in 1..3")
        if any(k not in (1, 2, 3, 4) for k in self.k_list):
            raise ConfigError("k values must be in 1..4")
        if self.levels < 2:
            raise ConfigError("levels must be ≥ 2")
        if self.lift not in LIFTS:
            raise ConfigError(f"lift must be one of {LIFTS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.start < 0:
            raise ConfigError("start level must be >= 0")
        return self


def _int_list(text):
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


_TOML_KEYS = {
    "problem": "problem",
    "r": "r_list",
    "k": "k_list",
    "levels": "levels",
    "lift": "lift",
    "out": "output_dir",
    "output_dir": "output_dir",
    "format": "format",
    "start": "start",
}


def load_config(args):
    """Build a :class:`StudyConfig` from an optional TOML file and flags.

    Flags given on the command line override values from the file.
    """
    values = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        data = data.get("study", data)
        for key, val in data.items():
            if key not in _TOML_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            values[_TOML_KEYS[key]] = val
    flags = {
        "problem": args.problem,
        "r_list": args.r,
        "k_list": args.k,
        "levels": args.levels,
        "lift": args.lift,
        "output_dir": args.out,
        "format": args.format,
        "start": args.start,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    for key in ("r_list", "k_list"):
        if key in values:
            values[key] = _int_list(values[key])
    for key in ("levels", "start"):
        if key in values:
            try:
                values[key] = int(values[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be an integer") from None
    return StudyConfig(**values).validate()


def cmd_study(config):
    os.makedirs(config.output_dir, exist_ok=True)
    reports = []
    for r in config.r_list:
        for k in config.k_list:
            try:
                rep = run_study(config.problem, r, k, config.levels, config.lift, start=config.start)
            except StudyAborted as exc:
                print(f"error: study r={r} k={k}: stage '{exc.stage}' failed: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
            except CurvedFEMError as exc:
                print(f"error: study r={r} k={k}: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
            name = f"study_{config.problem}_r{r}_k{k}.csv"
            write_csv(rep, os.path.join(config.output_dir, name))
            reports.append(rep)
            if config.format == "csv":
                with open(os.path.join(config.output_dir, name)) as fh:
                    print(f"# {name}")
                    print(fh.read(), end="")
    norms = [n for n in NORMS if reports and n in reports[0].eoc]
    title = f"# {config.problem} ({config.lift} lift, {config.levels} levels)\n\n"
    tables = title + "\n".join(eoc_table(reports, n, sorted(config.k_list)) for n in norms)
    with open(os.path.join(config.output_dir, "eoc_table.md"), "w") as fh:
        fh.write(tables)
    if config.format == "markdown":
        print(tables, end="")
    return EXIT_OK


_GENERATORS = {
    "disk": generate_disk_mesh,
    "flower": generate_flower_mesh,
    "sphere": generate_sphere_surface_mesh,
}


def cmd_mesh(domain, r, level, out):
    if domain not in _GENERATORS:
        raise ConfigError(f"domain must be one of {sorted(_GENERATORS)}")
    if r not in (1, 2, 3, 4):
        raise ConfigError("r must be in 1..4")
    if level < 0:
        raise ConfigError("level must be >= 0")
    os.makedirs(out, exist_ok=True)
    stage = "mesh"
    try:
        mesh = _GENERATORS[domain](level)
        stage = "elevate"
        curved = elevate(mesh, r)
        stage = "export"
        base = os.path.join(out, f"mesh_{domain}_r{r}_l{level}")
        write_vtk(base + ".vtk", curved)
        summary = {
            "domain": domain,
            "r": r,
            "level": level,
            "n_cells": int(mesh.n_cells),
            "n_boundary_faces": int(mesh.n_cells if mesh.surface else len(mesh.boundary_faces)),
            "h": float(mesh.h),
            "max_distance": _max_boundary_distance(curved),
        }
    except CurvedFEMError as exc:
        print(f"error: stage '{stage}' failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    with open(base + ".json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="curvedfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run convergence studies and write EOC tables")
    st.add_argument("--problem", help="ventcel-disk or sphere-laplace")
    st.add_argument("--r", help="geometric degrees, e.g. 1,2,3")
    st.add_argument("--k", help="finite element degrees, e.g. 1,2,3,4")
    st.add_argument("--levels", help="number of refinement levels (>= 2)")
    st.add_argument("--start", help="coarsest refinement level")
    st.add_argument("--lift", help="modified or elliott")
    st.add_argument("--config", help="TOML file with the same keys")
    st.add_argument("--out", help="output directory")
    st.add_argument("--format", help="what to echo on stdout: csv or markdown")

    me = sub.add_parser("mesh", help="export a curved mesh as VTK with a JSON summary")
    me.add_argument("--domain", default="disk", help="disk, flower or sphere")
    me.add_argument("--r", type=int, default=2)
    me.add_argument("--level", type=int, default=2)
    me.add_argument("--out", default=".")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "study":
            return cmd_study(load_config(args))
        return cmd_mesh(args.domain, args.r, args.level, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
