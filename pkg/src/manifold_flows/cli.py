"""Command-line front end.

Every run is described by a :class:`RunConfig`.  It starts from a named
scenario preset, is overlaid with an optional JSON config file and then with
command-line flags.  ``--dump-config`` writes the effective config so a run
can be repeated exactly.

Exit codes: 0 success, 1 computation error (pole, budget, ...), 2 config error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ballmodel, flow, reeb
from .autoform import AutomorphicField, RationalMap, ThetaOverflowError, covariance_residual, eval_field
from .group import (
    FundamentalDomain,
    GroupPresentation,
    box_domain,
    enumerate_ball,
    example_domain,
    example_presentation,
    validate_side_pairing,
)
from .moebius import MoebiusMap, PoleError
from .quaternion import DomainError, HPoint

SCENARIOS = ("example3", "pendulum", "figure8", "reeb-genus2", "heegaard-s3")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "example3"
    generators: list = field(default_factory=list)
    names: list = field(default_factory=list)
    h1: dict = field(default_factory=dict)
    h2: dict = field(default_factory=dict)
    m: int = 2
    radius: int = 4
    domain: str = "example"
    t_end: float = 5.0
    rtol: float = 1e-8
    atol: float = 1e-10
    face_tol: float = 1e-10
    eq_threshold: float = 1e-12
    max_steps: int = 200_000
    p0: Optional[list] = None
    n_seeds: int = 1
    seed: int = 0
    workers: int = 1
    radii: list = field(default_factory=lambda: [2, 4, 6])
    generator: str = "T2"
    n_points: int = 10
    g_over_l: float = 9.8
    k: float = 0.5
    x0: list = field(default_factory=lambda: [1.0, 0.5, 0.0])
    x2_max: float = 10.0
    pairing: dict = field(default_factory=dict)
    rho: float = 0.5
    bands: int = 5
    psi: list = field(default_factory=lambda: [[0, 1], [1, 0]])
    grid: int = 32
    projection: list = field(default_factory=lambda: [0, 1])
    out: Optional[str] = None
    svg: Optional[str] = None
    events: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.m < 2:
            raise ConfigError(f"m = {self.m} is not allowed: the field is only invariant for weight m >= 2")
        if self.radius < 0:
            raise ConfigError("ball radius N must be >= 0")
        if any(r < 0 for r in self.radii):
            raise ConfigError("ball radii must be >= 0")
        for name in ("rtol", "atol", "face_tol", "eq_threshold", "g_over_l", "t_end"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.max_steps < 1 or self.n_seeds < 1 or self.n_points < 1 or self.grid < 2:
            raise ConfigError("max_steps, n_seeds, n_points must be >= 1 and grid >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.domain not in ("example", "klein", "torus3"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        for path in (self.out, self.svg, self.events):
            if path:
                parent = os.path.dirname(os.path.abspath(path))
                if not os.path.isdir(parent):
                    raise ConfigError(f"output directory {parent} does not exist")
        try:
            self.presentation()
            self.h_maps()
            reeb.HeegaardGluing(1, tuple(map(tuple, self.psi)))
            if self.pairing:
                ballmodel.FacePairing.from_json(self.pairing)
        except (ValueError, TypeError, KeyError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.generator not in self.presentation().names:
            raise ConfigError(f"generator {self.generator!r} is not one of {list(self.presentation().names)}")

    def presentation(self) -> GroupPresentation:
        gens = tuple(MoebiusMap.from_json(g) for g in self.generators)
        return GroupPresentation(gens, tuple(self.names) if self.names else None)

    def h_maps(self) -> tuple[RationalMap, RationalMap]:
        return RationalMap.from_json(self.h1), RationalMap.from_json(self.h2)


def _example_generators() -> tuple[list, list]:
    G = example_presentation()
    return [T.to_json() for T in G.generators], list(G.names)


def preset(name: str) -> dict:
    """Config dictionary of a built-in scenario."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    gens, names = _example_generators()
    s3 = math.sqrt(3.0)
    base = dict(
        scenario=name,
        generators=gens,
        names=names,
        h1={"numerator": [[0.5, s3 / 2, 5.0, 0.0], [1.0, 0.0, 0.0, 0.0]], "denominator": [[1.0, 0.0, 0.0, 0.0]]},
        h2={"numerator": [[1.0, 0.0, 0.0, 0.0]], "denominator": [[1.0, 0.0, 0.0, 0.0]]},
        pairing=ballmodel.figure_eight_pairing().to_json(),
    )
    if name == "example3":
        base.update(domain="example", t_end=5.0, p0=[0.3, 0.2, 1.0])
    elif name == "pendulum":
        base.update(domain="klein", t_end=100.0, rtol=1e-9, atol=1e-12, k=0.5, x0=[1.0, 0.5, 0.0])
    return base


# --- rendering --------------------------------------------------------------


def render_portrait(trajectories: Sequence[flow.Trajectory], projection=(0, 1), outline=None,
                    width: int = 600, height: int = 600, title: str = "") -> str:
    """SVG 1.1 document with one polyline per trajectory segment.

    Pairing events are marked by a small circle at the exit point and a
    square at the entry point.  ``outline`` is an optional closed polygon
    (already projected) drawn behind the curves.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("render_portrait needs at least one trajectory")
    i, j = projection
    polylines = []
    for tr in trajectories:
        for seg in tr.segments:
            pts = np.array(seg.points)
            if len(pts):
                polylines.append(pts[:, [i, j]])
    allpts = np.concatenate(polylines + ([np.asarray(outline, dtype=float)] if outline is not None else []))
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    margin = 20.0
    sx = (width - 2 * margin) / span[0]
    sy = (height - 2 * margin) / span[1]

    def fmt(p):
        x = margin + (p[0] - lo[0]) * sx
        y = height - margin - (p[1] - lo[1]) * sy
        return f"{x:.3f},{y:.3f}"

    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n')
    out.write('<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
              f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n')
    if title:
        out.write(f"<title>{title}</title>\n")
    out.write(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    if outline is not None:
        pts = " ".join(fmt(p) for p in np.asarray(outline, dtype=float))
        out.write(f'<polygon points="{pts}" fill="none" stroke="#888888" stroke-width="1"/>\n')
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")
    for k, tr in enumerate(trajectories):
        colour = palette[k % len(palette)]
        out.write(f'<g stroke="{colour}" fill="none" stroke-width="1.2">\n')
        for seg in tr.segments:
            pts = np.array(seg.points)
            if len(pts) == 0:
                continue
            if len(pts) == 1:
                out.write(f'<circle cx="{fmt(pts[0, [i, j]]).split(",")[0]}" '
                          f'cy="{fmt(pts[0, [i, j]]).split(",")[1]}" r="2"/>\n')
                continue
            out.write('<polyline points="' + " ".join(fmt(p) for p in pts[:, [i, j]]) + '"/>\n')
        for ev in tr.events:
            ex = fmt(ev.exit_point[[i, j]]).split(",")
            en = fmt(ev.entry_point[[i, j]]).split(",")
            out.write(f'<circle cx="{ex[0]}" cy="{ex[1]}" r="3"/>\n')
            out.write(f'<rect x="{float(en[0]) - 3:.3f}" y="{float(en[1]) - 3:.3f}" width="6" height="6"/>\n')
        out.write("</g>\n")
    out.write("</svg>\n")
    return out.getvalue()


def write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --- scenario objects ----------------------------------------------------------


def build_field(cfg: RunConfig) -> AutomorphicField:
    ball = enumerate_ball(cfg.presentation(), cfg.radius)
    h1, h2 = cfg.h_maps()
    return AutomorphicField(h1, h2, ball, cfg.m, cfg.workers if cfg.workers > 1 else None)


def build_domain(cfg: RunConfig) -> FundamentalDomain:
    if cfg.domain == "example":
        return example_domain()
    if cfg.domain == "klein":
        return flow.klein_bottle_domain(cfg.x2_max)
    return box_domain((math.pi,) * 3, name="3-torus")


def domain_outline(cfg: RunConfig, projection=(0, 1)):
    if cfg.domain == "example" and tuple(projection) == (0, 1):
        s3 = math.sqrt(3.0)
        return [(0.0, 0.0), (2.0, 0.0), (3.0, s3), (1.0, s3)]
    D = build_domain(cfg)
    (a0, a1), (b0, b1) = D.sample_box[projection[0]], D.sample_box[projection[1]]
    return [(a0, b0), (a1, b0), (a1, b1), (a0, b1)]


def vector_field(cfg: RunConfig):
    if cfg.scenario == "pendulum" or cfg.domain == "klein":
        return flow.pendulum_vector_field(flow.PendulumParams(cfg.g_over_l, cfg.k))
    return build_field(cfg).velocity


def seed_points(cfg: RunConfig, D: FundamentalDomain) -> list[np.ndarray]:
    if cfg.n_seeds == 1 and cfg.p0 is not None:
        return [np.array(cfg.p0, dtype=float)]
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in D.sample_box], dtype=float)
    hi = np.array([b[1] for b in D.sample_box], dtype=float)
    pts = []
    while len(pts) < cfg.n_seeds:
        p = rng.uniform(lo, hi)
        if D.max_violation(p) < -1e-6:
            pts.append(p)
    return pts


def integrate_batch(cfg: RunConfig, fn, D, seeds) -> list[flow.Trajectory]:
    def one(p):
        return flow.integrate_wrapped(fn, p, cfg.t_end, D, rtol=cfg.rtol, atol=cfg.atol,
                                      face_tol=cfg.face_tol, eq_threshold=cfg.eq_threshold,
                                      max_steps=cfg.max_steps)

    if cfg.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(one, seeds))
    return [one(p) for p in seeds]


def covariance_points(cfg: RunConfig) -> list[HPoint]:
    rng = np.random.default_rng(cfg.seed)
    D = example_domain()
    (x0, x1), (y0, y1), _ = D.sample_box
    pts = []
    while len(pts) < cfg.n_points:
        x, y, r = rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(0.5, 2.0)
        if D.contains(np.array([x, y, r]), 0.0):
            pts.append(HPoint(x, y, r))
    return pts


# --- commands -------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_validate(cfg: RunConfig, args, out) -> int:
    if cfg.scenario == "figure8":
        return cmd_ball(cfg, args, out)
    if cfg.scenario in ("reeb-genus2", "heegaard-s3"):
        raise ConfigError(f"scenario {cfg.scenario!r} has no fundamental domain to validate")
    D = build_domain(cfg)
    rep = validate_side_pairing(D, n_samples=args.samples, seed=cfg.seed)
    for line in rep.lines():
        print(line, file=out)
    return 0 if rep.ok else 1


def cmd_field_eval(cfg: RunConfig, args, out) -> int:
    F = build_field(cfg)
    pts = _parse_points(args.points) if args.points else [cfg.p0 or [0.3, 0.2, 1.0]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "r", "F_1", "F_i", "F_j", "F_k"])
    for p in pts:
        val = eval_field(F, HPoint(*p))
        w.writerow([*(_fmt(v) for v in p), *(_fmt(v) for v in val)])
    _emit(buf.getvalue(), cfg.out, out)
    return 0


def cmd_covariance(cfg: RunConfig, args, out) -> int:
    G = cfg.presentation()
    T = G.generators[G.names.index(cfg.generator)]
    pts = covariance_points(cfg)
    h1, h2 = cfg.h_maps()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius", "generator", "ball_size", "max_residual", "mean_residual"])
    for N in cfg.radii:
        ball = enumerate_ball(G, int(N))
        F = AutomorphicField(h1, h2, ball, cfg.m, cfg.workers if cfg.workers > 1 else None)
        res = [covariance_residual(F, T, p) for p in pts]
        w.writerow([int(N), cfg.generator, len(ball), _fmt(max(res)), _fmt(math.fsum(res) / len(res))])
    _emit(buf.getvalue(), cfg.out, out)
    return 0


def _trajectory_table(trajs, coords, extra=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    multi = len(trajs) > 1
    w.writerow((["trajectory"] if multi else []) + ["t", *coords, *extra, "segment", "event"])
    for n, tr in enumerate(trajs):
        for k, seg in enumerate(tr.segments):
            label = tr.events[k - 1].side if k > 0 else ""
            for s, (t, x) in enumerate(zip(seg.times, seg.points)):
                row = ([n] if multi else []) + [_fmt(t), *(_fmt(v) for v in x), *(_fmt(v) for v in extra.values()),
                                                k, label if s == 0 else ""]
                w.writerow(row)
    return buf.getvalue()


def _event_table(trajs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory", "t", "side", "entry_side", "exit_x", "exit_y", "exit_z", "entry_x", "entry_y",
                "entry_z"])
    for n, tr in enumerate(trajs):
        for ev in tr.events:
            w.writerow([n, _fmt(ev.t), ev.side, ev.entry_side, *(_fmt(v) for v in ev.exit_point),
                        *(_fmt(v) for v in ev.entry_point)])
    return buf.getvalue()


def _report(trajs, out):
    for n, tr in enumerate(trajs):
        msg = f" ({tr.message})" if tr.message else ""
        print(f"trajectory {n}: status={tr.status}{msg} events={len(tr.events)} "
              f"t_final={tr.t_final:.6g} final={np.array2string(tr.final_point, precision=6)}", file=out)


def _finish(cfg: RunConfig, trajs, coords, out, extra=None) -> int:
    table = _trajectory_table(trajs, coords, extra)
    if cfg.out:
        write_text(cfg.out, table)
    if cfg.events:
        write_text(cfg.events, _event_table(trajs))
    if cfg.svg:
        write_text(cfg.svg, render_portrait(trajs, tuple(cfg.projection), domain_outline(cfg, cfg.projection),
                                            title=cfg.scenario))
    _report(trajs, out)
    for tr in trajs:
        tr.raise_for_status()
    return 0


def cmd_integrate(cfg: RunConfig, args, out) -> int:
    if cfg.scenario in ("figure8", "reeb-genus2", "heegaard-s3"):
        raise ConfigError(f"scenario {cfg.scenario!r} has no trajectory integration")
    D = build_domain(cfg)
    trajs = integrate_batch(cfg, vector_field(cfg), D, seed_points(cfg, D))
    coords = ("x1", "x2", "x3") if cfg.domain != "example" else ("x", "y", "r")
    return _finish(cfg, trajs, coords, out)


def cmd_demo(cfg: RunConfig, args, out) -> int:
    if args.which == "pendulum":
        cfg.domain = "klein"
        D = build_domain(cfg)
        fn = flow.pendulum_vector_field(flow.PendulumParams(cfg.g_over_l, cfg.k))
        trajs = integrate_batch(cfg, fn, D, [np.array(cfg.x0, dtype=float)])
        rc = _finish(cfg, trajs, ("x1", "x2", "x3"), out, {"x4": cfg.k})
        if trajs[0].events:
            print(f"continuity residual {flow.continuity_residual(trajs[0], fn):.3e}", file=out)
        return rc
    cfg.domain = "example"
    D = build_domain(cfg)
    F = build_field(cfg)
    trajs = integrate_batch(cfg, F.velocity, D, [np.array(cfg.p0 or [0.3, 0.2, 1.0], dtype=float)])
    rc = _finish(cfg, trajs, ("x", "y", "r"), out)
    if trajs[0].events:
        print(f"continuity residual {flow.continuity_residual(trajs[0], F.velocity):.3e}", file=out)
    return rc


def cmd_ball(cfg: RunConfig, args, out) -> int:
    pairing = ballmodel.FacePairing.from_json(cfg.pairing) if cfg.pairing else None
    T1, T2, P = ballmodel.build_complex(pairing)
    classes = ballmodel.edge_cycles(P)
    for n, c in enumerate(classes):
        print(f"edge class {n}: " + " ".join(c.edges), file=out)
    rep = ballmodel.dihedral_check(classes, T1)
    for line in rep.lines():
        print(line, file=out)
    if P.orientable:
        res = ballmodel.vertex_map_residual(T1, T2, P)
        print(f"pairing isometries: max vertex error {res:.3e}", file=out)
    else:
        print("pairing mixes vertex-map parities: the glued space is not orientable", file=out)
    ok = rep.ok and len(classes) == 2
    print("proper" if ok else "NOT proper", file=out)
    return 0 if ok else 1


def cmd_reeb(cfg: RunConfig, args, out) -> int:
    T = reeb.torus_field()
    if args.which == "indices":
        eqs = reeb.find_equilibria(T)
        total = 0
        for row in reeb.index_report(T, eqs):
            idx = row["indices"]
            total += idx[0]
            print(f"equilibrium ({row['point'][0]:.6f}, {row['point'][1]:.6f}): index {idx[0]:+d} "
                  f"(radii 0.05/0.1/0.2 -> {idx})", file=out)
        print(f"torus index sum {total}", file=out)
        G = reeb.connected_sum_field(T, T.reversed(), cfg.rho)
        print(f"genus-2 connected sum (rho={cfg.rho}) index sum {G.index_sum()}", file=out)
        L = reeb.leaf_system(T, bands=cfg.bands)
        print(f"leaf system: {len(L.equilibria())} equilibria over {cfg.bands} bands plus the origin", file=out)
        return 0
    psi = tuple(map(tuple, cfg.psi))
    X2 = T
    X1 = reeb.pullback(X2, psi)
    res = reeb.heegaard_glue(X1, X2, reeb.HeegaardGluing(1, psi), n=cfg.grid)
    print(f"psi = {list(map(list, psi))}; boundary matching residual {res.boundary_residual:.3e}", file=out)
    if cfg.out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "u", "v", "du", "dv"])
        for c in res.collar[0]:
            for p, v in zip(c.points.reshape(-1, 2), c.vectors.reshape(-1, 2)):
                w.writerow([_fmt(c.t), _fmt(p[0]), _fmt(p[1]), _fmt(v[0]), _fmt(v[1])])
        write_text(cfg.out, buf.getvalue())
    return 0


def _emit(text: str, path: Optional[str], out):
    if path:
        write_text(path, text)
    else:
        out.write(text)


def _parse_points(text: str) -> list[list[float]]:
    try:
        pts = [[float(v) for v in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse points {text!r}") from exc
    if not pts or any(len(p) != 3 for p in pts):
        raise ConfigError("points are given as 'x,y,r;x,y,r'")
    return pts


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc


# --- argument handling -------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--dump-config", dest="dump_config", help="write the effective config here")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--events")
    p.add_argument("--radius", type=int, help="ball radius N")
    p.add_argument("--m", type=int)
    p.add_argument("--t", dest="t_end", type=float)
    p.add_argument("--tol", type=float, help="relative integration tolerance")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p.add_argument("--p0", help="initial point x,y,r")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="manifold-flows", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", parents=[common], help="side-pairing report")
    p.add_argument("--samples", type=int, default=100)
    p = sub.add_parser("field-eval", parents=[common], help="evaluate the automorphic field")
    p.add_argument("--points", help="'x,y,r;x,y,r'")
    p = sub.add_parser("covariance", parents=[common], help="truncated covariance residuals")
    p.add_argument("--radii")
    p.add_argument("--generator")
    p.add_argument("--n-points", dest="n_points", type=int)
    sub.add_parser("integrate", parents=[common], help="integrate wrapped trajectories")
    p = sub.add_parser("demo", parents=[common], help="worked scenarios")
    p.add_argument("which", choices=("pendulum", "example3"))
    p.add_argument("--k", type=float)
    p.add_argument("--g-over-l", dest="g_over_l", type=float)
    p.add_argument("--x0", help="x1,x2,x3")
    p = sub.add_parser("ball", parents=[common], help="figure-eight complex")
    p.add_argument("which", choices=("check",))
    p = sub.add_parser("reeb", parents=[common], help="Reeb constructions")
    p.add_argument("which", choices=("indices", "glue"))
    p.add_argument("--psi", help="a,b,c,d for the matrix ((a,b),(c,d))")
    p.add_argument("--rho", type=float)
    p.add_argument("--grid", type=int)
    return parser


_DEFAULT_SCENARIO = {"demo": {"pendulum": "pendulum", "example3": "example3"},
                     "ball": "figure8", "reeb": {"indices": "reeb-genus2", "glue": "heegaard-s3"}}


def resolve_config(args) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_data, dict):
            raise ConfigError("config file must hold a JSON object")
    else:
        file_data = {}
    scenario = args.scenario or file_data.get("scenario")
    if scenario is None:
        d = _DEFAULT_SCENARIO.get(args.command, "example3")
        scenario = d[args.which] if isinstance(d, dict) else d
    data.update(preset(scenario))
    data.update(file_data)
    data["scenario"] = scenario
    cfg = RunConfig.from_dict(data)

    simple = ("seed", "workers", "out", "svg", "events", "radius", "m", "t_end", "max_steps", "n_seeds",
              "generator", "n_points", "k", "g_over_l", "rho", "grid")
    for name in simple:
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if args.tol is not None:
        cfg.rtol = args.tol
    if args.p0:
        cfg.p0 = _parse_floats(args.p0)
    if getattr(args, "radii", None):
        cfg.radii = [int(v) for v in _parse_floats(args.radii)]
    if getattr(args, "x0", None):
        cfg.x0 = _parse_floats(args.x0)
    if getattr(args, "psi", None):
        v = _parse_floats(args.psi)
        if len(v) != 4:
            raise ConfigError("--psi takes four integers a,b,c,d")
        cfg.psi = [[v[0], v[1]], [v[2], v[3]]]
    cfg.validate()
    return cfg


COMMANDS = {
    "validate": cmd_validate,
    "field-eval": cmd_field_eval,
    "covariance": cmd_covariance,
    "integrate": cmd_integrate,
    "demo": cmd_demo,
    "ball": cmd_ball,
    "reeb": cmd_reeb,
}

COMPUTATION_ERRORS = (PoleError, flow.PoleHitError, flow.BudgetExceededError, ThetaOverflowError,
                      ArithmeticError, ballmodel.InvalidPairingError, reeb.ZeroOnCircleError,
                      reeb.ClearanceError, flow.InitialPointOutsideDomain, DomainError)


def run(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            write_text(args.dump_config, cfg.to_json())
        return COMMANDS[args.command](copy.deepcopy(cfg), args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    except COMPUTATION_ERRORS as exc:
        print(f"computation error: {exc}", file=err)
        return 1
    except Exception as exc:  # keep the documented exit codes for anything unexpected
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
