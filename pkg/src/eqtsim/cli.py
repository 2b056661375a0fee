"""Command-line front end.

Every command resolves its parameters as built-in defaults, then the JSON
``--config-file``, then explicit flags, and writes the resolved values plus
SHA-256 hashes of its artifacts to ``manifest.json`` in ``--out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bloch, detector, fractal, liouville, modelio, models, pdp, render
from .rng import RngStream

log = logging.getLogger("eqtsim")

# keys that affect scheduling only; excluded from the manifest so that
# output is byte-identical across worker counts
EXECUTION_KEYS = {"threads", "out", "config_file", "command"}

DEFAULTS = {
    "fractal": dict(config="octahedron", eps=0.58, jumps=1_000_000, kappa=1.0, omega=0.0,
                    r0=None, view=None, size=512, window=None, cloud_format="bin"),
    "verify": dict(model="qubit-toy", n_traj=20_000, grid="0.25,0.5,1,2", threshold=0.02, dt=None),
    "liouville": dict(model="qubit-toy", model_file=None, grid="0.25,0.5,1,2", dt=None),
    "sierpinski": dict(points=100_000, size=512, burn_in=50),
    "dimension": dict(input=None, scales=None),
    "lyapunov": dict(config="octahedron", eps=0.58, jumps=1_000_000, kappa=1.0, omega=0.0),
    "detector": dict(sigma_sweep=False, kappa=1.0, dt=1e-3, a=0.0, sigma=0.1,
                     sigmas="0.4,0.2,0.1,0.05,0.025", dx=1e-3, half_width=8.0, wavefunction=None),
}

DEFAULT_VIEW = {"octahedron": "+z", "square": "+y", "dodecahedron": "+z"}


def _floats(s) -> list[float]:
    if s is None:
        return None
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def write(self, name: str, data) -> Path:
        path = self.out / name
        if isinstance(data, str):
            path.write_text(data)
        else:
            path.write_bytes(data)
        self.artifacts.append(name)
        return path

    def finish(self) -> None:
        resolved = {k: v for k, v in sorted(self.cfg.items()) if k not in EXECUTION_KEYS}
        doc = {"command": self.cfg["command"], "config": resolved}
        (self.out / "config.json").write_text(modelio.dumps(doc))
        doc["artifacts"] = {n: _sha256(self.out / n) for n in sorted(self.artifacts)}
        (self.out / "manifest.json").write_text(modelio.dumps(doc))


def _random_unit(seed: int) -> list[float]:
    v = RngStream(seed, 1).generator().standard_normal(3)
    return (v / np.linalg.norm(v)).tolist()


def cmd_fractal(c: dict) -> int:
    cfg = bloch.builtin_config(c["config"], c["eps"], c["kappa"], c["omega"])
    r0 = _floats(c["r0"]) or _random_unit(c["seed"])
    r0 = (np.asarray(r0) / np.linalg.norm(r0)).tolist()
    c["r0"] = ",".join(repr(v) for v in r0)
    c["view"] = c["view"] or DEFAULT_VIEW[c["config"]]
    window = _floats(c["window"]) or [0.0, 0.0, 2.0]
    run = Run(c)
    points, clicks = bloch.chaos_game(cfg, r0, c["jumps"], RngStream(c["seed"], 0))
    if c["cloud_format"] == "csv":
        run.write("cloud.csv", bloch.points_to_csv(points))
    else:
        run.write("cloud.bin", bloch.points_to_bytes(points))
    run.write("clicks.csv", clicks.to_csv())
    run.write("image.pgm", render.render_pgm(points, c["view"], c["size"], window))
    run.write("detectors.json", modelio.dumps({"detectors": cfg.to_dict()}))
    run.finish()
    log.info("%d jumps written to %s", len(points), run.out)
    return 0


def cmd_verify(c: dict) -> int:
    model = models.toy(c["model"])
    init = models.toy_initial(c["model"])
    grid = _floats(c["grid"])
    ref = liouville.evolve_grid(init.projector(model.spec), model, grid,
                                liouville.IntegratorConfig(c["dt"]) if c["dt"] else None, t0=0.0)
    ens = pdp.run_ensemble(init, grid, model, c["n_traj"], c["seed"],
                           workers=c["threads"], dt=c["dt"], t0=0.0)
    dist = [liouville.trace_distance(a, b) for a, b in zip(ens, ref)]
    ok = all(d <= c["threshold"] for d in dist)
    run = Run(c)
    report = {"t": grid, "trace_distance": dist, "n_traj": c["n_traj"], "pass": ok,
              "threshold": c["threshold"]}
    run.write("report.json", modelio.dumps(report))
    run.finish()
    print(json.dumps(report))
    return 0 if ok else 1


def cmd_liouville(c: dict) -> int:
    if c["model_file"]:
        # start from the first basis vector of sector 0
        model = modelio.load_model(c["model_file"])
        init = pdp.PureState(0, np.eye(model.spec.dims[0])[0])
    else:
        model = models.toy(c["model"])
        init = models.toy_initial(c["model"])
    grid = _floats(c["grid"])
    cfg = liouville.IntegratorConfig(c["dt"]) if c["dt"] else None
    states = liouville.evolve_grid(init.projector(model.spec), model, grid, cfg, t0=0.0)
    lines = "".join(
        json.dumps(modelio.density_to_json(t, rho)) + "\n" for t, rho in zip(grid, states)
    )
    run = Run(c)
    run.write("density.jsonl", lines)
    run.finish()
    return 0


def cmd_sierpinski(c: dict) -> int:
    ifs = fractal.sierpinski_ifs()
    pts = fractal.chaos_game_affine(ifs, (0.0, 0.0), c["points"] + c["burn_in"],
                                    RngStream(c["seed"]))[c["burn_in"]:]
    cloud = np.column_stack([pts, np.zeros(len(pts))])
    run = Run(c)
    run.write("cloud.bin", bloch.points_to_bytes(cloud))
    # x right, y up over the square [1, 2]^2 that holds the attractor
    counts = render.hit_counts(pts, c["size"], (1.5, 1.5, 1.0))
    run.write("image.pgm", render.pgm_bytes(render.tone_map(counts)))
    run.finish()
    return 0


def _load_cloud(path: str) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".csv":
        return np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    return bloch.points_from_bytes(p.read_bytes())


def cmd_dimension(c: dict) -> int:
    if not c["input"]:
        raise ValueError("dimension needs --input")
    pts = _load_cloud(c["input"])
    if pts.shape[1] == 3 and np.all(pts[:, 2] == 0):
        pts = pts[:, :2]
    res = fractal.box_dimension(pts, _floats(c["scales"]))
    run = Run(c)
    run.write("dimension.json", modelio.dumps(res.to_dict()))
    run.finish()
    print(json.dumps(res.to_dict()))
    return 0


def cmd_lyapunov(c: dict) -> int:
    cfg = bloch.builtin_config(c["config"], c["eps"], c["kappa"], c["omega"])
    value = fractal.lyapunov_estimate(cfg, _random_unit(c["seed"]), c["jumps"], RngStream(c["seed"]))
    run = Run(c)
    run.write("lyapunov.json", modelio.dumps({"estimate": value, "n_jumps": c["jumps"]}))
    run.finish()
    print(json.dumps({"estimate": value}))
    return 0


def cmd_detector(c: dict) -> int:
    if c["wavefunction"]:
        psi = detector.GridWavefunction.read_csv(c["wavefunction"]).normalized()
    else:
        h = c["half_width"]
        n = int(round(2 * h / c["dx"])) + 1
        psi = detector.GridWavefunction.from_function(lambda x: np.exp(-x**2 / 2), -h, h, n)
    sigmas = _floats(c["sigmas"]) if c["sigma_sweep"] else [c["sigma"]]
    rows = detector.born_limit_check(psi, c["a"], [c["kappa"]], sigmas, c["dt"])
    run = Run(c)
    run.write("born.csv", detector.table_to_csv(rows))
    run.finish()
    sys.stdout.write(detector.table_to_csv(rows))
    return 0


COMMANDS = {
    "fractal": cmd_fractal,
    "verify": cmd_verify,
    "liouville": cmd_liouville,
    "sierpinski": cmd_sierpinski,
    "dimension": cmd_dimension,
    "lyapunov": cmd_lyapunov,
    "detector": cmd_detector,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads (default 1)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--config-file", dest="config_file", help="JSON file with parameters")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="eqtsim", description="Event-enhanced quantum jump simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fractal", parents=[common], argument_default=S,
                       help="chaos game of a detector configuration on the Bloch sphere")
    f.add_argument("--config", help="octahedron, square or dodecahedron")
    f.add_argument("--eps", type=float)
    f.add_argument("--jumps", type=int)
    f.add_argument("--kappa", type=float)
    f.add_argument("--omega", type=float)
    f.add_argument("--r0", help="initial Bloch vector x,y,z (default: random from seed)")
    f.add_argument("--view", help="view axis, e.g. +z, -x (default depends on config)")
    f.add_argument("--size", type=int)
    f.add_argument("--window", help="zoom window cx,cy,width in image-plane units")
    f.add_argument("--cloud-format", dest="cloud_format", choices=["bin", "csv"])

    v = sub.add_parser("verify", parents=[common], argument_default=S,
                       help="compare trajectory ensemble with the master equation")
    v.add_argument("--model", choices=sorted(models.TOYS))
    v.add_argument("--n-traj", dest="n_traj", type=int)
    v.add_argument("--grid")
    v.add_argument("--threshold", type=float)
    v.add_argument("--dt", type=float)

    lv = sub.add_parser("liouville", parents=[common], argument_default=S,
                        help="integrate the master equation and write checkpoints")
    lv.add_argument("--model", choices=sorted(models.TOYS))
    lv.add_argument("--model-file", dest="model_file")
    lv.add_argument("--grid")
    lv.add_argument("--dt", type=float)

    s = sub.add_parser("sierpinski", parents=[common], argument_default=S,
                       help="classical affine IFS baseline")
    s.add_argument("--points", type=int)
    s.add_argument("--size", type=int)
    s.add_argument("--burn-in", dest="burn_in", type=int)

    d = sub.add_parser("dimension", parents=[common], argument_default=S,
                       help="box-counting dimension of a point cloud")
    d.add_argument("--input")
    d.add_argument("--scales", help="comma-separated box sizes")

    ly = sub.add_parser("lyapunov", parents=[common], argument_default=S,
                        help="mean log stretch of the jump maps")
    ly.add_argument("--config", help="octahedron, square or dodecahedron")
    ly.add_argument("--eps", type=float)
    ly.add_argument("--jumps", type=int)
    ly.add_argument("--kappa", type=float)
    ly.add_argument("--omega", type=float)

    de = sub.add_parser("detector", parents=[common], argument_default=S,
                        help="Gaussian detector click probability and its sharp limit")
    de.add_argument("--sigma-sweep", dest="sigma_sweep", action="store_true")
    de.add_argument("--sigma", type=float)
    de.add_argument("--sigmas")
    de.add_argument("--kappa", type=float)
    de.add_argument("--dt", type=float)
    de.add_argument("--a", type=float)
    de.add_argument("--dx", type=float)
    de.add_argument("--half-width", dest="half_width", type=float)
    de.add_argument("--wavefunction", help="CSV with columns x,re,im")
    return p


def resolve(argv=None) -> dict:
    ns = vars(build_parser().parse_args(argv))
    cmd = ns["command"]
    cfg = {"seed": 0, "threads": 1, "out": "out", "verbose": False, **DEFAULTS[cmd]}
    if "config_file" in ns:
        file_cfg = json.loads(Path(ns["config_file"]).read_text())
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"unknown keys in config file: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update(ns)
    return cfg


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
    except (ValueError, OSError) as exc:
        print(f"eqtsim: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if cfg.pop("verbose") else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[cfg["command"]](cfg)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"eqtsim {cfg['command']}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
