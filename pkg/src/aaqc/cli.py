"""``aaqc`` command line: spectrum scans, passages, gap scans, the clock demo
and the SAQC discretization study.

Every subcommand reads an optional JSON config (``--config``), applies
``--set key=value`` overrides (values parsed as JSON, else taken as
strings), rejects unknown keys, and writes CSV or JSON to ``--out`` (or
stdout). Outputs embed the schema version and the fully resolved config.

Exit status: 0 on success, 2 on configuration or precondition errors, 3 on
numerical failures; errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import clocksim, floquet, models, passage, spectral
from .errors import AaqcError, ConfigError
from .numerics import TWO_PI, as_matrix, as_vector

SCHEMA_VERSION = "aaqc/1"
THREADS_ENV = "AAQC_THREADS"

_MODEL_KEYS = {
    "model": "grover_optimal",
    "N": 100,
    "x": 0,
    "a2": models.DEFAULT_A2,
    "alpha": models.DEFAULT_ALPHA,
    "E_P": None,
    "T": models.DEFAULT_T,
    "theta": 0.0,
    "E2": TWO_PI / 3,
    "a": 2 ** -0.5,
    "b": 2 ** -0.5,
    "circuit": {"n": 1, "gates": [{"gate": "X", "targets": [0]}]},
    "matrix_file": None,
}

DEFAULTS = {
    "spectrum": {**_MODEL_KEYS, "n_samples": 201, "seed": 0},
    "passage": {**_MODEL_KEYS, "model": "grover_fair", "schedule": "both", "epsilon": 0.1,
                "L_values": [64, 256, 1024, 4096], "exponent": 2.0, "n_samples": 201, "seed": 0},
    "gap-scan": {"N_values": [100, 1000, 10000, 100000, 1000000], "a2": models.DEFAULT_A2,
                 "alpha": models.DEFAULT_ALPHA, "E_P": models.DEFAULT_E_P, "T": models.DEFAULT_T,
                 "theta": 0.0, "n_samples": 201, "seed": 0},
    "clock-demo": {"circuit": _MODEL_KEYS["circuit"], "E_P": clocksim.DEFAULT_E_P, "T": None,
                   "L_steps": 4096, "delta_L_max": 10, "seed": 0},
    "discretize": {"gap": 0.5, "sweep": 10.0, "T_max": 20.0,
                   "L_values": [16, 32, 64, 128, 256, 512, 1024, 2048, 4096], "L_ref": 8192, "seed": 0},
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(command: str, path: str | None, overrides: list[str]) -> dict:
    cfg = dict(DEFAULTS[command])
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        items = list(data.items())
    else:
        items = []
    for text in overrides:
        if "=" not in text:
            raise ConfigError(f"--set expects key=value, got {text!r}")
        key, val = text.split("=", 1)
        items.append((key.strip(), _parse_value(val)))
    for key, val in items:
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r} for {command}; allowed: {sorted(cfg)}")
        cfg[key] = val
    return cfg


def _complex_array(data, name, ndim):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        raise ConfigError(f"{name} must be a {ndim}-d array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def build_model(cfg: dict):
    """Return ``(system, psi0, target, params)`` for the configured model.

    ``E_P = null`` selects the model default (``2 pi / 3`` for Grover, ``1/2``
    for the clock simulator).
    """
    name = cfg["model"]
    if cfg["E_P"] is None:
        cfg = {**cfg, "E_P": clocksim.DEFAULT_E_P if name == "clocksim" else models.DEFAULT_E_P}
    if name == "two_level":
        sys_ = models.two_level_system(float(cfg["E2"]), complex(cfg["a"]), complex(cfg["b"]), float(cfg["T"]))
        st = sys_.states
        return sys_, st["ground"], st["excited"], {"model": name, "E2": cfg["E2"], "a": cfg["a"],
                                                   "b": cfg["b"], "T": cfg["T"]}
    if name == "grover_optimal":
        sys_ = models.optimal_v_system(float(cfg["E_P"]), float(cfg["T"]))
        return sys_, sys_.states["minus"], sys_.states["plus"], {"model": name, "E_P": cfg["E_P"], "T": cfg["T"]}
    if name == "grover_fair":
        a2 = float(cfg["a2"])
        sys_ = models.fair_grover_effective(int(cfg["N"]), np.sqrt(a2), np.sqrt(1 - a2), float(cfg["alpha"]),
                                            float(cfg["E_P"]), float(cfg["T"]), float(cfg["theta"]))
        keys = ("N", "a2", "alpha", "E_P", "T", "theta")
        return sys_, sys_.states["minus"], sys_.states["plus"], {"model": name, **{k: cfg[k] for k in keys}}
    if name == "clocksim":
        c = _circuit(cfg["circuit"])
        sim = clocksim.compose_circuit_aaqc(c, float(cfg["E_P"]))
        if sim.system is None:
            raise ConfigError("circuit too large for a dense spectrum; use clock-demo")
        return sim.system, sim.minus, sim.plus, {"model": name, "E_P": sim.E_P, "T": sim.T, "W": sim.W}
    if name == "custom":
        if not cfg["matrix_file"]:
            raise ConfigError("model 'custom' needs matrix_file")
        try:
            data = json.loads(Path(cfg["matrix_file"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read matrix file: {exc}") from exc
        H0 = as_matrix(_complex_array(data["H0"], "H0", 2))
        v = as_vector(_complex_array(data["v"], "v", 1))
        sys_ = floquet.FloquetSystem(H0, v, float(data.get("T", cfg["T"])))
        basis = sys_.eigenbasis
        return sys_, basis[:, 0], basis[:, 1], {"model": name, "matrix_file": cfg["matrix_file"]}
    raise ConfigError(f"unknown model {name!r}")


def _circuit(spec) -> clocksim.ClockCircuit:
    if isinstance(spec, str):
        return clocksim.ClockCircuit.from_json(spec)
    if not isinstance(spec, dict) or "n" not in spec or "gates" not in spec:
        raise ConfigError("circuit must be an object with 'n' and 'gates' or a path to one")
    return clocksim.ClockCircuit.from_spec(spec["n"], spec["gates"])


def _csv(header, rows, cfg, extra_comments=()) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    buf.write(f"# config={json.dumps(_jsonable(cfg), sort_keys=True)}\n")
    for c in extra_comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in r) + "\n")
    return buf.getvalue()


def cmd_spectrum(cfg: dict, threads: int):
    sys_, _, _, params = build_model(cfg)
    curves = spectral.track_curves(sys_, 0.0, TWO_PI, int(cfg["n_samples"]))
    ground = [c for c in curves if c.coupled and abs(c.theta[0]) < 1e-9]
    target = ground[0] if ground else curves[0]
    rep = spectral.min_gap(curves, target.curve_id)
    summary = {"anholonomy_shift": spectral.detect_anholonomy(target), "min_gap": rep.min_gap,
               "s_at_min": rep.s_at_min, "curve_index_pair": list(rep.curve_index_pair),
               "target_curve": target.curve_id, "model_params": params}
    rows = spectral.curve_rows(curves)
    text = _csv(["s", "curve_id", "theta_lifted", "theta_mod2pi", "overlap_with_v"], rows, cfg)
    return text, {"schema": SCHEMA_VERSION, "config": cfg, "summary": summary}


def _roland_cerf_family(sys_, cfg):
    curves = spectral.track_curves(sys_, 0.0, TWO_PI, int(cfg["n_samples"]))
    target = next(c for c in curves if abs(c.theta[0]) < 1e-9)
    gap = spectral.level_gap_function(target)
    return passage.RolandCerfFamily(gap, TWO_PI, float(cfg["exponent"]))


def cmd_passage(cfg: dict, threads: int):
    sys_, psi0, target, params = build_model(cfg)
    kinds = ["linear", "roland_cerf"] if cfg["schedule"] == "both" else [cfg["schedule"]]
    families = {}
    for k in kinds:
        if k == "linear":
            families[k] = lambda L: passage.linear_schedule(TWO_PI, L)
        elif k == "roland_cerf":
            families[k] = _roland_cerf_family(sys_, cfg)
        else:
            raise ConfigError(f"unknown schedule {k!r}")
    eps = float(cfg["epsilon"])
    jobs = [(k, int(L)) for k in kinds for L in cfg["L_values"]]

    def run(job):
        k, L = job
        r = passage.run_passage(sys_, families[k](L), psi0, target)
        return passage.passage_record(L, eps, r.error, k, params)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        table = sorted(pool.map(run, jobs), key=lambda r: (r["schedule_type"], r["L"]))
    times = {k: passage.running_time(sys_, families[k], psi0, target, eps) for k in kinds}
    out = {"schema": SCHEMA_VERSION, "config": cfg, "model_params": params, "table": table,
           "running_time": times}
    if len(times) == 2:
        out["ratio_roland_cerf_to_linear"] = times["roland_cerf"] / times["linear"]
    return dump_json(out), None


def fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def cmd_gap_scan(cfg: dict, threads: int):
    def run(N):
        an = models.perturbative_gap(int(N), a2=float(cfg["a2"]), alpha=float(cfg["alpha"]),
                                     E_P=float(cfg["E_P"]), T=float(cfg["T"]),
                                     theta=float(cfg["theta"]), n_samples=int(cfg["n_samples"]))
        return (int(N), an.gap_numeric, an.gap_perturbative, an.s_c)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = sorted(pool.map(run, cfg["N_values"]))
    rows = [list(r) for r in rows]
    if len(rows) >= 2:
        rows.append(["fit_slope", fit_slope([r[0] for r in rows], [r[1] for r in rows]), "", ""])
    return _csv(["N", "min_gap", "gap_perturbative", "s_c"], rows, cfg), None


def cmd_clock_demo(cfg: dict, threads: int):
    c = _circuit(cfg["circuit"])
    sim = clocksim.compose_circuit_aaqc(c, float(cfg["E_P"]), None if cfg["T"] is None else float(cfg["T"]))
    prop = sim.propagator()
    sched = passage.linear_schedule(TWO_PI, int(cfg["L_steps"]))
    res = passage.run_passage(prop, sched, sim.minus, sim.plus)
    out_state, prob = clocksim.extract_output(res.final_state, c)
    ideal = c.work_states()[-1]
    fidelity = float(abs(np.vdot(ideal, out_state)) ** 2)

    def delta_row(L):
        cc = clocksim.ClockCircuit(1, tuple(clocksim.Gate(clocksim.GATES["X"], (0,)) for _ in range(L)))
        h = clocksim.build_clock_hamiltonians(cc)
        return {"L": L, "delta": h.delta, "delta_times_L1_sq": h.delta * (L + 1) ** 2, "W_P": h.W_P}

    with ThreadPoolExecutor(max_workers=threads) as pool:
        deltas = sorted(pool.map(delta_row, range(1, int(cfg["delta_L_max"]) + 1)), key=lambda r: r["L"])
    out = {"schema": SCHEMA_VERSION, "config": cfg,
           "circuit": {"n": c.n, "L": c.L, "E_P": sim.E_P, "T": sim.T, "W": sim.W},
           "passage_error": res.error, "fidelity": fidelity, "post_selection_probability": prob,
           "ideal_probability": 1.0 / (c.L + 1), "delta_vs_L": deltas}
    return dump_json(out), None


def cmd_discretize(cfg: dict, threads: int):
    prob, psi0, target = models.landau_zener_problem(float(cfg["gap"]), float(cfg["sweep"]), float(cfg["T_max"]))

    def final(L):
        ops = floquet.discretize_saqc(prob, floquet.uniform_time_grid(prob.T_max, int(L)))
        return floquet.apply_sequence(ops, psi0)

    ref = final(cfg["L_ref"])

    def run(L):
        psi = final(L)
        return (int(L), float(np.linalg.norm(psi - ref)), float(abs(np.vdot(target, psi)) ** 2))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = sorted(pool.map(run, cfg["L_values"]))
    return _csv(["L", "distance_to_reference", "ground_fidelity"], rows, cfg), None


COMMANDS = {
    "spectrum": cmd_spectrum,
    "passage": cmd_passage,
    "gap-scan": cmd_gap_scan,
    "clock-demo": cmd_clock_demo,
    "discretize": cmd_discretize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aaqc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--threads", type=int, default=None, help="worker pool size")
    return parser


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _emit_error(exc: AaqcError | ConfigError) -> int:
    sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc),
                                 "exit_status": exc.exit_status}) + "\n")
    return exc.exit_status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else _default_threads()
    try:
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = resolve_config(args.command, args.config, args.set)
        text, side = COMMANDS[args.command](cfg, threads)
        if args.out:
            out = Path(args.out)
            out.write_text(text)
            if side is not None:
                out.with_name(out.name + ".summary.json").write_text(dump_json(side))
        else:
            sys.stdout.write(text)
            if side is not None:
                sys.stdout.write(dump_json(side))
    except AaqcError as exc:
        return _emit_error(exc)
    except (KeyError, TypeError, ValueError) as exc:
        return _emit_error(ConfigError(f"invalid configuration: {exc}"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
