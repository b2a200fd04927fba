"""Command-line driver: ``xlbeam {codebook,profile,train,sweep}``.

Settings come from one YAML file (``--config``) layered over built-in defaults;
flags override the file. Each run writes the fully resolved config next to its
outputs as ``config.resolved.yaml``.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import yaml

from .array_model import ArrayConfig, MeasurementOracle, UserLocation, db_to_linear, dbm_to_watt, make_channel
from .codebook import LAST_LAYER_RULES, default_s_delta, export_codebook, hierarchical_codebook, polar_codebook
from .experiments import (
    ALL_ENGINES,
    ENGINE_CODES,
    ScenarioConfig,
    UserDistribution,
    format_overhead_table,
    overhead_table,
    run_sweep,
    write_profiles,
    write_results,
)
from .training import EngineParams, run_engine, write_trace

log = logging.getLogger("xlbeam")

DEFAULTS = {
    "array": {"N": 512, "wavelength": 0.003, "frequency_ghz": None},
    "channel": {"pilot_power_dbm": 30.0, "beta0_db": -72.0, "noise_power_dbm": -80.0},
    "codebook": {"S": 6, "s_delta": 68.27},
    "training": {"L": None, "last_layer_rule": "example1-window", "K": 1, "eta": 0.5},
    "user": {"distribution": "uniform", "theta": 0.0, "r": 10.0},
    "sweep": {"variable": "distance", "values": [10.0, 20.0, 40.0, 80.0]},
    "profile": {"sub_array": None},
    "engine": "two-stage",
    "engines": "all",
    "trials": 2000,
    "seed": 0,
    "workers": 1,
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping at top level")
    return _merge(DEFAULTS, data)


def parse_engines(value) -> list[str]:
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    names = []
    for v in value:
        names.extend(ALL_ENGINES if v == "all" else [v])
    unknown = [n for n in names if n not in ENGINE_CODES]
    if unknown:
        raise ConfigError(f"unknown engines {unknown}; choose from {sorted(ENGINE_CODES)} or 'all'")
    return list(dict.fromkeys(names))


def array_config(conf: dict) -> ArrayConfig:
    a = conf["array"]
    if a["frequency_ghz"] is not None:
        return ArrayConfig.from_frequency(int(a["N"]), float(a["frequency_ghz"]) * 1e9)
    return ArrayConfig(int(a["N"]), float(a["wavelength"]))


def _s_delta(conf: dict, cfg: ArrayConfig) -> float:
    sd = conf["codebook"]["s_delta"]
    return default_s_delta(cfg) if sd == "auto" else float(sd)


def engine_params(conf: dict) -> EngineParams:
    cfg = array_config(conf)
    t = conf["training"]
    return EngineParams(cfg, S=int(conf["codebook"]["S"]), s_delta=_s_delta(conf, cfg),
                        L=t["L"], last_layer_rule=t["last_layer_rule"], K=int(t["K"]), eta=float(t["eta"]))


def scenario_config(conf: dict) -> ScenarioConfig:
    """Convert the dB-valued file settings into a linear ScenarioConfig."""
    cfg = array_config(conf)
    ch, t, u = conf["channel"], conf["training"], conf["user"]
    sd = conf["codebook"]["s_delta"]
    return ScenarioConfig(
        cfg=cfg,
        pilot_power=dbm_to_watt(float(ch["pilot_power_dbm"])),
        beta0=db_to_linear(float(ch["beta0_db"])),
        noise_power=dbm_to_watt(float(ch["noise_power_dbm"])),
        S=int(conf["codebook"]["S"]),
        s_delta=sd if sd == "auto" else float(sd),
        engines=tuple(parse_engines(conf["engines"])),
        L=t["L"],
        last_layer_rule=t["last_layer_rule"],
        K=int(t["K"]),
        eta=float(t["eta"]),
        users=UserDistribution(u["distribution"], float(u["theta"]), None if u["r"] is None else float(u["r"])),
        trials=int(conf["trials"]),
        seed=int(conf["seed"]),
    )


def _prepare_out(conf: dict, out: str) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "config.resolved.yaml", "w") as f:
        yaml.safe_dump(conf, f, sort_keys=True)
    return d


def cmd_codebook(conf: dict, out: Path) -> None:
    p = engine_params(conf)
    n_pol = export_codebook(polar_codebook(p.cfg, p.S, p.s_delta), out / "polar.csv", out / "polar.bin")
    n_hier = export_codebook(hierarchical_codebook(p.cfg, p.S, p.s_delta, p.L),
                             out / "hierarchical.csv", out / "hierarchical.bin")
    print(f"polar codebook: {n_pol} codewords; hierarchical codebook: {n_hier} codewords -> {out}")


def cmd_profile(conf: dict, out: Path) -> None:
    cfg = array_config(conf)
    u = conf["user"]
    user = UserLocation(float(u["theta"]), float(u["r"]))
    sub = conf["profile"]["sub_array"] or cfg.N // 4
    write_profiles(user, cfg, [cfg.N, int(sub)], out / "profile.csv")
    print(f"gain profiles for N={cfg.N} and central {sub} antennas -> {out / 'profile.csv'}")


def cmd_train(conf: dict, out: Path) -> None:
    p = engine_params(conf)
    engine = conf["engine"]
    if engine not in ENGINE_CODES:
        raise ConfigError(f"unknown engine {engine!r}")
    u, ch = conf["user"], conf["channel"]
    channel = make_channel(UserLocation(float(u["theta"]), float(u["r"])), db_to_linear(float(ch["beta0_db"])), p.cfg)
    oracle = MeasurementOracle(channel, dbm_to_watt(float(ch["pilot_power_dbm"])),
                               dbm_to_watt(float(ch["noise_power_dbm"])), int(conf["seed"]))
    res = run_engine(engine, oracle, p)
    write_trace(res, out / "trace.jsonl")
    summary = {"engine": engine, **res.summary(), "oracle_pilots": oracle.pilots_used}
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(summary, sort_keys=True))


def cmd_sweep(conf: dict, out: Path) -> None:
    sc = scenario_config(conf)
    print(format_overhead_table(overhead_table(sc.params())))
    sw = conf["sweep"]
    records = run_sweep(sc, sw["variable"], [float(v) for v in sw["values"]], workers=int(conf["workers"]))
    write_results(records, out / "results.csv")
    for r in records:
        print(f"{r.engine:>16} {r.sweep_var}={r.sweep_value:g}: P_suc={r.success_rate:.3f} "
              f"R={r.mean_rate_bps_hz:.2f} bps/Hz pilots={r.mean_pilots:g}")


COMMANDS = {"codebook": cmd_codebook, "profile": cmd_profile, "train": cmd_train, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlbeam", description="Near-field XL-array beam-training simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("codebook", "export polar and hierarchical codebooks"),
                        ("profile", "write noiseless full/sub-array gain profiles"),
                        ("train", "run one engine for one user and write its trace"),
                        ("sweep", "Monte Carlo sweep; writes results.csv")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", default=f"out/{name}", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--engines", help="comma-separated engine ids or 'all' (train uses the first)")
        p.add_argument("--trials", type=int)
        p.add_argument("--last-layer-rule", choices=LAST_LAYER_RULES)
    return parser


def resolve(args) -> dict:
    conf = load_config(args.config)
    if args.seed is not None:
        conf["seed"] = args.seed
    if args.trials is not None:
        conf["trials"] = args.trials
    if args.last_layer_rule is not None:
        conf["training"]["last_layer_rule"] = args.last_layer_rule
    if args.engines is not None:
        engines = parse_engines(args.engines)
        if not engines:
            raise ConfigError("--engines must name at least one engine")
        conf["engines"] = engines
        conf["engine"] = engines[0]
    elif args.command == "sweep" and not parse_engines(conf["engines"]):
        raise ConfigError("the engine list is empty")
    return conf


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        conf = resolve(args)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        parser.error(str(exc))
    try:
        out = _prepare_out(conf, args.out)
        COMMANDS[args.command](conf, out)
    except (ValueError, OSError) as exc:
        print(f"xlbeam {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
