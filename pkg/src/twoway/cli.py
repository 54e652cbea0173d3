"""Command line: ``twoway gen | run | bench | worker``.

Flags mirror :class:`~twoway.config.RunConfig` field names in kebab-case. A
flat ``key=value`` file given with ``--config`` supplies the same keys; flags
override the file, the file overrides defaults.
"""
import argparse
import logging
import os
import subprocess
import sys
import tempfile
from dataclasses import asdict, fields

from . import bench, engine
from .cluster import TcpMasterTransport, run_worker
from .config import ALGOS, COV_KINDS, MODELS, TRANSPORTS, RunConfig
from .datagen_io import SynthSpec, gen_shard, gen_synthetic, load_libsvm, split_and_shard
from .errors import ConfigError, TwowayError
from .trace_io import write_traces

log = logging.getLogger("twoway")

_BOOL_FIELDS = {"project_gradients", "timing"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, raw):
    if raw is None:
        return None
    if name in _BOOL_FIELDS:
        if isinstance(raw, bool):
            return raw
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name.replace('_', '-')}: expected a boolean, got {raw!r}")
    if isinstance(raw, str) and raw.strip().lower() in ("", "none"):
        return None
    typ = _TYPES.get(name, str)
    base = {"int": int, "float": float}.get(getattr(typ, "__name__", ""), None)
    if base is None:
        text = str(typ)
        base = int if "int" in text else float if "float" in text else str
    try:
        return base(raw)
    except ValueError:
        raise ConfigError(f"{name.replace('_', '-')}: cannot parse {raw!r}") from None


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment; keys are kebab- or snake-case."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_run_flags(p, data_flags_only=False):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="flat key=value file with the same keys as the flags")
    p.add_argument("--model", choices=tuple(MODELS), default=S)
    p.add_argument("--m", type=int, default=S, help="number of machines (master included)")
    p.add_argument("--n", type=int, default=S, help="samples per machine")
    p.add_argument("--d", type=int, default=S, help="dimension")
    p.add_argument("--s", type=int, default=S, help="sparsity of the true parameter")
    p.add_argument("--cov-kind", choices=COV_KINDS, default=S)
    p.add_argument("--noise-sigma", "--noise", dest="noise_sigma", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--data", default=S, help="LIBSVM file; replaces synthetic generation")
    if data_flags_only:
        return
    p.add_argument("--algo", choices=ALGOS, default=S)
    p.add_argument("--k", type=int, default=S, help="thresholding level (default 2s; required with --data)")
    p.add_argument("--rounds", type=int, default=S)
    p.add_argument("--mu0", type=float, default=S)
    p.add_argument("--mu-alpha", type=float, default=S)
    p.add_argument("--mu-min", type=float, default=S)
    p.add_argument("--transport", choices=TRANSPORTS, default=S)
    p.add_argument("--listen", default=S, help="host:port the master binds in tcp mode")
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-inner-iters", type=int, default=S)
    p.add_argument("--project-gradients", action=argparse.BooleanOptionalAction, default=S)
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=S,
                   help="record wall_ms (disable for byte-reproducible CSVs)")
    p.add_argument("--output", "-o", default=S, help="CSV path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="twoway", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic-data manifest (regenerable key=value file)")
    _add_run_flags(p, data_flags_only=True)
    p.add_argument("--output", "-o", default=argparse.SUPPRESS)

    p = sub.add_parser("run", help="execute one algorithm and write its trace CSV")
    _add_run_flags(p)
    p.add_argument("--spawn-workers", action="store_true",
                   help="in tcp mode, launch the m-1 workers as local subprocesses")
    p.add_argument("--mu-grid", default=None,
                   help="comma-separated mu-min candidates, picked by validation loss (--data only)")

    p = sub.add_parser("bench", help="run all four algorithms on one dataset, one combined CSV")
    p.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    _add_run_flags(p)
    p.add_argument("--scale", type=float, default=1.0, help="multiplies n and d of the figure grid")
    p.add_argument("--mu-grid", default=None)

    p = sub.add_parser("worker", help="serve gradient requests over tcp")
    _add_run_flags(p, data_flags_only=True)
    p.add_argument("--connect", required=True, help="master host:port")
    p.add_argument("--worker-id", type=int, required=True, help="machine index in 1..m-1")
    p.add_argument("--k", type=int, default=argparse.SUPPRESS)
    p.add_argument("--connect-timeout", type=float, default=30.0)
    return parser


def resolve_config(ns, base=None):
    """defaults < --config file < explicit flags."""
    values = asdict(base or RunConfig())
    given = vars(ns)
    if "config" in given:
        for key, raw in read_config_file(given["config"]).items():
            if key not in values:
                raise ConfigError(f"unknown config key {key.replace('_', '-')!r}")
            values[key] = _coerce(key, raw)
    for key in values:
        if key in given:
            values[key] = given[key]
    return RunConfig(**values).validate()


def load_problem(cfg):
    """(shards, theta_star, validation, test) for the configured data source."""
    if cfg.data:
        task = "classification" if cfg.model == "logistic" else "regression"
        data = load_libsvm(cfg.data, task=task)
        shards, val, test = split_and_shard(data.X, data.y, cfg.m, cfg.seed, loss=cfg.loss)
        return shards, None, val, test
    spec = synth_spec(cfg)
    shards, theta_star = gen_synthetic(spec)
    return shards, theta_star, None, None


def synth_spec(cfg):
    return SynthSpec(cfg.m, cfg.n, cfg.d, cfg.s, cfg.cov_kind, cfg.model, cfg.noise_sigma, cfg.seed)


def _open_out(path):
    if not path or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _emit(traces, path):
    fh, close = _open_out(path)
    try:
        write_traces(traces, fh)
    finally:
        if close:
            fh.close()


def config_to_text(cfg):
    return "".join(f"{k.replace('_', '-')}={'' if v is None else v}\n" for k, v in asdict(cfg).items())


def _spawn_workers(cfg, address):
    fd, path = tempfile.mkstemp(prefix="twoway-", suffix=".cfg")
    with os.fdopen(fd, "w") as fh:
        fh.write(config_to_text(cfg.replace(transport="inproc", listen=None, output=None)))
    procs = [
        subprocess.Popen([sys.executable, "-m", "twoway", "worker", "--config", path,
                          "--connect", address, "--worker-id", str(j)])
        for j in range(1, cfg.m)
    ]
    return procs, path


def execute(cfg, spawn=False, mu_grid=None):
    """Run one configuration end to end; returns the trace (raises TwowayError)."""
    shards, theta_star, val, test = load_problem(cfg)
    if mu_grid:
        cfg = bench.select_mu_min(cfg, shards, val, mu_grid)
    if cfg.transport == "inproc":
        return engine.run(cfg, shards, theta_star, holdout=test)
    procs, tmp = [], None
    with TcpMasterTransport(cfg.listen, range(1, cfg.m)) as transport:
        if spawn:
            procs, tmp = _spawn_workers(cfg, transport.address)
        else:
            print(f"listening on {transport.address}; waiting for {cfg.m - 1} workers", file=sys.stderr)
        try:
            trace = engine.run(cfg, shards, theta_star, holdout=test, transport=transport)
        finally:
            transport.close()
            for p in procs:
                try:
                    p.wait(timeout=30)
                except subprocess.TimeoutExpired:
                    p.kill()
            if tmp:
                os.unlink(tmp)
    return trace


def _cmd_gen(ns):
    cfg = resolve_config(ns)
    spec = synth_spec(cfg)
    fh, close = _open_out(getattr(ns, "output", None))
    try:
        fh.write(spec.to_manifest())
    finally:
        if close:
            fh.close()
    return 0


def _parse_grid(text):
    if not text:
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--mu-grid: cannot parse {text!r}") from None


def _cmd_run(ns):
    cfg = resolve_config(ns)
    if cfg.data and cfg.k is None and cfg.algo == "twoway":
        raise ConfigError("--k is required with --data")
    try:
        trace = execute(cfg, spawn=ns.spawn_workers, mu_grid=_parse_grid(ns.mu_grid))
    except TwowayError as exc:
        partial = getattr(exc, "trace", None)
        if partial is not None and partial.rows:
            _emit([partial], cfg.output)
        raise
    _emit([trace], cfg.output)
    return 0


def _cmd_bench(ns):
    base = bench.figure_config(ns.figure, ns.scale)
    cfg = resolve_config(ns, base=base)
    if ns.figure == "fig3" and not cfg.data:
        raise ConfigError("bench fig3 needs --data")
    traces = bench.run_all(cfg, mu_grid=_parse_grid(ns.mu_grid))
    _emit(traces, cfg.output)
    return 0


def _cmd_worker(ns):
    cfg = resolve_config(ns)
    if not 1 <= ns.worker_id < cfg.m:
        raise ConfigError(f"--worker-id must lie in 1..{cfg.m - 1}")
    if cfg.data:
        shards, _, _, _ = load_problem(cfg)
        shard = shards[ns.worker_id]
    else:
        shard = gen_shard(synth_spec(cfg), ns.worker_id)
    served = run_worker(ns.connect, ns.worker_id, shard, ns.connect_timeout)
    log.info("worker %d served %d rounds", ns.worker_id, served)
    return 0


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"gen": _cmd_gen, "run": _cmd_run, "bench": _cmd_bench, "worker": _cmd_worker}[ns.command]
    try:
        return handler(ns)
    except TwowayError as exc:
        print(f"twoway: error: {exc.describe()}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"twoway: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
