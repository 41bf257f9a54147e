"""Command-line entry point: ``htngym <subcommand> ...``.

Exit codes: 0 success, 1 domain errors (lint errors, layout mismatch, planner or
environment failures), 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .encoding import DYNAMIC, FULL, build_layout
from .env import EnvConfig, EnvError, HDDLEnv
from .evaluation import (MalformedTrace, evaluate_policy, measure_difficulty, render_trace, rows_to_csv,
                         summarize)
from .grounding import Grounding
from .lint import adapt, has_errors, lint, load_effects_file
from .parser import load_domain, load_problem, print_domain
from .planner import PlannerError
from .policy import LayoutMismatch, MlpPolicy, RandomPolicy
from .ppo import NonFiniteLoss, PpoConfig, TrainRow, train
from .rollout import run_episode
from .sexpr import HddlError


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str]
    seed: int
    config: dict = field(default_factory=dict)
    version: str = __version__
    layout_hash: str | None = None

    def as_dict(self) -> dict:
        return asdict(self)


# --- config files -----------------------------------------------------------------

TRAIN_KEYS = {"iterations": int, "hidden": int}


def _typed(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip('"')


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"config line {n}: empty key")
        out[key] = _typed(value)
    return out


def split_config(cfg: dict) -> tuple[EnvConfig, PpoConfig, dict]:
    env_names = {f.name for f in fields(EnvConfig)}
    ppo_names = {f.name for f in fields(PpoConfig)}
    unknown = sorted(set(cfg) - env_names - ppo_names - set(TRAIN_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    try:
        env = EnvConfig(**{k: v for k, v in cfg.items() if k in env_names})
        ppo = PpoConfig(**{k: v for k, v in cfg.items() if k in ppo_names})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config value: {exc}") from None
    extra = {k: TRAIN_KEYS[k](v) for k, v in cfg.items() if k in TRAIN_KEYS}
    return env, ppo, extra


# --- helpers ------------------------------------------------------------------------


def data_path(name: str) -> Path:
    """A user path, or else a fixture bundled under ``htngym/data``."""
    p = Path(name)
    if p.exists():
        return p
    bundled = Path(str(resources.files("htngym") / "data" / name))
    if bundled.exists():
        return bundled
    raise UsageError(f"no such file: {name}")


def _load(args, with_problem: bool = True):
    domain = load_domain(data_path(args.domain))
    problem = load_problem(data_path(args.problem), domain) if with_problem else None
    return domain, problem


def _config(args) -> dict:
    if not args.config:
        return {}
    return parse_config(data_path(args.config).read_text(encoding="utf-8"))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv(header, rows, manifest: RunManifest | None) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write("# manifest " + json.dumps(manifest.as_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _policy(arg: str | None, layout):
    if arg in (None, "random"):
        return RandomPolicy(layout)
    return MlpPolicy.load(data_path(arg), layout)


# --- subcommands ------------------------------------------------------------------------


def cmd_lint(args) -> int:
    domain = load_domain(data_path(args.domain))
    problem = load_problem(data_path(args.problem), domain) if args.problem else None
    findings = lint(domain, problem)
    if args.format == "json":
        _emit(_json([f.as_dict() for f in findings]), None)
    else:
        _emit("".join(f"{args.domain}:{f}\n" for f in findings), None)
    return 1 if has_errors(findings) else 0


def cmd_adapt(args) -> int:
    domain = load_domain(data_path(args.domain))
    hints = load_effects_file(data_path(args.effects_file).read_text(encoding="utf-8")) if args.effects_file else {}
    adapted = adapt(domain, args.agent_type, hints)
    _emit(print_domain(adapted), args.output)
    findings = [f for f in lint(adapted) if f.severity == "error"]
    for f in findings:
        print(f"{args.output or '<stdout>'}:{f}", file=sys.stderr)
    return 1 if findings else 0


def cmd_stats(args) -> int:
    domain, problem = _load(args)
    g = Grounding(domain, problem)
    if args.layout:
        layout = build_layout(g, args.layout_mode)
        _emit(_json(layout.describe()), args.output)
        return 0
    stats = g.stats(prune=not args.no_prune).as_dict()
    if args.format == "csv":
        _emit(_csv(list(stats), [list(stats.values())], None), args.output)
    else:
        _emit(_json(stats), args.output)
    return 0


def cmd_plan(args) -> int:
    domain, problem = _load(args)
    env_cfg, _, _ = split_config(_config(args))
    if args.steps:
        env_cfg.max_steps = args.steps
    env_cfg.decentralized = args.decentralized
    env = HDDLEnv(domain, problem, config=env_cfg)
    env.reset(policies={a: _policy(args.policy, env.layout) for a in env.agents})
    run_episode(env, seed=args.seed, deterministic=args.deterministic)
    if args.trace:
        env.write_trace(args.trace)
    if args.render == "ascii":
        _emit(render_trace(json.dumps(r, sort_keys=True) for r in env.trace), None)
    elif not args.trace:
        _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in env.trace), None)
    return 0


def cmd_run(args) -> int:
    domain, problem = _load(args)
    cfg = _config(args)
    env_cfg, _, _ = split_config(cfg)
    layout = build_layout(Grounding(domain, problem))
    policy = _policy(args.policy, layout)
    report = measure_difficulty(domain, problem, policy, args.episodes, args.seed, env_cfg)
    manifest = RunManifest("run", [args.domain, args.problem], args.seed, cfg, layout_hash=layout.hash)
    doc = report.as_dict(timing=not args.no_timing)
    if args.report == "csv":
        _emit(_csv(list(doc), [[json.dumps(v) if isinstance(v, (dict, list)) else v for v in doc.values()]],
                   manifest), args.output)
    else:
        doc["manifest"] = manifest.as_dict()
        _emit(_json(doc), args.output)
    return 0


def cmd_eval(args) -> int:
    domain, problem = _load(args)
    cfg = _config(args)
    env_cfg, ppo_cfg, _ = split_config(cfg)
    checkpoint = None if args.policy in (None, "random") else data_path(args.policy)
    rows, summary = evaluate_policy(domain, problem, checkpoint, args.episodes, args.seed, ppo_cfg.gamma, env_cfg)
    if args.no_timing:
        for r in rows:
            r.plan_time = 0.0
        summary = summarize(rows)
    layout = build_layout(Grounding(domain, problem))
    manifest = RunManifest("eval", [args.domain, args.problem, str(args.policy)], args.seed, cfg,
                           layout_hash=layout.hash)
    if args.report == "csv":
        text = "# manifest " + json.dumps(manifest.as_dict(), sort_keys=True) + "\n" + rows_to_csv(rows)
        _emit(text, args.output)
    else:
        _emit(_json({"rows": [asdict(r) for r in rows], "summary": summary, "manifest": manifest.as_dict()}),
              args.output)
    return 0


def cmd_train(args) -> int:
    domain, problem = _load(args)
    cfg = _config(args)
    env_cfg, ppo_cfg, extra = split_config(cfg)
    if args.seed is not None:
        ppo_cfg.seed = args.seed
    env = HDDLEnv(domain, problem, config=env_cfg)
    policy = MlpPolicy.create(env.layout, hidden=extra.get("hidden", 128), seed=ppo_cfg.seed)
    iterations = args.iterations or extra.get("iterations", 10)
    log = open(args.log, "w", encoding="utf-8", newline="") if args.log else None
    try:
        if log:
            log.write("# manifest " + json.dumps(RunManifest(
                "train", [args.domain, args.problem], ppo_cfg.seed, cfg, layout_hash=env.layout.hash
            ).as_dict(), sort_keys=True) + "\n")
            writer = csv.writer(log, lineterminator="\n")
            writer.writerow(TrainRow.CSV_HEADER)

        def on_row(row: TrainRow):
            if log:
                writer.writerow(row.csv_values())
                log.flush()
            print(f"iteration {row.iteration}: episodes {row.episode} loss {row.loss:.4f} "
                  f"success {row.success_rate:.2f} steps {row.plan_steps:.2f}", file=sys.stderr)

        train(env, policy, ppo_cfg, iterations, on_row)
    finally:
        if log:
            log.close()
    policy.save(args.out)
    return 0


def cmd_render(args) -> int:
    _emit(render_trace(data_path(args.trace)), None)
    return 0


# --- parser ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["text", "json", "csv"], default=None)
    common.add_argument("--config", default=None, help="flat key = value file")

    p = _Parser(prog="htngym", description="Multi-agent HDDL planning gym.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("lint", parents=[common], help="check a domain against the agent-centric rules")
    s.add_argument("domain")
    s.add_argument("problem", nargs="?")
    s.set_defaults(func=cmd_lint)

    s = sub.add_parser("adapt", parents=[common], help="add agent type, none action and task effects")
    s.add_argument("domain")
    s.add_argument("--agent-type", required=True)
    s.add_argument("--effects-file")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_adapt)

    s = sub.add_parser("stats", parents=[common], help="grounding dimensions or the encoding layout")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("--no-prune", action="store_true")
    s.add_argument("--layout", choices=["json"])
    s.add_argument("--layout-mode", choices=[DYNAMIC, FULL], default=DYNAMIC)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("plan", parents=[common], help="plan one episode and emit the trace")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("--decentralized", action="store_true")
    s.add_argument("--deterministic", action="store_true")
    s.add_argument("--steps", type=int)
    s.add_argument("--policy", default="random")
    s.add_argument("--trace")
    s.add_argument("--render", choices=["ascii"])
    s.set_defaults(func=cmd_plan)

    for name, func, helptext in (("run", cmd_run, "random-exploration difficulty report"),
                                 ("eval", cmd_eval, "deterministic evaluation of a checkpoint")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("domain")
        s.add_argument("problem")
        s.add_argument("--policy", default="random")
        s.add_argument("--episodes", type=int, default=100)
        s.add_argument("--report", choices=["json", "csv"])
        s.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
        s.add_argument("-o", "--output")
        s.set_defaults(func=func)

    s = sub.add_parser("train", parents=[common], help="PPO training")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("--out", required=True)
    s.add_argument("--log")
    s.add_argument("--iterations", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("render", parents=[common], help="ASCII view of a JSONL trace")
    s.add_argument("trace")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        if hasattr(args, "report") and args.report is None:
            args.report = "csv" if args.format == "csv" else "json"
        if args.command in ("lint", "stats") and args.format is None:
            args.format = "text" if args.command == "lint" else "json"
        np.seterr(all="ignore")
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=sys.stderr)
        return 2
    except (HddlError, MalformedTrace, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except (EnvError, LayoutMismatch, PlannerError, NonFiniteLoss) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
