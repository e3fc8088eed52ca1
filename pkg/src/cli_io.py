"""
InfoMarket Command Line & I/O
Flat key=value config loading, CSV serialization, run manifests and the
`infomarket` command surface (simulate / analyze / info / demo)
"""

import argparse
import hashlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

from analysis import (
    PanelAnalyzer,
    SortSpec,
    event_aligned_imbalance,
    event_overshoot,
    momentum_profit,
    portfolio_sort,
)
from channels import bsc, joint_from_channel
from decision import info_value, information_value_curve, kahneman_lotteries, survival_choice, survival_probability
from entropy_core import cross_entropy, entropy, mutual_information
from errors import ConfigError, DomainError, InfoMarketError, ValidationError
from market_sim import (
    EVENT_COLUMNS,
    PANEL_COLUMNS,
    TRADE_COLUMNS,
    EventRecord,
    MarketConfig,
    run_simulation,
)

__version__ = "0.1.0"

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
FLOAT_FORMAT = "%.9g"
TRUE_WORDS = {"true", "yes", "on", "1"}
FALSE_WORDS = {"false", "no", "off", "0"}

INSIDER_DEMO_CONFIG = """\
# one stock, one scheduled +40% event, a single insider trading a period early,
# two small background events so the baseline window carries ordinary volume
n_stocks = 1
n_periods = 40
n_newswatchers = 20
n_momentum = 20
event_rate = 0
T_diff = 1
seed = 2005
insider_lead = 1
insider_fraction = 0.05
newswatcher_wealth = 500000
momentum_wealth = 10000
momentum_gain = 0.2
wealth_dispersion = 0
base_aggressiveness = 1
budget_share = 0.01
value_erosion = 0
"""
INSIDER_EVENT_PERIOD = 20
INSIDER_EVENT_JUMP = 0.40
INSIDER_BACKGROUND_EVENTS = ((8, 0.02), (13, -0.02))


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Configure the root logger on stderr; json (python-json-logger) or plain text"""
    level = (level or os.getenv("INFOMARKET_LOG_LEVEL", "WARNING")).upper()
    fmt = (fmt or os.getenv("INFOMARKET_LOG_FORMAT", "json")).lower()
    handler = logging.StreamHandler(sys.stderr)
    if fmt == "json":
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level, logging.WARNING))


# ---------------------------------------------------------------- config

def _parse_value(raw: str, kind, key: str, line: int):
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in TRUE_WORDS:
                return True
            if lowered in FALSE_WORDS:
                return False
            raise ValueError(text)
        if kind is int:
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError(text)
            return int(text) if text.lstrip("+-").isdigit() else int(as_float)
        if kind is float:
            return float(text)
        return text
    except (ValueError, OverflowError):
        raise ConfigError(f"cannot parse {text!r} as {kind.__name__}", key=key, line=line)


def parse_config_text(text: str, overrides: Optional[Dict[str, object]] = None) -> MarketConfig:
    """
    Parse flat `key = value` lines into a MarketConfig

    '#' starts a comment; unknown, duplicate and missing required keys are errors
    naming the key and line number(s)
    """
    kinds = {f.name: f.type for f in fields(MarketConfig)}
    values: Dict[str, object] = {}
    where: Dict[str, int] = {}

    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", line=number)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in kinds:
            raise ConfigError("unknown key", key=key, line=number)
        if key in where:
            raise ConfigError(f"duplicate key (lines {where[key]} and {number})", key=key, line=number)
        values[key] = _parse_value(raw, kinds[key], key, number)
        where[key] = number

    for key, value in (overrides or {}).items():
        values[key] = value

    for name, optional, _, _ in MarketConfig.field_docs():
        if not optional and name not in values:
            raise ConfigError("missing required key", key=name)

    try:
        return MarketConfig(**values)
    except ConfigError as exc:
        if exc.key in where and exc.line is None:
            raise ConfigError(str(exc).split(": ", 1)[-1], key=exc.key, line=where[exc.key]) from None
        raise


def load_config(path, overrides: Optional[Dict[str, object]] = None) -> MarketConfig:
    """Read and validate a config file"""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_config_text(text, overrides)


def config_lines(cfg: MarketConfig) -> List[Tuple[str, str]]:
    out = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = FLOAT_FORMAT % value
        else:
            text = str(value)
        out.append((f.name, text))
    return out


# ---------------------------------------------------------------- csv + manifest

def write_csv(frame: pd.DataFrame, path) -> None:
    """Header row, minimal RFC-4180 quoting, LF endings, 9 significant digits"""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _read_csv(path, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValidationError(f"{path}: file is empty")
    except pd.errors.ParserError as e:
        raise ValidationError(f"{path}: malformed CSV ({e})")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    try:
        return frame.astype({"period": "int64", "stock_id": "int64"})
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: period and stock_id must be integers")


def read_panel(path) -> pd.DataFrame:
    return _read_csv(path, PANEL_COLUMNS)


def read_trades(path) -> pd.DataFrame:
    return _read_csv(path, TRADE_COLUMNS)


def read_events(path) -> pd.DataFrame:
    return _read_csv(path, EVENT_COLUMNS)



def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Config echo, effective seed, tool version and a digest of every emitted file"""

    config: List[Tuple[str, str]]
    seed: int
    version: str
    digests: Dict[str, str]

    def lines(self) -> List[str]:
        out = [f"tool: infomarket", f"version: {self.version}", f"seed: {self.seed}"]
        out += [f"config.{key}: {value}" for key, value in self.config]
        out += [f"digest.{name}: {digest}" for name, digest in sorted(self.digests.items())]
        return out

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(self.lines()) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        config, digests, seed, version = [], {}, 0, ""
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                key, _, value = line.rstrip("\n").partition(": ")
                if key == "seed":
                    seed = int(value)
                elif key == "version":
                    version = value
                elif key.startswith("config."):
                    config.append((key[len("config."):], value))
                elif key.startswith("digest."):
                    digests[key[len("digest."):]] = value
        return cls(config=config, seed=seed, version=version, digests=digests)


def simulate_to_dir(cfg: MarketConfig, out_dir) -> RunManifest:
    """Run one simulation and write panel.csv, trades.csv, events.csv and manifest.txt"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_simulation(cfg)
    outputs = {"panel.csv": result.panel, "trades.csv": result.trades, "events.csv": result.events}
    for name, frame in outputs.items():
        write_csv(frame, out / name)
    manifest = RunManifest(
        config=config_lines(cfg),
        seed=cfg.seed,
        version=__version__,
        digests={name: file_digest(out / name) for name in outputs},
    )
    manifest.write(out / "manifest.txt")
    logger.info("run written", extra={"out_dir": str(out), "seed": cfg.seed})
    return manifest


def _simulate_seed(args: Tuple[MarketConfig, str]) -> RunManifest:
    cfg, out_dir = args
    return simulate_to_dir(cfg, out_dir)


def parse_seed_range(text: str) -> List[int]:
    """'N..M' inclusive"""
    low, sep, high = text.partition("..")
    try:
        lo, hi = int(low), int(high if sep else low)
    except ValueError:
        raise ValidationError(f"--seeds expects N..M, got {text!r}")
    if hi < lo:
        raise ValidationError(f"--seeds range is empty: {text!r}")
    return list(range(lo, hi + 1))


def parse_dist(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValidationError(f"distribution must be comma-separated decimals, got {text!r}")


def parse_pair(text: str, what: str) -> Tuple[int, int]:
    left, sep, right = text.lower().partition("x")
    try:
        return int(left), int(right)
    except ValueError:
        raise ValidationError(f"{what} must look like RxC, got {text!r}")


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    overrides = {"seed": args.seed} if args.seed is not None else None
    cfg = load_config(args.config, overrides)
    if args.seeds:
        seeds = parse_seed_range(args.seeds)
        jobs = [(replace(cfg, seed=s), os.path.join(args.out, f"seed_{s}")) for s in seeds]
        workers = int(os.getenv("INFOMARKET_WORKERS", "0")) or None
        with ProcessPoolExecutor(max_workers=workers) as pool:
            manifests = list(pool.map(_simulate_seed, jobs))
        for (job_cfg, out_dir), manifest in zip(jobs, manifests):
            print(f"seed {job_cfg.seed}: {out_dir} panel.csv {manifest.digests['panel.csv']}")
        return EXIT_OK
    manifest = simulate_to_dir(cfg, args.out)
    for name, digest in sorted(manifest.digests.items()):
        print(f"{name} {digest}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    analyzer = PanelAnalyzer()
    if args.analysis == "momentum":
        panel = read_panel(args.panel)
        value = momentum_profit(panel, args.formation, args.holding, warmup=args.warmup)
        print(f"momentum_profit J={args.formation} K={args.holding}: {value:.6f}")
        return EXIT_OK

    if args.analysis == "lifecycle":
        panel = read_panel(args.panel)
        r_bins, v_bins = parse_pair(args.bins, "--bins") if args.bins else (
            analyzer.lifecycle["return_bins"], analyzer.lifecycle["volume_bins"])
        spec = SortSpec(args.formation or analyzer.momentum["formation"],
                        args.holding or analyzer.momentum["holding"], r_bins, v_bins)
        table = portfolio_sort(panel, spec, warmup=args.warmup)
        frame = table.mean_return.copy()
        frame.columns = [f"volume_bin_{c}" for c in frame.columns]
        frame.insert(0, "return_bin", frame.index)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_csv(frame, Path(args.out) / "quadrant.csv")
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
        print("wml_by_volume_bin: " + ", ".join(f"{v:.6f}" for v in table.wml))
        return EXIT_OK

    if args.analysis == "imbalance":
        trades, events = read_trades(args.trades), read_events(args.events)
        shares = args.shares_outstanding or analyzer.imbalance["shares_outstanding"]
        window = args.window if args.window is not None else analyzer.imbalance["window"]
        paths = event_aligned_imbalance(trades, events, window, shares)
        frame = paths.table[["offset", "large_mean", "small_mean"]]
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_csv(frame, Path(args.out) / "imbalance.csv")
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.9g}"))
        return EXIT_OK

    if args.analysis == "overshoot":
        panel, events = read_panel(args.panel), read_events(args.events)
        horizon = args.horizon or analyzer.overshoot["horizon"]
        frame = event_overshoot(panel, events, horizon)
        up, down = frame[frame["jump"] > 0], frame[frame["jump"] <= 0]
        print(f"events: {len(frame)}")
        print(f"mean_overshoot_positive: {up['overshoot'].abs().mean():.6f}")
        print(f"mean_overshoot_negative: {down['overshoot'].abs().mean():.6f}")
        return EXIT_OK
    raise ValidationError(f"unknown analysis {args.analysis!r}")


def cmd_info(args) -> int:
    base = args.base
    if args.measure == "value-curve":
        for P, value in information_value_curve(args.points, base):
            print(f"{P:.6f},{value:.6f}")
        return EXIT_OK
    if args.measure == "value":
        print(f"{info_value(args.fraction, base):.6f}")
        return EXIT_OK

    if args.measure == "mutual" and args.fidelity is not None:
        joint = joint_from_channel(bsc(args.fidelity))
        print(f"{mutual_information(joint, base):.6f}")
        return EXIT_OK
    if not args.dist:
        raise ValidationError(f"info {args.measure} needs --dist")
    p = parse_dist(args.dist)
    if args.measure == "entropy":
        print(f"{entropy(p, base):.6f}")
    elif args.measure == "cross-entropy":
        if not args.dist2:
            raise ValidationError("info cross-entropy needs --dist2")
        print(f"{cross_entropy(p, parse_dist(args.dist2), base):.6f}")
    else:
        rows, cols = parse_pair(args.shape, "--shape") if args.shape else (int(round(len(p) ** 0.5)),) * 2
        if rows * cols != len(p):
            raise ValidationError(f"--shape {rows}x{cols} does not match {len(p)} values")
        print(f"{mutual_information(np.reshape(p, (rows, cols)), base):.6f}")
    return EXIT_OK


def cmd_config_docs(args) -> int:
    for name, optional, default, doc in MarketConfig.field_docs():
        status = f"optional, default {default}" if optional else "required"
        print(f"{name} ({status}): {doc}")
    return EXIT_OK


def run_kahneman_demo(threshold: float = 30.0) -> Dict[str, str]:
    """Gain frame starts at subsistence (baseline -threshold); loss frame at baseline 0"""
    lotteries = kahneman_lotteries()
    frames = {"gain": (("A", "B"), -threshold), "loss": (("C", "D"), 0.0)}
    chosen = {}
    print("=" * 60)
    print(f"Survival choice, death threshold {threshold:g} days without food")
    print("=" * 60)
    for frame, (names, baseline) in frames.items():
        options = [lotteries[n] for n in names]
        for n, lottery in zip(names, options):
            outcomes = ", ".join(f"{p:.0%} -> {v:+g} days" for v, p in lottery.outcomes)
            print(f"  {n}: {outcomes} | survival {survival_probability(lottery, threshold, baseline):.2f}"
                  f" | expected {lottery.expected_value():+.1f}")
        chosen[frame] = names[survival_choice(options, threshold, baseline)]
        print(f"  {frame} frame chosen: {chosen[frame]}")
    return chosen


def run_insider_demo() -> Dict[str, float]:
    """Single insider buys a period early; the news then becomes public in one period"""
    cfg = parse_config_text(INSIDER_DEMO_CONFIG)
    events = [EventRecord(period, 0, jump) for period, jump in INSIDER_BACKGROUND_EVENTS]
    events.append(EventRecord(INSIDER_EVENT_PERIOD, 0, INSIDER_EVENT_JUMP))
    result = run_simulation(cfg, events=events)
    panel = result.panel.set_index("period")
    trades = result.trades
    large = trades[trades["agent_class"] == "newswatcher"].groupby("period")["signed_shares"].sum()

    first_insider = INSIDER_EVENT_PERIOD - cfg.insider_lead
    announce = INSIDER_EVENT_PERIOD + cfg.T_diff
    baseline = float(panel.loc[cfg.momentum_window:first_insider - 1, "volume"].mean())
    pre = panel.loc[first_insider:announce - 1]
    post = panel.loc[announce + 1:]
    summary = {
        "baseline_volume": baseline,
        "pre_volume": float(pre["volume"].mean()),
        "pre_large_imbalance": float(large.reindex(pre.index, fill_value=0.0).sum()),
        "announcement_volume": float(panel.loc[announce, "volume"]),
        "announcement_return": float(panel.loc[announce, "return"]),
        "post_mean_abs_return": float(post["return"].abs().mean()),
        "jump": INSIDER_EVENT_JUMP,
    }

    print("=" * 60)
    print(f"Insider scenario: +{INSIDER_EVENT_JUMP:.0%} news at period {INSIDER_EVENT_PERIOD}, "
          f"insider lead {cfg.insider_lead}, public at period {announce}")
    print("=" * 60)
    print(f"  {'period':>6} {'return':>9} {'volume':>12} {'large_imb':>12}")
    for t in range(first_insider - 2, announce + 4):
        print(f"  {t:>6} {panel.loc[t, 'return']:>9.4f} {panel.loc[t, 'volume']:>12.0f} "
              f"{large.get(t, 0.0):>12.0f}")
    for key, value in summary.items():
        print(f"  {key}: {value:.6g}")
    return summary


def cmd_demo(args) -> int:
    if args.scenario == "kahneman":
        run_kahneman_demo(args.threshold)
    else:
        run_insider_demo()
    return EXIT_OK


# ---------------------------------------------------------------- parser

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infomarket", description="Information-theoretic agent-based market simulator")
    parser.add_argument("--version", action="version", version=f"infomarket {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation and write CSVs + manifest")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--seeds", help="N..M: one run per seed, in parallel workers")
    sim.set_defaults(handler=cmd_simulate)

    ana = sub.add_parser("analyze", help="diagnostics on panel/trade/event CSVs")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)
    mom = ana_sub.add_parser("momentum")
    mom.add_argument("--panel", required=True)
    mom.add_argument("--formation", type=int, required=True)
    mom.add_argument("--holding", type=int, required=True)
    mom.add_argument("--warmup", type=int, default=0)
    life = ana_sub.add_parser("lifecycle")
    life.add_argument("--panel", required=True)
    life.add_argument("--bins", help="RxV, e.g. 2x2 or 5x3")
    life.add_argument("--formation", type=int)
    life.add_argument("--holding", type=int)
    life.add_argument("--warmup", type=int, default=0)
    life.add_argument("--out")
    imb = ana_sub.add_parser("imbalance")
    imb.add_argument("--trades", required=True)
    imb.add_argument("--events", required=True)
    imb.add_argument("--window", type=int)
    imb.add_argument("--shares-outstanding", type=float)
    imb.add_argument("--out")
    over = ana_sub.add_parser("overshoot")
    over.add_argument("--panel", required=True)
    over.add_argument("--events", required=True)
    over.add_argument("--horizon", type=int)
    ana.set_defaults(handler=cmd_analyze)

    info = sub.add_parser("info", help="information measures")
    info.add_argument("measure", choices=["entropy", "cross-entropy", "mutual", "value", "value-curve"])
    info.add_argument("--dist")
    info.add_argument("--dist2")
    info.add_argument("--shape", help="RxC for a flattened joint distribution")
    info.add_argument("--fidelity", type=float, help="uniform-prior BSC fidelity for 'mutual'")
    info.add_argument("--fraction", type=float, default=1.0, help="informed fraction for 'value'")
    info.add_argument("--points", type=int, default=100)
    info.add_argument("--base", default="e", help="e or a real > 1")
    info.set_defaults(handler=cmd_info)

    demo = sub.add_parser("demo", help="built-in scenarios")
    demo.add_argument("scenario", choices=["kahneman", "insider"])
    demo.add_argument("--threshold", type=float, default=30.0)
    demo.set_defaults(handler=cmd_demo)

    docs = sub.add_parser("config-docs", help="list config keys, defaults and meaning")
    docs.set_defaults(handler=cmd_config_docs)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; 0 ok, 1 validation/usage error, 2 I/O error"""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except UsageError:
        return EXIT_VALIDATION
    try:
        return args.handler(args)
    except (ValidationError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except InfoMarketError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION


def main():
    load_dotenv()
    setup_logging()
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
