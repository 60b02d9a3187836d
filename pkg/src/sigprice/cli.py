"""Command-line interface: ``sigprice <command> [--config FILE] [--seed S] [--out DIR] ...``.

A config file is JSON. For ``simulate`` and ``price-family`` it may be a bare
market (``{"model": ..., "params": {...}, "days": 252, "seed": 0}``); all
commands also accept ``{"market": {...}, "markets": [...], "experiment": {...}}``.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from .calibrate import ImpliedExpectedSignature, PayoffFunctional, fit_implied_signature
from .experiments import (
    MARKET_MODELS,
    ExperimentConfig,
    ExperimentReport,
    PricingContext,
    StageError,
    run_family_size_sweep,
    run_pricing_experiment,
)
from .leadlag import PricePath, write_batch
from .models import Market, market_prices, sample_values
from .payoffs import build_family, read_catalogue, write_catalogue
from .render import render_report, render_reports, sweep_svg


def _load(config: str | None) -> dict:
    if config is None:
        return {}
    try:
        data = json.loads(Path(config).read_text())
    except (OSError, ValueError) as exc:
        raise StageError("config", f"{config}: {exc}") from exc
    if not isinstance(data, dict):
        raise StageError("config", f"{config}: expected a JSON object")
    if "model" in data:
        return {"market": data}
    return data


def _experiment_config(raw: dict, order: int | None, days: int | None) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.from_dict(raw.get("experiment", {}))
        if order is not None:
            cfg = replace(cfg, order=order)
        if days is not None:
            cfg = replace(cfg, days=days)
    except (TypeError, ValueError) as exc:
        raise StageError("config", str(exc)) from exc
    return cfg


def _markets(raw: dict, seed: int | None, days: int | None, default_days: int) -> list[Market]:
    if "markets" in raw:
        specs = list(raw["markets"])
    elif "market" in raw:
        specs = [raw["market"]]
    else:
        specs = [{"model": m} for m in MARKET_MODELS]
    out = []
    for spec in specs:
        spec = dict(spec)
        spec.setdefault("days", default_days)
        if seed is not None:
            spec["seed"] = seed
        if days is not None:
            spec["days"] = days
        try:
            out.append(Market.from_dict(spec))
        except (KeyError, TypeError, ValueError) as exc:
            raise StageError("config", f"bad market {spec}: {exc}") from exc
    return out


def _out_dir(out: str) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_prices_csv(dest: Path, prices) -> None:
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["payoff_id", "price", "std_err"])
        for i, p in enumerate(prices):
            w.writerow([i, repr(p.price), repr(p.std_err)])


def _read_prices_csv(src: str) -> list[float]:
    with open(src, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["payoff_id"]))
    return [float(r["price"]) for r in rows]


def _catalogue(path: str | None, cfg: ExperimentConfig, held_out: bool = False):
    if path:
        return read_catalogue(path)
    return cfg.held_out() if held_out else cfg.family()


common = [
    click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="JSON configuration file."),
    click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                 help="Market RNG seed (overrides the config)."),
    click.option("--out", "out", type=click.Path(file_okay=False), default="out", show_default=True,
                 help="Output directory."),
    click.option("--order", type=click.IntRange(1, 8), default=None, help="Signature order N."),
    click.option("--days", type=click.IntRange(1), default=None, help="Trading steps per year."),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Model-free pricing of exotics through implied expected signatures."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@with_common
@click.option("--count", type=click.IntRange(1), default=1000, show_default=True)
def simulate(config, seed, out, order, days, count):
    """Simulate market paths to OUT/paths.jsonl."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    market = _markets(raw, seed, days, cfg.days)[0]
    try:
        values = sample_values(market, count)
    except Exception as exc:
        raise StageError("simulate", str(exc)) from exc
    dest = _out_dir(out) / "paths.jsonl"
    write_batch((PricePath(market.timeline, v) for v in values), dest)
    click.echo(str(dest))


@main.command("price-family")
@with_common
@click.option("--catalogue", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Payoff catalogue JSON (default: the configured family).")
@click.option("--held-out", is_flag=True, help="Price the held-out family instead.")
def price_family(config, seed, out, order, days, catalogue, held_out):
    """Monte-Carlo market prices of a payoff family to OUT/prices.csv."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    market = _markets(raw, seed, days, cfg.days)[0]
    payoffs = _catalogue(catalogue, cfg, held_out)
    try:
        prices = market_prices(market, payoffs, cfg.mc_paths)
    except Exception as exc:
        raise StageError("market", str(exc)) from exc
    d = _out_dir(out)
    write_catalogue(payoffs, d / "catalogue.json")
    _write_prices_csv(d / "prices.csv", prices)
    click.echo(str(d / "prices.csv"))


@main.command("fit-functionals")
@with_common
@click.option("--catalogue", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--held-out", is_flag=True)
def fit_functionals(config, seed, out, order, days, catalogue, held_out):
    """Regress payoffs on basis-path signatures; writes OUT/functionals.json."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    payoffs = _catalogue(catalogue, cfg, held_out)
    fns = PricingContext(cfg).functionals(payoffs)
    dest = _out_dir(out) / "functionals.json"
    dest.write_text(json.dumps([fn.to_dict() for fn in fns]) + "\n")
    click.echo(str(dest))


@main.command("implied-sig")
@with_common
@click.option("--functionals", "functionals_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--prices", "prices_path", type=click.Path(exists=True, dir_okay=False), required=True)
def implied_sig(config, seed, out, order, days, functionals_path, prices_path):
    """Fit the implied expected signature to observed prices; writes OUT/implied.json."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    fns = [PayoffFunctional.from_dict(d) for d in json.loads(Path(functionals_path).read_text())]
    prices = _read_prices_csv(prices_path)
    basis = PricingContext(cfg).basis if cfg.regularization.method == "basis-weights" else None
    try:
        implied = fit_implied_signature(fns, prices, cfg.order, cfg.regularization, basis=basis)
    except Exception as exc:
        raise StageError("implied", str(exc)) from exc
    dest = _out_dir(out) / "implied.json"
    implied.save(dest)
    click.echo(str(dest))


@main.command()
@with_common
@click.option("--implied", "implied_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--catalogue", type=click.Path(exists=True, dir_okay=False), default=None)
def price(config, seed, out, order, days, implied_path, catalogue):
    """Price payoffs against an implied signature; writes OUT/predicted.csv."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    implied = ImpliedExpectedSignature.load(implied_path)
    payoffs = _catalogue(catalogue, cfg, held_out=True)
    fns = PricingContext(cfg).functionals(payoffs)
    dest = _out_dir(out) / "predicted.csv"
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["payoff_id", "label", "predicted_price"])
        for i, (f, fn) in enumerate(zip(payoffs, fns)):
            w.writerow([i, f.label, repr(implied.price(fn))])
    click.echo(str(dest))


def _save_report(rep: ExperimentReport, d: Path, prefix: str | None = None) -> None:
    name = prefix or rep.model
    (d / f"{name}_report.json").write_text(json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")


@main.command()
@with_common
@click.option("--vanilla-only", is_flag=True, help="Calibrate to European calls only.")
def experiment(config, seed, out, order, days, vanilla_only):
    """Run the held-out pricing experiment for each configured market."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    ctx = PricingContext(cfg)
    family = build_family((sum(cfg.family_counts), 0, 0, 0), cfg.grids) if vanilla_only else None
    d = _out_dir(out)
    reports = []
    for m in _markets(raw, seed, days, cfg.days):
        rep = run_pricing_experiment(m, family=family, context=ctx)
        _save_report(rep, d)
        reports.append(rep)
        click.echo(f"{m.model}: R2={rep.metrics['r2']:.6f} MSE={rep.metrics['mse']:.3e} "
                   f"MAE={rep.metrics['mae']:.3e}")
    render_reports(reports, d)


@main.command()
@with_common
@click.option("--sizes", default="33,66,100", show_default=True, help="Comma-separated family sizes.")
def sweep(config, seed, out, order, days, sizes):
    """R^2 against the number of calibration payoffs (first configured market)."""
    raw = _load(config)
    cfg = _experiment_config(raw, order, days)
    if "market" not in raw and "markets" not in raw:
        raw = {**raw, "market": {"model": "HullWhite"}}
    market = _markets(raw, seed, days, cfg.days)[0]
    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise StageError("family", f"bad --sizes {sizes!r}") from exc
    result = run_family_size_sweep(market, size_list, context=PricingContext(cfg))
    d = _out_dir(out)
    (d / "sweep.csv").write_text(result.curve_csv())
    (d / "sweep.svg").write_text(sweep_svg(result))
    for s, rep in zip(result.sizes, result.reports):
        _save_report(rep, d, f"{market.model}_F{s}")
        render_report(rep, d, prefix=f"{market.model}_F{s}")
    click.echo(" ".join(f"{s}:{r:.6f}" for s, r in zip(result.sizes, result.r2)))


def run() -> None:
    """Entry point: maps stage failures to exit code 2 with a stage tag."""
    try:
        main(standalone_mode=False)
    except StageError as exc:
        click.echo(f"error {exc}", err=True)
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except Exception as exc:  # noqa: BLE001
        click.echo(f"error [cli] {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()
