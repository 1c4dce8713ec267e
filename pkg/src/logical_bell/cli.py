"""Command-line entry point: ``logical-bell <subcommand>``."""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import harness
from .config import load_config, parse_code, physical_params, protocol_config
from .photonics import QNDMSetting, channel_transmission, link_budget, qndm_probabilities
from .protocols import time_budget_table
from .rng import master_seed
from .stabilizer.binding import ConfigurationError


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML run configuration.")
    @click.option("--seed", type=int, default=None, help="Master seed (overrides config and LOGICAL_BELL_SEED).")
    @click.option("--shots", type=int, default=None, help="Shots or trials per point.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json", "svg"]), default="csv")
    @functools.wraps(fn)
    def wrapper(config_path, seed, shots, out_dir, fmt, **kw):
        try:
            cfg = load_config(config_path)
            cfg["seed"] = master_seed(seed, cfg["seed"])
            return fn(cfg=cfg, shots=shots, out_dir=out_dir, fmt=fmt, **kw)
        except (ConfigurationError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _emit(rows, stem, fmt, out_dir, kind, metadata=None, estimates=None, text=None):
    if out_dir is not None:
        path = harness.export(rows, out_dir, stem, fmt, kind, metadata, estimates)
        click.echo(f"wrote {path}")
        if estimates is not None and fmt != "json":
            est = harness.export(estimates, out_dir, f"{stem}-thresholds", "csv")
            click.echo(f"wrote {est}")
        return
    if fmt == "json":
        click.echo(harness.to_json(kind, rows, metadata, estimates), nl=False)
    elif fmt == "csv":
        click.echo(text if text is not None else harness.to_csv(rows), nl=False)
        if estimates:
            click.echo(harness.to_csv(estimates), nl=False)
    else:
        raise click.ClickException("svg output needs --out")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Logical Bell-pair generation with lattice surgery over memory-assisted links."""


@main.command("time-budget")
@click.option("--distance", "D", type=float, default=1.0, show_default=True, help="Fiber length in km.")
@common_options
def time_budget(cfg, shots, out_dir, fmt, D):
    """Per-code time budget of one generation plus one memory cycle."""
    phys = physical_params(cfg)
    rows = time_budget_table(D, phys.gate_times, cfg["link"]["t_transfer"])
    if fmt == "csv" and out_dir is None:
        lines = ["protocol,code,t_cycle,t_merge,t_trav,t_total"]
        for r in rows:
            vals = ",".join(f"{r[k]:.2e}" for k in ("t_cycle", "t_merge", "t_trav", "t_total"))
            lines.append(f"{r['protocol']},{r['code']},{vals}")
        click.echo("\n".join(lines))
        return
    _emit(rows, "time_budget", fmt, out_dir, "time-budget", {"D_km": D})


@main.command("qndm-calc")
@click.option("--distance", "D", type=float, default=1.0, show_default=True)
@click.option("--protocol", type=click.Choice(["1", "2"]), default="2")
@common_options
def qndm_calc(cfg, shots, out_dir, fmt, D, protocol):
    """Cavity QNDM probabilities and the composed link budget."""
    pc = protocol_config(cfg, int(protocol), D=D)
    res = qndm_probabilities(pc.qndm.cavity)
    budget = pc.budget
    cavity_budget = link_budget(pc.link, QNDMSetting("cavity", cavity=pc.qndm.cavity), pc.eta_conv, pc.p_trs, pc.p_dark)
    rows = [
        {"quantity": "eta_channel", "value": channel_transmission(pc.link)},
        {"quantity": "cooperativity", "value": pc.qndm.cavity.cooperativity},
        {"quantity": "P(0_a) after pulse", "value": res.p_outcome["0_a"]},
        {"quantity": "P(1_a) after pulse", "value": res.p_outcome["1_a"]},
        {"quantity": "P_detect (cavity model)", "value": res.p_detect},
        {"quantity": "P_transmit (cavity model)", "value": res.p_transmit},
        {"quantity": "P_detect single photon", "value": res.single_photon_detect},
        {"quantity": "P_transmit single photon", "value": res.single_photon_transmit},
        {"quantity": "QNDM efficiency in use", "value": budget.p_qndm_detect * budget.p_qndm_transmit},
        {"quantity": "eta_conv", "value": budget.eta_conv},
        {"quantity": "p_trs", "value": budget.p_trs},
        {"quantity": "p_dark", "value": budget.p_dark},
        {"quantity": "eta_tot", "value": budget.eta_tot},
        {"quantity": "eta_tot (cavity model)", "value": cavity_budget.eta_tot},
        {"quantity": "latency_s", "value": budget.latency},
    ]
    if fmt == "csv" and out_dir is None:
        width = max(len(r["quantity"]) for r in rows)
        click.echo("\n".join(f"{r['quantity']:<{width}}  {r['value']:.6g}" for r in rows))
        return
    _emit(rows, "qndm", fmt, out_dir, "qndm", {"D_km": D, "protocol": int(protocol)})


def _codes(cfg, codes):
    return tuple(parse_code(c) for c in (codes or cfg["sweep"]["codes"]))


def _sweep(cfg, shots, out_dir, fmt, axis, grid, codes, m1, stem):
    s = cfg["sweep"]
    config = harness.SweepConfig(
        axis=axis,
        grid=tuple(grid),
        shots=shots or s["shots"],
        codes=_codes(cfg, codes),
        seed=cfg["seed"],
        m1=s["m1"] if m1 is None else m1,
        batch=s["batch"],
        physical=physical_params(cfg),
        workers=s["workers"],
    )
    rows = harness.sweep_logical_error(config)
    estimates = harness.thresholds_from_rows(rows, seed=cfg["seed"])
    meta = harness.metadata_for(config)
    _emit(rows, stem, fmt, out_dir, "sweep", meta, estimates)


@main.command("sweep-depolarizing")
@click.option("--code", "codes", multiple=True, help="Family:d, repeatable.")
@click.option("--m1", type=int, default=None, help="Memory rounds after generation.")
@common_options
def sweep_depolarizing(cfg, shots, out_dir, fmt, codes, m1):
    """Logical error versus p_err under the depolarizing model."""
    _sweep(cfg, shots, out_dir, fmt, "p_err", cfg["sweep"]["p_grid"], codes, m1, "sweep_depolarizing")


@main.command("sweep-physical")
@click.option("--code", "codes", multiple=True)
@click.option("--m1", type=int, default=None)
@common_options
def sweep_physical(cfg, shots, out_dir, fmt, codes, m1):
    """Logical error versus the gate-error scale xi under the physical model."""
    _sweep(cfg, shots, out_dir, fmt, "xi", cfg["sweep"]["xi_grid"], codes, m1, "sweep_physical")


@main.command("rate-vs-distance")
@click.option("--code", default=None)
@common_options
def rate_vs_distance(cfg, shots, out_dir, fmt, code):
    """Protocol 2 completed-pair rate over the configured distances."""
    r = cfg["rate"]
    pc = protocol_config(cfg, 2, parse_code(code or r["code"]))
    rows = harness.rate_vs_distance(pc, r["distances"], shots or r["trials"], r["repetitions"], cfg["seed"])
    meta = {"code": code or r["code"], "seed": cfg["seed"], "aux_pairs": pc.aux_pairs}
    _emit(rows, "rate_vs_distance", fmt, out_dir, "rate", meta)


@main.command("report")
@common_options
def report(cfg, shots, out_dir, fmt):
    """Summarise every JSON result document found in --out."""
    if out_dir is None:
        raise click.ClickException("report needs --out pointing at a results directory")
    rows = []
    for path in sorted(Path(out_dir).glob("*.json")):
        doc = json.loads(path.read_text())
        if doc.get("kind") == "report":
            continue
        for est in doc.get("estimates", []):
            rows.append({"source": path.name, **est})
        if doc.get("kind") == "rate":
            first = doc["rows"][0]
            rows.append({"source": path.name, "first": "rate", "second": f"D={first['D']}", "method": "rate",
                         "value": first["rate_hz"], "ci_low": None, "ci_high": None, "direction": "n/a"})
    if not rows:
        raise click.ClickException(f"no result documents in {out_dir}")
    text = harness.to_csv(rows)
    if fmt == "json":
        path = Path(out_dir) / "report.json"
        path.write_text(json.dumps({"schema_version": harness.SCHEMA_VERSION, "kind": "report", "metadata": {},
                                    "rows": rows}, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {path}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    sys.exit(main())
