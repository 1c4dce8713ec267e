"""Sweep engine: logical error campaigns, threshold estimates, rate curves, export.

Every Monte Carlo point draws from its own Philox stream keyed by
(master seed, code index, point index, batch index), so results do not
depend on batching across points or on the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .codes import CodeSpec
from .decoders import MatchingDecoder, build_detector_graph
from .noise import DepolarizingParams, PhysicalParams, bind_depolarizing, bind_physical
from .protocols import BaselineConfig, NoiseSpec, ProtocolConfig, protocol_rate, run_unencoded_baseline
from .rng import derive_rng
from .stabilizer.binding import ConfigurationError
from .stabilizer.frame import FrameSimulator, compile_program
from .surgery import MergeConfig, build_bell_experiment

SCHEMA_VERSION = "1.0"
AXES = ("p_err", "xi", "distance", "time")
SWEEP_COLUMNS = (
    "axis", "value", "code", "family", "d", "shots", "failures", "p_L", "stderr",
    "wilson_low", "wilson_high", "p_zz", "p_xx", "flagged",
)
RATE_COLUMNS = ("D", "rate_hz", "std_hz", "repetitions", "trials")
BASELINE = "Unencoded"
# reference values quoted for the physical-model xi crossings; not reproduced
XI_REFERENCE = {"RotatedSurface": 1.68, "BaconShor": 0.41}


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "p_err"
    grid: tuple[float, ...] = tuple(np.logspace(-4, -2, 8))
    shots: int = 100_000
    codes: tuple[CodeSpec, ...] = (CodeSpec("RotatedSurface", 3),)
    protocol: int = 2
    seed: int = 2024
    m1: int = 1
    batch: int = 1 << 16
    baseline: bool = True
    physical: PhysicalParams = field(default_factory=PhysicalParams)
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigurationError(f"axis must be one of {AXES}")
        g = list(self.grid)
        if not g or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigurationError("grid must be non-empty and strictly increasing")
        if self.shots < 1 or self.batch < 1:
            raise ConfigurationError("shots and batch must be >= 1")
        if self.m1 < 0:
            raise ConfigurationError("m1 must be >= 0")


# -- statistics ---------------------------------------------------------------

def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    from scipy import stats  # deferred: scipy.stats dominates CLI start-up

    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _row(axis, value, code, family, d, shots, fails, zz, xx) -> dict:
    p = fails / shots
    lo, hi = wilson_interval(fails, shots)
    return {
        "axis": axis,
        "value": float(value),
        "code": code,
        "family": family,
        "d": d,
        "shots": int(shots),
        "failures": int(fails),
        "p_L": p,
        "stderr": math.sqrt(p * (1 - p) / shots),
        "wilson_low": lo,
        "wilson_high": hi,
        "p_zz": zz / shots,
        "p_xx": xx / shots,
        "flagged": fails == 0,
    }


# -- logical error points -----------------------------------------------------

def _binding(experiment, axis: str, value: float, physical: PhysicalParams):
    if axis == "p_err":
        return bind_depolarizing(experiment.circuit, DepolarizingParams(value))
    if axis == "xi":
        return bind_physical(experiment.circuit, physical.scaled(value))
    raise ConfigurationError(f"logical-error sweeps run over p_err or xi, not {axis}")


def sample_logical_errors(experiment, binding, shots: int, rng_for_batch, batch: int = 1 << 16):
    """(any, zz, xx) failure counts of a decoded experiment."""
    if binding is None or all(not e for e in binding.entries):
        return 0, 0, 0
    program = compile_program(experiment.circuit, binding, experiment.final_checks)
    decoder = MatchingDecoder(build_detector_graph(experiment, binding))
    sim = FrameSimulator(program)
    fails = zz = xx = 0
    done, i = 0, 0
    while done < shots:
        n = min(batch, shots - done)
        rec, _, _ = sim.run(n, rng_for_batch(i))
        det, obs = experiment.evaluate(rec)
        err = obs.T.astype(np.uint8) ^ decoder.decode_batch(det.T)
        fails += int(err.any(axis=1).sum())
        zz += int(err[:, 0].sum())
        xx += int(err[:, 1].sum())
        done += n
        i += 1
    return fails, zz, xx


def _code_point(task) -> dict:
    family, d, axis, value, shots, seed, keys, m1, batch, physical = task
    spec = CodeSpec(family, d)
    times = physical.gate_times
    exp = build_bell_experiment(spec, MergeConfig(), times, m1=m1)
    if axis == "p_err" and value == 0:
        return _row(axis, value, spec.short + str(d), family, d, shots, 0, 0, 0)
    binding = _binding(exp, axis, value, physical)
    fails, zz, xx = sample_logical_errors(exp, binding, shots, lambda i: derive_rng(seed, *keys, i), batch)
    return _row(axis, value, f"{spec.short}{d}", family, d, shots, fails, zz, xx)


def baseline_config(family: str, axis: str, value: float, physical: PhysicalParams, cycles: int = 1) -> BaselineConfig:
    if axis == "p_err":
        noise = NoiseSpec("depolarizing", p_err=value, physical=physical)
    else:
        noise = NoiseSpec("physical", physical=physical.scaled(value))
    return BaselineConfig(family, noise, cycles)


def _baseline_point(task) -> dict:
    family, axis, value, shots, seed, keys, physical = task
    cfg = baseline_config(family, axis, value, physical)
    zz, xx = run_unencoded_baseline(cfg, shots, derive_rng(seed, *keys))
    fails = int((zz | xx).sum())
    return _row(axis, value, f"{BASELINE}-{CodeSpec(family, 3).short}", family, 0, shots, fails, int(zz.sum()), int(xx.sum()))


def sweep_logical_error(config: SweepConfig) -> list[dict]:
    """Rows in config order: each code over the grid, then the baselines."""
    tasks, kinds = [], []
    for ci, spec in enumerate(config.codes):
        for pi, v in enumerate(config.grid):
            tasks.append((spec.family, spec.d, config.axis, float(v), config.shots, config.seed, (ci, pi),
                          config.m1, config.batch, config.physical))
            kinds.append(_code_point)
    if config.baseline:
        families = sorted({s.family for s in config.codes}, key=[s.family for s in config.codes].index)
        for fi, fam in enumerate(families):
            for pi, v in enumerate(config.grid):
                tasks.append((fam, config.axis, float(v), config.shots, config.seed, (1000 + fi, pi), config.physical))
                kinds.append(_baseline_point)
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_dispatch, zip(kinds, tasks)))
    return [_dispatch(kt) for kt in zip(kinds, tasks)]


def _dispatch(kind_task):
    kind, task = kind_task
    return kind(task)


def curve(rows: list[dict], code: str) -> Curve:
    sel = [r for r in rows if r["code"] == code]
    if not sel:
        raise KeyError(f"no rows for {code}")
    return Curve(
        np.array([r["value"] for r in sel]),
        np.array([r["failures"] for r in sel]),
        np.array([r["shots"] for r in sel]),
        code,
    )


# -- crossings ----------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    failures: np.ndarray
    shots: np.ndarray
    name: str = ""

    @property
    def p(self) -> np.ndarray:
        return self.failures / self.shots

    @classmethod
    def exact(cls, x, p, name: str = "", shots: int = 10**12) -> Curve:
        """A curve given by probabilities, treated as (nearly) noiseless."""
        shots_arr = np.full(len(x), shots, dtype=np.int64)
        return cls(np.asarray(x, float), np.round(np.asarray(p) * shots).astype(np.int64), shots_arr, name)


@dataclass(frozen=True)
class ThresholdEstimate:
    value: float
    ci_low: float
    ci_high: float
    method: str


@dataclass(frozen=True)
class NoCrossing:
    method: str
    direction: str  # "above" if the first curve stays above the second, "below", or "undefined"


def log_log_crossing(x, y1, y2) -> float | None:
    """First sign change of log y1 - log y2, interpolated linearly in log-log."""
    x, y1, y2 = (np.asarray(a, float) for a in (x, y1, y2))
    ok = (y1 > 0) & (y2 > 0)
    lx, diff = np.log(x[ok]), np.log(y1[ok]) - np.log(y2[ok])
    for i in range(len(diff) - 1):
        a, b = diff[i], diff[i + 1]
        if a == 0 and b == 0:
            continue
        if a == 0:
            return float(np.exp(lx[i]))
        if a * b < 0 or b == 0:
            t = a / (a - b)
            return float(np.exp(lx[i] + t * (lx[i + 1] - lx[i])))
    return None


def _direction(y1, y2) -> str:
    ok = (np.asarray(y1) > 0) & (np.asarray(y2) > 0)
    d = np.log(np.asarray(y1)[ok]) - np.log(np.asarray(y2)[ok])
    if len(d) == 0 or np.all(d == 0):
        return "undefined"
    return "above" if np.all(d >= 0) else "below"


def estimate_crossing(
    first: Curve,
    second: Curve,
    method: str,
    resamples: int = 1000,
    seed: int = 0,
) -> ThresholdEstimate | NoCrossing:
    if not np.array_equal(first.x, second.x):
        raise ValueError("curves must share the grid")
    value = log_log_crossing(first.x, first.p, second.p)
    if value is None:
        return NoCrossing(method, _direction(first.p, second.p))
    rng = np.random.default_rng(seed)
    boots = []
    f1 = rng.binomial(first.shots[None, :], first.p[None, :], size=(resamples, len(first.x))) / first.shots
    f2 = rng.binomial(second.shots[None, :], second.p[None, :], size=(resamples, len(second.x))) / second.shots
    for a, b in zip(f1, f2):
        c = log_log_crossing(first.x, a, b)
        if c is not None:
            boots.append(c)
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
    else:
        lo = hi = value
    return ThresholdEstimate(value, float(min(lo, value)), float(max(hi, value)), method)


def estimate_pseudo_threshold(code: Curve, baseline: Curve, **kw) -> ThresholdEstimate | NoCrossing:
    return estimate_crossing(code, baseline, "unencoded-crossing", **kw)


def estimate_family_threshold(d3: Curve, d5: Curve, **kw) -> ThresholdEstimate | NoCrossing:
    return estimate_crossing(d3, d5, "d3-d5-crossing", **kw)


def thresholds_from_rows(rows: list[dict], seed: int = 0) -> list[dict]:
    """Pseudo-thresholds of every code against its family's baseline, and
    d = 3 vs d = 5 thresholds wherever both distances were swept."""
    out = []
    codes = [c for c in dict.fromkeys(r["code"] for r in rows) if not c.startswith(BASELINE)]
    for code in codes:
        fam = next(r["family"] for r in rows if r["code"] == code)
        base = f"{BASELINE}-{CodeSpec(fam, 3).short}"
        if any(r["code"] == base for r in rows):
            est = estimate_pseudo_threshold(curve(rows, code), curve(rows, base), seed=seed)
            out.append(_estimate_row(code, base, est))
    for code in codes:
        if code.endswith("3") and code[:-1] + "5" in codes:
            est = estimate_family_threshold(curve(rows, code), curve(rows, code[:-1] + "5"), seed=seed)
            out.append(_estimate_row(code, code[:-1] + "5", est))
    return out


def _estimate_row(a: str, b: str, est) -> dict:
    if isinstance(est, NoCrossing):
        return {"first": a, "second": b, "method": est.method, "value": None, "ci_low": None, "ci_high": None,
                "direction": est.direction}
    return {"first": a, "second": b, "method": est.method, "value": est.value, "ci_low": est.ci_low,
            "ci_high": est.ci_high, "direction": "crossing"}


# -- rate vs distance ---------------------------------------------------------

def rate_vs_distance(
    config: ProtocolConfig,
    distances,
    trials: int = 2000,
    repetitions: int = 5,
    seed: int = 2024,
) -> list[dict]:
    """Protocol 2 completed-pair rate with the spread over reseeded repetitions.

    Repetition r uses the same stream at every distance, so the curve is
    compared under common random numbers.
    """
    if config.protocol != 2:
        raise ConfigurationError("rate curves are defined for Protocol 2")
    rows = []
    for D in distances:
        cfg = replace(config, D=float(D))
        rates = [protocol_rate(cfg, trials, derive_rng(seed, 2, r)) for r in range(repetitions)]
        rows.append({
            "D": float(D),
            "rate_hz": float(np.mean(rates)),
            "std_hz": float(np.std(rates, ddof=1)) if repetitions > 1 else 0.0,
            "repetitions": repetitions,
            "trials": trials,
        })
    return rows


# -- export -------------------------------------------------------------------

def _columns_for(rows: list[dict]) -> tuple[str, ...]:
    if rows and set(SWEEP_COLUMNS) <= set(rows[0]):
        return SWEEP_COLUMNS
    if rows and set(RATE_COLUMNS) <= set(rows[0]):
        return RATE_COLUMNS
    return tuple(rows[0]) if rows else ()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def to_csv(rows: list[dict], columns: tuple[str, ...] | None = None) -> str:
    columns = columns or _columns_for(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Inverse of :func:`to_csv` for the documented column types."""
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in r.items():
            if v in ("true", "false"):
                row[k] = v == "true"
            elif v == "":
                row[k] = None
            else:
                try:
                    row[k] = int(v)
                except ValueError:
                    try:
                        row[k] = float(v)
                    except ValueError:
                        row[k] = v
        out.append(row)
    return out


def result_schema() -> dict:
    return json.loads(resources.files("logical_bell").joinpath("schema/result.schema.json").read_text())


def to_json(kind: str, rows: list[dict], metadata: dict | None = None, estimates: list[dict] | None = None) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "metadata": metadata or {},
        "rows": rows,
    }
    if estimates is not None:
        doc["estimates"] = estimates
    jsonschema.validate(doc, result_schema())
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def to_svg(rows: list[dict], x: str = "value", y: str = "p_L", group: str = "code", title: str = "") -> str:
    """Log-log plot with Wilson error bars when available."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "logical-bell"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name in dict.fromkeys(r[group] for r in rows):
        sel = [r for r in rows if r[group] == name and r[y] and r[y] > 0]
        if not sel:
            continue
        xs = np.array([r[x] for r in sel])
        ys = np.array([r[y] for r in sel])
        if "wilson_low" in sel[0]:
            err = [ys - np.array([r["wilson_low"] for r in sel]), np.array([r["wilson_high"] for r in sel]) - ys]
            ax.errorbar(xs, ys, yerr=err, marker="o", ms=3, capsize=2, label=str(name))
        else:
            ax.plot(xs, ys, marker="o", ms=3, label=str(name))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def export(
    rows: list[dict],
    out_dir: str | Path,
    stem: str,
    fmt: str = "csv",
    kind: str = "sweep",
    metadata: dict | None = None,
    estimates: list[dict] | None = None,
) -> Path:
    if not rows:
        raise ValueError("nothing to export")
    if fmt == "csv":
        text = to_csv(rows)
    elif fmt == "json":
        text = to_json(kind, rows, metadata, estimates)
    elif fmt == "svg":
        y = "p_L" if "p_L" in rows[0] else "rate_hz"
        x = "value" if "value" in rows[0] else "D"
        text = to_svg(rows, x, y, "code" if "code" in rows[0] else "repetitions")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(out_dir) / f"{stem}.{fmt}"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def metadata_for(config: SweepConfig) -> dict:
    meta = asdict(config)
    meta["codes"] = [f"{c.family}:{c.d}" for c in config.codes]
    meta["grid"] = [float(v) for v in config.grid]
    # both counting conventions: memory extractions only, and with the generation round
    meta["memory_extractions"] = config.m1
    meta["iterations_incl_generation"] = config.m1 + 1
    if config.axis == "xi":
        meta["xi_reference"] = dict(XI_REFERENCE)
    return meta
