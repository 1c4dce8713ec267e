"""Run configuration: a YAML file of Table I parameters plus sweep settings.

Every key is optional; missing keys take the defaults below.  Rates in the
``cavity`` section are given in MHz and converted to rad/s.
"""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .codes import CodeSpec
from .noise import PhysicalParams
from .photonics import TWO_PI_MHZ, CavityParams, QNDMSetting
from .protocols import NoiseSpec, ProtocolConfig
from .stabilizer.binding import ConfigurationError

DEFAULTS: dict = {
    "seed": 2024,
    "gates": {"t_H": 150e-6, "t_CX": 970e-6, "t_M": 130e-6, "p_err_H": 2.1e-4, "p_err_CX": 8.3e-3, "p_err_M": 7.7e-3},
    "memory": {"T1": 3.0, "T2": 0.5},
    "link": {
        "t_rangeQ": 400e-6,
        "t_transfer": 100e-6,
        "t_qndm": 10e-6,
        "t_readout": 1e-6,
        "f_source": 33e6,
        "tau_protocol1": 0.70,
        "tau_protocol2": 0.17,
        "r_glass": 1.44,
        "eta_conv": 0.9,
        "p_trs": 0.5,
        "p_dark": 0.03,
        "qndm_efficiency": 0.855,
        "qndm_mode": "lumped",
        "aux_pairs": "per-cycle",
    },
    "cavity": {
        "g_MHz": 25.0,
        "gamma_MHz": 1.0,
        "kappa_MHz": 27.8,
        "kappa_r_fraction": 4.0 / 4.3,
        "kappa_t_MHz": 1.2,
        "kappa_m_MHz": 1.2,
        "mu_abs": 0.99,
        "mu_phase": -0.03,
        "Delta_a_MHz": 0.01,
        "Delta_c_MHz": 0.01,
        "alpha": 0.3,
    },
    "sweep": {
        "p_grid": [float(v) for v in np.logspace(-4, -2, 8)],
        "xi_grid": [float(v) for v in np.logspace(-1, 1, 7)],
        "shots": 100_000,
        "codes": ["RotatedSurface:3", "RotatedSurface:5", "PlanarSurface:3", "BaconShor:3", "BaconShor:5"],
        "m1": 1,
        "batch": 65536,
        "workers": 1,
    },
    "rate": {
        "code": "RotatedSurface:3",
        "distances": [1, 5, 10, 20, 30, 40, 50, 60, 70, 80],
        "trials": 2000,
        "repetitions": 5,
    },
    "protocol": {"number": 2, "D": 1.0, "m1": 1},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigurationError(f"unknown configuration key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigurationError(f"{path + k} must be a mapping")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def config_schema() -> dict:
    return json.loads(resources.files("logical_bell").joinpath("schema/config.schema.json").read_text())


def load_config(path: str | Path | None = None) -> dict:
    """Defaults merged with the YAML file at ``path``; validated against the schema."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a mapping")
    cfg = _merge(DEFAULTS, data)
    try:
        jsonschema.validate(cfg, config_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid config: {exc.message}") from exc
    return cfg


def parse_code(text: str) -> CodeSpec:
    family, _, d = text.partition(":")
    try:
        return CodeSpec(family, int(d))
    except ValueError as exc:
        raise ConfigurationError(f"code must look like Family:d, got {text!r}") from exc


def physical_params(cfg: dict) -> PhysicalParams:
    return PhysicalParams(**cfg["memory"], **cfg["gates"])


def cavity_params(cfg: dict) -> CavityParams:
    c = cfg["cavity"]
    return CavityParams(
        g=c["g_MHz"] * TWO_PI_MHZ,
        gamma=c["gamma_MHz"] * TWO_PI_MHZ,
        kappa=c["kappa_MHz"] * TWO_PI_MHZ,
        kappa_r=c["kappa_r_fraction"] * c["kappa_MHz"] * TWO_PI_MHZ,
        kappa_t=c["kappa_t_MHz"] * TWO_PI_MHZ,
        kappa_m=c["kappa_m_MHz"] * TWO_PI_MHZ,
        mu_FC=c["mu_abs"] * np.exp(1j * c["mu_phase"]),
        Delta_a=c["Delta_a_MHz"] * TWO_PI_MHZ,
        Delta_c=c["Delta_c_MHz"] * TWO_PI_MHZ,
        alpha=c["alpha"],
    )


def protocol_config(cfg: dict, protocol: int | None = None, code: CodeSpec | None = None, D: float | None = None) -> ProtocolConfig:
    link, proto = cfg["link"], cfg["protocol"]
    number = protocol or proto["number"]
    return ProtocolConfig(
        protocol=number,
        code=code or parse_code(cfg["rate"]["code"]),
        D=proto["D"] if D is None else D,
        m1=proto["m1"],
        t_rangeQ=link["t_rangeQ"],
        t_transfer=link["t_transfer"],
        t_qndm=link["t_qndm"],
        t_readout=link["t_readout"],
        f_source=link["f_source"],
        tau=link["tau_protocol1"] if number == 1 else link["tau_protocol2"],
        r_glass=link["r_glass"],
        eta_conv=link["eta_conv"],
        p_trs=link["p_trs"],
        p_dark=link["p_dark"],
        qndm=QNDMSetting(link["qndm_mode"], link["qndm_efficiency"], cavity_params(cfg)),
        noise=NoiseSpec("physical", physical=physical_params(cfg)),
        aux_pairs=link["aux_pairs"],
        seed=cfg["seed"],
    )


def dump_defaults() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
