"""File formats: point-pattern CSV, parameter JSON, and run configuration.

A pattern file is a CSV with header ``component,time`` and one row per
event; the observation horizon lives in a JSON sidecar ``<path>.json``
written alongside (``{"horizon": T}``) or is supplied explicitly by the
caller.  All floats are emitted with shortest round-trip precision.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .estimate import QmleConfig, default_box
from .experiments import McScenario
from .model import ExpKernel, GammaKernel, NbnspParams, ParamBox
from .neldermead import NelderMeadSettings
from .simulate import PointPattern, SimConfig

__all__ = [
    "write_pattern",
    "read_pattern",
    "sidecar_path",
    "parse_params",
    "params_to_dict",
    "RunConfig",
    "parse_run_config",
    "load_run_config",
    "expand_scenarios",
]


def sidecar_path(path: str) -> str:
    return path + ".json"


def write_pattern(pattern: PointPattern, path: str) -> None:
    """CSV rows merged in time order plus a horizon sidecar."""
    rows = [(float(t), 1) for t in pattern.times1]
    rows += [(float(t), 2) for t in pattern.times2]
    rows.sort()
    with open(path, "w") as fh:
        fh.write("component,time\n")
        for t, c in rows:
            fh.write(f"{c},{t!r}\n")
    with open(sidecar_path(path), "w") as fh:
        json.dump({"horizon": pattern.horizon}, fh)
        fh.write("\n")


def read_pattern(path: str, horizon: float | None = None) -> PointPattern:
    """Parse a pattern CSV; errors carry 1-based row numbers.

    The horizon comes from the argument when given, otherwise from the
    sidecar.  Component times are sorted; exact duplicates within a
    component are rejected.
    """
    if horizon is None:
        side = sidecar_path(path)
        if not os.path.exists(side):
            raise DataError(
                f"{path}: no horizon given and sidecar {side} not found"
            )
        try:
            with open(side) as fh:
                doc = json.load(fh)
            horizon = float(doc["horizon"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{side}: bad sidecar: {exc}") from exc
    t1, t2 = [], []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header.strip() != "component,time":
            raise DataError(f"{path}: row 1: expected header 'component,time'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}: row {lineno}: expected 2 fields")
            comp_s, time_s = parts
            if comp_s.strip() not in ("1", "2"):
                raise DataError(
                    f"{path}: row {lineno}: component must be 1 or 2, got {comp_s!r}"
                )
            try:
                t = float(time_s)
            except ValueError:
                raise DataError(
                    f"{path}: row {lineno}: bad time {time_s!r}"
                ) from None
            if not math.isfinite(t) or t < 0.0:
                raise DataError(
                    f"{path}: row {lineno}: time must be finite and nonnegative"
                )
            if t > horizon:
                raise DataError(
                    f"{path}: row {lineno}: time {t!r} exceeds horizon {horizon!r}"
                )
            (t1 if comp_s.strip() == "1" else t2).append(t)
    a1 = np.sort(np.asarray(t1))
    a2 = np.sort(np.asarray(t2))
    for name, arr in (("component 1", a1), ("component 2", a2)):
        if arr.size > 1 and np.any(np.diff(arr) <= 0.0):
            i = int(np.argmax(np.diff(arr) <= 0.0))
            raise DataError(
                f"{path}: {name}: duplicate time {arr[i]!r}"
            )
    return PointPattern(times1=a1, times2=a2, horizon=float(horizon))


# ---------------------------------------------------------------------------
# parameter JSON

def _parse_kernel(doc, where: str):
    if not isinstance(doc, dict):
        raise DataError(f"{where}: kernel must be an object")
    kind = doc.get("type")
    if kind == "gamma":
        _check_keys(doc, {"type", "shape", "rate"}, where)
        return GammaKernel(shape=float(doc["shape"]), rate=float(doc["rate"]))
    if kind == "exp":
        _check_keys(doc, {"type", "rate"}, where)
        return ExpKernel(rate=float(doc["rate"]))
    raise DataError(f"{where}: kernel type must be 'gamma' or 'exp'")


def _kernel_to_dict(kernel) -> dict:
    if isinstance(kernel, GammaKernel):
        return {"type": "gamma", "shape": kernel.shape, "rate": kernel.rate}
    return {"type": "exp", "rate": kernel.rate}


def parse_params(doc: dict, where: str = "params") -> NbnspParams:
    _check_keys(doc, {"a", "kernel1", "kernel2"}, where)
    try:
        return NbnspParams(
            a=float(doc["a"]),
            kernel1=_parse_kernel(doc["kernel1"], f"{where}.kernel1"),
            kernel2=_parse_kernel(doc["kernel2"], f"{where}.kernel2"),
        )
    except KeyError as exc:
        raise DataError(f"{where}: missing key {exc}") from None
    except ValueError as exc:
        raise DataError(f"{where}: {exc}") from None


def params_to_dict(params: NbnspParams) -> dict:
    return {
        "a": params.a,
        "kernel1": _kernel_to_dict(params.kernel1),
        "kernel2": _kernel_to_dict(params.kernel2),
    }


# ---------------------------------------------------------------------------
# run configuration

@dataclass(frozen=True)
class McSettings:
    replications: int
    base_seed: int
    label: str = ""
    horizons: tuple[float, ...] = ()
    sn_coefs: tuple[float, ...] = ()
    r_values: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig | None = None
    qmle: QmleConfig | None = None
    mc: McSettings | None = None


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise DataError(f"{where}: unknown keys {sorted(unknown)}")


def _parse_sim(doc: dict) -> SimConfig:
    allowed = {
        "parent_intensity", "offspring_mean1", "offspring_mean2",
        "kernel1", "kernel2", "noise_intensity1", "noise_intensity2",
        "horizon", "parent_margin",
    }
    _check_keys(doc, allowed, "sim")
    try:
        return SimConfig(
            parent_intensity=float(doc["parent_intensity"]),
            offspring_mean1=float(doc["offspring_mean1"]),
            offspring_mean2=float(doc["offspring_mean2"]),
            kernel1=_parse_kernel(doc["kernel1"], "sim.kernel1"),
            kernel2=_parse_kernel(doc["kernel2"], "sim.kernel2"),
            noise_intensity1=float(doc.get("noise_intensity1", 0.0)),
            noise_intensity2=float(doc.get("noise_intensity2", 0.0)),
            horizon=float(doc["horizon"]),
            parent_margin=(
                float(doc["parent_margin"]) if "parent_margin" in doc else None
            ),
        )
    except KeyError as exc:
        raise DataError(f"sim: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise DataError(f"sim: {exc}") from None


def _parse_optimizer(doc: dict) -> NelderMeadSettings:
    allowed = {"max_iters", "f_tol", "x_tol", "init_step", "restarts"}
    _check_keys(doc, allowed, "qmle.optimizer")
    base = NelderMeadSettings()
    try:
        return NelderMeadSettings(
            max_iters=int(doc.get("max_iters", base.max_iters)),
            f_tol=float(doc.get("f_tol", base.f_tol)),
            x_tol=float(doc.get("x_tol", base.x_tol)),
            init_step=float(doc.get("init_step", base.init_step)),
            restarts=int(doc.get("restarts", base.restarts)),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"qmle.optimizer: {exc}") from None


def _parse_qmle(doc: dict) -> QmleConfig:
    allowed = {
        "r", "min_lag", "model", "box", "init", "optimizer", "intensity_mode",
    }
    _check_keys(doc, allowed, "qmle")
    box = None
    if "box" in doc:
        bdoc = doc["box"]
        _check_keys(bdoc, {"lower", "upper"}, "qmle.box")
        box = ParamBox(
            lower=np.asarray(bdoc["lower"], dtype=float),
            upper=np.asarray(bdoc["upper"], dtype=float),
        )
    elif "model" in doc:
        if doc["model"] not in ("gamma", "exp"):
            raise DataError("qmle.model must be 'gamma' or 'exp'")
        box = default_box(doc["model"])
    init = parse_params(doc["init"], "qmle.init") if "init" in doc else None
    optimizer = (
        _parse_optimizer(doc["optimizer"])
        if "optimizer" in doc
        else NelderMeadSettings()
    )
    try:
        return QmleConfig(
            r=float(doc.get("r", 1.0)),
            box=box,
            init=init,
            optimizer=optimizer,
            min_lag=float(doc.get("min_lag", 0.0)),
            intensity_mode=str(doc.get("intensity_mode", "full")),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"qmle: {exc}") from None


def _parse_mc(doc: dict) -> McSettings:
    allowed = {
        "replications", "base_seed", "label", "horizons", "sn_coefs", "r_values",
    }
    _check_keys(doc, allowed, "mc")
    try:
        return McSettings(
            replications=int(doc["replications"]),
            base_seed=int(doc["base_seed"]),
            label=str(doc.get("label", "")),
            horizons=tuple(float(x) for x in doc.get("horizons", ())),
            sn_coefs=tuple(float(x) for x in doc.get("sn_coefs", ())),
            r_values=tuple(float(x) for x in doc.get("r_values", ())),
        )
    except KeyError as exc:
        raise DataError(f"mc: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise DataError(f"mc: {exc}") from None


def parse_run_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise DataError("run config must be a JSON object")
    _check_keys(doc, {"sim", "qmle", "mc"}, "config")
    sim = _parse_sim(doc["sim"]) if "sim" in doc else None
    qmle = _parse_qmle(doc["qmle"]) if "qmle" in doc else None
    mc = _parse_mc(doc["mc"]) if "mc" in doc else None
    if sim is not None and qmle is not None:
        horizons = mc.horizons if (mc and mc.horizons) else (sim.horizon,)
        r_values = mc.r_values if (mc and mc.r_values) else (qmle.r,)
        for T in horizons:
            for r in r_values:
                if not 2.0 * r < T:
                    raise DataError(
                        f"config: need 2r < horizon, got r={r}, horizon={T}"
                    )
    return RunConfig(sim=sim, qmle=qmle, mc=mc)


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_run_config(doc)


def expand_scenarios(config: RunConfig) -> list[McScenario]:
    """Cross the optional mc sweeps (horizons, signal-to-noise coefficients,
    cutoffs) into concrete scenarios.  An SN coefficient c sets each noise
    intensity to c times the matching signal intensity."""
    if config.sim is None or config.qmle is None or config.mc is None:
        raise DataError("config: mc expansion needs sim, qmle and mc sections")
    mc = config.mc
    horizons = mc.horizons or (config.sim.horizon,)
    sn_coefs = mc.sn_coefs or (None,)
    r_values = mc.r_values or (config.qmle.r,)
    out = []
    for T in horizons:
        for c in sn_coefs:
            for r in r_values:
                sim = replace(config.sim, horizon=float(T))
                if c is not None:
                    lam = sim.parent_intensity
                    sim = replace(
                        sim,
                        noise_intensity1=c * lam * sim.offspring_mean1,
                        noise_intensity2=c * lam * sim.offspring_mean2,
                    )
                qmle = replace(config.qmle, r=float(r))
                bits = [mc.label] if mc.label else []
                if len(horizons) > 1:
                    bits.append(f"T{T:g}")
                if c is not None and len(sn_coefs) > 1:
                    bits.append(f"sn{c:g}")
                if len(r_values) > 1:
                    bits.append(f"r{r:g}")
                out.append(
                    McScenario(
                        sim=sim,
                        qmle=qmle,
                        replications=mc.replications,
                        base_seed=mc.base_seed,
                        label="-".join(bits) or "scenario",
                    )
                )
    return out
