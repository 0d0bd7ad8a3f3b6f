"""Configuration loading, time grids and CSV output."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from .block_operator import BurgersMaterial
from .tensor_core import ElasticTensor4, kelvin_size, voigt_to_kelvin

THREADS_ENV = "BURGERS_RELAX_THREADS"


class ConfigError(ValueError):
    pass


def max_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw else max(1, os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")


def _schema() -> dict:
    return json.loads(resources.files("burgers_relax").joinpath("config.schema.json").read_text())


@dataclass
class ModelConfig:
    dim: int
    rho: float
    tensors: list
    viscosities: list
    regions: list = field(default_factory=list)
    run: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.tensors) - 1

    def material(self) -> BurgersMaterial:
        return BurgersMaterial(self.dim, self.rho, self.tensors, self.viscosities)

    def region_materials(self):
        """Materials and box list for heterogeneous finite element runs."""
        mats = [self.material()]
        boxes = []
        for reg in self.regions:
            mats.append(BurgersMaterial(self.dim, reg["rho"], reg["tensors"], reg["viscosities"]))
            boxes.append(reg["box"])
        return mats, boxes

    def tolerance(self, name: str, default: float) -> float:
        return float(self.run.get("tolerances", {}).get(name, default))


def _tensor(spec: dict, dim: int, notation: str, where: str) -> ElasticTensor4:
    k = kelvin_size(dim)
    if spec["type"] == "isotropic":
        lam, mu = float(spec["lambda"]), float(spec["mu"])
        mat = 2.0 * mu * np.eye(k)
        mat[:dim, :dim] += lam
        return ElasticTensor4(dim, mat)
    mat = np.asarray(spec["matrix"], dtype=float)
    if mat.ndim == 1:
        if mat.size != k * k:
            raise ConfigError(f"config field '{where}/matrix': expected {k * k} row-major entries, got {mat.size}")
        mat = mat.reshape(k, k)
    if mat.shape != (k, k):
        raise ConfigError(f"config field '{where}/matrix': expected a {k}x{k} matrix, got {mat.shape}")
    if notation == "voigt":
        mat = voigt_to_kelvin(mat)
    return ElasticTensor4(dim, mat)


def parse_config(data: dict, notation: Optional[str] = None) -> ModelConfig:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {exc.message}") from None
    dim = data["dim"]
    notation = notation or data.get("notation", "kelvin")
    if len(data["materials"]) != len(data["viscosities"]):
        raise ConfigError("config field 'viscosities': need one viscosity per material")
    if "n" in data and data["n"] != len(data["materials"]) - 1:
        raise ConfigError(f"config field 'n': {data['n']} does not match {len(data['materials'])} materials")
    tensors = [_tensor(s, dim, notation, f"materials/{i}") for i, s in enumerate(data["materials"])]
    regions = []
    for r, reg in enumerate(data.get("regions", [])):
        if len(reg["materials"]) != len(reg["viscosities"]):
            raise ConfigError(f"config field 'regions/{r}/viscosities': need one viscosity per material")
        regions.append({
            "box": [float(v) for v in reg["box"]],
            "rho": float(reg.get("rho", data.get("rho", 1.0))),
            "tensors": [_tensor(s, dim, notation, f"regions/{r}/materials/{i}") for i, s in enumerate(reg["materials"])],
            "viscosities": [float(v) for v in reg["viscosities"]],
        })
    return ModelConfig(dim, float(data.get("rho", 1.0)), tensors, [float(v) for v in data["viscosities"]],
                       regions, dict(data.get("run", {})))


def load_config(path, notation: Optional[str] = None) -> ModelConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data, notation)


def parse_tgrid(text: str) -> np.ndarray:
    """'start:stop:count[:log]' -> array of times."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ConfigError(f"time grid must look like start:stop:count[:log], got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"time grid must look like start:stop:count[:log], got {text!r}") from None
    if count < 1:
        raise ConfigError("time grid needs at least one point")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise ConfigError("log-spaced time grid needs positive endpoints")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(fh, header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def tensor_labels(dim: int, prefix: str = "G") -> list:
    from .constitutive import kelvin_labels

    labs = kelvin_labels(dim)
    return [f"{prefix}_{a}_{b}" for a in labs for b in labs]


def region_groups(centroids: np.ndarray, boxes) -> np.ndarray:
    """Material index per element: later boxes override earlier ones, 0 outside all boxes."""
    groups = np.zeros(len(centroids), dtype=np.intp)
    for i, (x0, x1, y0, y1) in enumerate(boxes, start=1):
        inside = (centroids[:, 0] >= x0) & (centroids[:, 0] <= x1) & (centroids[:, 1] >= y0) & (centroids[:, 1] <= y1)
        groups[inside] = i
    return groups
