"""Problem files: schema, loading, and deterministic JSON/CSV serialization.

A problem JSON pins down a design instance:

    {
      "media":   {"A1": [[...]], "A2": [[...]]}            (matrix form)
               | {"n1": {norm}, "n2": {norm}}              (norm form)
               | {"material1": {"eps":..,"mu":..}, "material2": {...}},
      "source":  {"axis": [..], "angle": rad, "node_count": int,
                  "density": "uniform" | "cosine"},
      "targets": [{"m": [..], "g": positive}, ...],
      "b1": positive, "tol": positive, "seed": int
    }

Target masses are relative: they are rescaled to the quadrature total on
load.  All emitted numbers carry 17 significant digits so identical inputs
produce byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import format_float
from .norms import MediumPair, Norm
from .solver import SourceDensity, TargetMeasure

__all__ = ["ProblemSpec", "load_problem", "parse_pair", "dumps17",
           "write_json", "write_csv"]


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def dumps17(obj) -> str:
    """Compact JSON with floats at 17 significant digits, key order kept."""
    obj = _to_jsonable(obj)

    def enc(o):
        if isinstance(o, dict):
            return "{" + ",".join(json.dumps(k) + ":" + enc(v)
                                  for k, v in o.items()) + "}"
        if isinstance(o, (list, tuple)):
            return "[" + ",".join(enc(v) for v in o) + "]"
        if isinstance(o, bool) or o is None or isinstance(o, (int, str)):
            return json.dumps(o)
        if isinstance(o, float):
            return format_float(o)
        raise ValidationError(f"cannot serialize {type(o)!r}")

    return enc(obj)


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps17(obj) + "\n")


def write_csv(path, header, rows) -> None:
    """Plain CSV, floats at 17 significant digits."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return format_float(float(v))
        return str(v)

    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def parse_pair(media: dict, seed: int = 0) -> MediumPair:
    """Build the medium pair from any of the three accepted media forms."""
    if not isinstance(media, dict):
        raise ValidationError("'media' must be an object")
    if "A1" in media and "A2" in media:
        return MediumPair(Norm.ellipsoidal(np.asarray(media["A1"], float)),
                          Norm.ellipsoidal(np.asarray(media["A2"], float)),
                          seed=seed)
    if "n1" in media and "n2" in media:
        return MediumPair(Norm.from_json_dict(media["n1"]),
                          Norm.from_json_dict(media["n2"]), seed=seed)
    if "material1" in media and "material2" in media:
        from .fresnel import FresnelMaterial, pair_kappa_from_materials

        return pair_kappa_from_materials(
            FresnelMaterial.from_json_dict(media["material1"]),
            FresnelMaterial.from_json_dict(media["material2"]))
    raise ValidationError(
        "'media' must provide A1/A2, n1/n2, or material1/material2")


@dataclass(frozen=True)
class ProblemSpec:
    pair: MediumPair
    axis: np.ndarray
    angle: float
    node_count: int
    density: str
    target_dirs: np.ndarray
    target_weights: np.ndarray  # relative masses, rescaled on build
    b1: float
    tol: float
    seed: int

    def build(self) -> tuple[MediumPair, SourceDensity, TargetMeasure]:
        src = SourceDensity.from_cap(self.pair.n1, self.axis, self.angle,
                                     self.node_count, self.density)
        g = self.target_weights * (src.total / float(np.sum(self.target_weights)))
        tgt = TargetMeasure.of(self.pair.n2, self.target_dirs, g)
        return self.pair, src, tgt


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ValidationError(f"missing '{key}' in {where}")
    return d[key]


def load_problem(source) -> ProblemSpec:
    """Parse and validate a problem from a path, file object, or dict."""
    if isinstance(source, dict):
        raw = source
    elif hasattr(source, "read"):
        raw = json.load(source)
    else:
        with open(source) as fh:
            raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValidationError("problem file must hold a JSON object")

    seed = int(raw.get("seed", 0))
    media = raw.get("media", raw.get("pair"))
    if media is None:
        raise ValidationError("missing 'media' (or 'pair') in problem")
    pair = parse_pair(media, seed=seed)
    s = _require(raw, "source", "problem")
    axis = np.asarray(_require(s, "axis", "source"), dtype=float)
    if axis.shape != (pair.dim,):
        raise ValidationError("source axis dimension does not match the media")
    angle = float(_require(s, "angle", "source"))
    node_count = int(_require(s, "node_count", "source"))
    density = str(s.get("density", "uniform"))

    targets = _require(raw, "targets", "problem")
    if not targets:
        raise ValidationError("at least one target is required")
    dirs, gs = [], []
    for k, t in enumerate(targets):
        m = np.asarray(_require(t, "m", f"target {k}"), dtype=float)
        if m.shape != (pair.dim,):
            raise ValidationError(f"target {k} direction has wrong dimension")
        g = float(_require(t, "g", f"target {k}"))
        if g <= 0.0:
            raise ValidationError(f"target {k} mass must be positive")
        dirs.append(m)
        gs.append(g)

    b1 = float(_require(raw, "b1", "problem"))
    tol = float(raw.get("tol", 1e-3))
    if b1 <= 0.0 or tol <= 0.0:
        raise ValidationError("b1 and tol must be positive")
    return ProblemSpec(pair=pair, axis=axis, angle=angle,
                       node_count=node_count, density=density,
                       target_dirs=np.asarray(dirs), target_weights=np.asarray(gs),
                       b1=b1, tol=tol, seed=seed)
