"""Scenario documents: schema, defaults and construction of runnable objects."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .errors import GvfError, ValidationError
from .field import ConventionalField, GvfParams, SingularityFreeField
from .paths import AffinePose, Reparameterization, apply_affine, catalog_make, implicit_make
from .sim import ExtendedDynamics, SingleIntegrator, Unicycle, disturbance

MODELS = ("single_integrator", "single_integrator_normalized", "extended", "unicycle")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "name": {"type": "string"},
    "mode": {"enum": ["simulate", "scan", "sweep"]},
    "seed": {"type": "integer", "minimum": 0},
    "path": _obj({
        "type": {"type": "string"},
        "params": {"type": "object"},
        "affine": _obj({"alpha": _num, "offset": {**_vec, "minItems": 2, "maxItems": 3}}),
        "beta": _pos,
        "L": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    }, required=["type"]),
    "field": _obj({
        "kind": {"enum": ["singularity_free", "conventional"]},
        "k": {"type": "array", "items": _pos, "minItems": 1},
        "orientation": {"enum": [1, -1]},
        "k_theta": _pos,
    }),
    "model": {"enum": list(MODELS)},
    "initial": _obj({
        "position": _vec,
        "theta": _num,
        "w": _num,
        "heading_offset": _num,
    }),
    "speed": _pos,
    "sim": _obj({
        "dt": _pos,
        "T": _pos,
        "method": {"enum": ["euler", "rk4"]},
        "record_every": {"type": "integer", "minimum": 1},
    }),
    "wind": _obj({
        "kind": {"enum": ["none", "constant", "decaying", "noise"]},
        "vector": {**_vec, "minItems": 3, "maxItems": 3},
        "lambda": {"type": "number", "minimum": 0},
        "radius": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "hold": _pos,
    }),
    "outputs": _obj({"csv": {"type": "boolean"}, "svg": {"type": "boolean"}}),
    "scan": _obj({
        "lower": _vec,
        "upper": _vec,
        "grid": {"type": "integer", "minimum": 8},
    }, required=["lower", "upper"]),
    "sweep": _obj({
        "count": {"type": "integer", "minimum": 1},
        "lower": _vec,
        "upper": _vec,
        "include": {"type": "array", "items": _vec},
        "converge_tol": _pos,
    }, required=["lower", "upper"]),
}, required=["path"])

DEFAULTS = {
    "mode": "simulate",
    "seed": 0,
    "field": {"kind": "singularity_free", "k": [1.0], "orientation": 1, "k_theta": 1.0},
    "model": "single_integrator",
    "initial": {"theta": 0.0, "w": 0.0},
    "speed": 12.0,
    "sim": {"dt": 0.02, "T": 600.0, "method": "rk4", "record_every": 1},
    "wind": {"kind": "none"},
    "outputs": {"csv": True, "svg": True},
}

_VALIDATOR = Draft202012Validator(SCHEMA)


def _where(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1]
        parts.append(missing)
    elif error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        if extra:
            parts.append(extra[0])
    return ".".join(parts) or "<root>"


def validate(doc) -> None:
    """Raise :class:`ValidationError` naming the first offending field."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if errors:
        err = errors[0]
        raise ValidationError(f"{_where(err)}: {err.message}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class Scenario:
    """A validated scenario with defaults filled in."""

    doc: dict

    @classmethod
    def from_dict(cls, doc: dict, name: str = "scenario") -> "Scenario":
        validate(doc)
        full = _merge(DEFAULTS, doc)
        full.setdefault("name", name)
        full["path"].setdefault("params", {})
        full["path"].setdefault("beta", 1.0)
        full["path"].setdefault("L", 1.0)
        sim = full["sim"]
        if sim["T"] < sim["dt"]:
            raise ValidationError(f"sim.T: must be >= sim.dt ({sim['dt']}), got {sim['T']}")
        if full["mode"] in ("scan", "sweep") and full["mode"] not in full:
            raise ValidationError(f"{full['mode']}: section required for mode {full['mode']!r}")
        scn = cls(full)
        scn._check()
        return scn

    @classmethod
    def load(cls, path) -> "Scenario":
        """Read a JSON scenario file.  OSError propagates; bad content raises ValidationError."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc, name=path.stem)

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2) + "\n"

    # ------------------------------------------------------------------
    # accessors

    @property
    def name(self) -> str:
        return self.doc["name"]

    @property
    def mode(self) -> str:
        return self.doc["mode"]

    @property
    def model(self) -> str:
        return self.doc["model"]

    @property
    def sim(self) -> dict:
        return self.doc["sim"]

    @property
    def outputs(self) -> dict:
        return self.doc["outputs"]

    # ------------------------------------------------------------------
    # builders

    def _check(self) -> None:
        # build once so parameter problems surface as input errors
        try:
            fld = self.build_field()
            if self.model == "unicycle" and fld.dim != 4:
                raise ValidationError("model: unicycle needs a singularity_free field on a 3D path")
            if self.model == "extended" and not fld.has_virtual:
                raise ValidationError("model: extended dynamics need a singularity_free field")
            if self.mode == "simulate":
                self.initial_state()
            self.build_dynamics(fld)
            for key in ("scan", "sweep"):
                if key in self.doc:
                    sec = self.doc[key]
                    if len(sec["lower"]) != fld.dim or len(sec["upper"]) != fld.dim:
                        raise ValidationError(f"{key}.lower/upper: need {fld.dim} entries")
                    if not all(a < b for a, b in zip(sec["lower"], sec["upper"])):
                        raise ValidationError(f"{key}.upper: must exceed lower on every axis")
                    for j, p in enumerate(sec.get("include", [])):
                        if len(p) != fld.dim:
                            raise ValidationError(f"{key}.include.{j}: need {fld.dim} entries")
        except ValidationError:
            raise
        except (GvfError, ValueError, KeyError) as exc:
            raise ValidationError(f"{self._blame(exc)}: {exc}") from None

    @staticmethod
    def _blame(exc) -> str:
        text = str(exc).lower()
        for key in ("wind", "initial", "field", "speed"):
            if key in text:
                return key
        if "disturbance" in text or "decay" in text:
            return "wind"
        if "gain" in text or "orientation" in text:
            return "field"
        return "path"

    def build_params(self) -> GvfParams:
        f = self.doc["field"]
        return GvfParams(tuple(f["k"]), int(f["orientation"]), float(f["k_theta"]))

    def build_field(self):
        p, f = self.doc["path"], self.doc["field"]
        params = self.build_params()
        if f["kind"] == "conventional":
            return ConventionalField(implicit_make(p["type"], p["params"]), params)
        path = catalog_make(p["type"], p["params"])
        if "affine" in p:
            aff = p["affine"]
            offset = tuple(aff.get("offset", (0.0,) * path.n))
            path = apply_affine(path, AffinePose(float(aff.get("alpha", 0.0)), offset))
        return SingularityFreeField(path, params, float(p["L"]), Reparameterization(float(p["beta"])))

    def build_wind(self):
        return disturbance(self.doc["wind"])

    def build_dynamics(self, field=None):
        field = field or self.build_field()
        wind = self.build_wind()
        model = self.model
        if model == "single_integrator":
            return SingleIntegrator(field, wind=wind)
        if model == "single_integrator_normalized":
            return SingleIntegrator(field, float(self.doc["speed"]), True, wind)
        if model == "extended":
            return ExtendedDynamics(field, wind=wind)
        return Unicycle(field, float(self.doc["speed"]), float(self.doc["field"]["k_theta"]), wind)

    def start_point(self, position=None, field=None) -> np.ndarray:
        """Field-space starting point ``xi`` (physical position plus ``w`` when lifted)."""
        field = field or self.build_field()
        ini = self.doc["initial"]
        pos = position if position is not None else ini.get("position")
        if pos is None:
            raise ValidationError("initial.position: required for mode 'simulate'")
        pos = [float(v) for v in pos]
        need = field.n_physical
        if field.has_virtual and len(pos) == need + 1:
            return np.array(pos)
        if len(pos) != need:
            raise ValidationError(f"initial.position: need {need} coordinates, got {len(pos)}")
        return np.array(pos + ([float(ini["w"])] if field.has_virtual else []))

    def initial_state(self, position=None, dynamics=None) -> np.ndarray:
        dyn = dynamics or self.build_dynamics()
        xi = self.start_point(position, dyn.field)
        if isinstance(dyn, Unicycle):
            ini = self.doc["initial"]
            if "heading_offset" in ini:
                theta = dyn.aligned_heading(xi[:3], xi[3], float(ini["heading_offset"]))
            else:
                theta = float(ini["theta"])
            if not math.isfinite(theta):
                raise ValidationError("initial.theta: must be finite")
            return dyn.initial_state(xi[:3], theta, xi[3])
        if isinstance(dyn, ExtendedDynamics):
            return dyn.initial_state(xi)
        return xi


def load_scenario(path) -> Scenario:
    return Scenario.load(path)
