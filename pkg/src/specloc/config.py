"""Flat ``section.key = value`` run configuration with strict parsing."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .asymptotics import StudyConfig
from .effective import OscillatorSpec
from .errors import ConfigurationError, SpeclocError
from .fem import Checker, ConstantMatrix, Laminate, QField
from .geometry import CellGeometry, DomainSpec

__all__ = ["RunConfig", "parse_config", "load_config"]


def _number(text: str) -> float:
    # accepts "0.125", "1e-8" and exact fractions like "1/8"
    return float(Fraction(text)) if "/" in text else float(text)


def _numbers(text: str) -> list[float]:
    return [_number(t.strip()) for t in text.split(",") if t.strip()]


def _integer(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _integers(text: str) -> list[int]:
    return [_integer(t.strip()) for t in text.split(",") if t.strip()]


def _words(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


# key -> (parser, default)
_SCHEMA = {
    "geometry.L": (_number, 1.0),
    "geometry.eps": (_numbers, [1 / 2, 1 / 3, 1 / 4, 1 / 6, 1 / 8]),
    "geometry.hole_radius": (_number, 0.25),
    "geometry.n_seg": (_integer, 64),
    "geometry.h": (_number, 1 / 16),
    "coeff.a": (_choice("identity", "constant", "laminate", "checker"), "identity"),
    "coeff.a11": (_number, 1.0),
    "coeff.a12": (_number, 0.0),
    "coeff.a22": (_number, 1.0),
    "coeff.values": (_numbers, [1.0, 4.0]),
    "coeff.breaks": (_numbers, [0.5]),
    "coeff.q0": (_number, 1.0),
    "coeff.h11": (_number, 2.0),
    "coeff.h12": (_number, 0.0),
    "coeff.h22": (_number, 4.0),
    "coeff.c3": (_number, 0.0),
    "coeff.bump_radius": (_number, 0.5),
    "solver.k": (_integer, 6),
    "solver.tol": (_number, 1e-8),
    "solver.shift_factor": (_number, 0.9),
    "solver.block_size": (_integer, 4),
    "solver.hole_condition": (_choice("robin", "neumann", "dirichlet"), "robin"),
    "solver.seed": (_integer, 0),
    "study.j": (_integers, [1]),
    "study.gamma": (_number, 0.5),
    "effective.a11": (_number, None),
    "effective.a12": (_number, None),
    "effective.a22": (_number, None),
    "effective.q11": (_number, None),
    "effective.q12": (_number, None),
    "effective.q22": (_number, None),
    "effective.box": (_number, None),
    "effective.h": (_number, 1 / 16),
    "effective.k": (_integer, 6),
    "output.dir": (str, "."),
    "output.formats": (_words, ["csv", "json"]),
}

_EFFECTIVE_MATRIX_KEYS = ("a11", "a12", "a22", "q11", "q12", "q22")


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in _SCHEMA.items()})
    source: str = "<defaults>"

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def cell(self) -> CellGeometry:
        return CellGeometry(self["geometry.hole_radius"], self["geometry.n_seg"], self["geometry.h"])

    @property
    def eps_list(self) -> list[float]:
        return list(self["geometry.eps"])

    def domain(self, eps: float) -> DomainSpec:
        return DomainSpec(eps, self["geometry.L"], self.cell)

    @property
    def a(self):
        kind = self["coeff.a"]
        if kind == "identity":
            return ConstantMatrix()
        if kind == "constant":
            m = ((self["coeff.a11"], self["coeff.a12"]), (self["coeff.a12"], self["coeff.a22"]))
            return ConstantMatrix(m)
        if kind == "laminate":
            return Laminate(tuple(self["coeff.values"]), tuple(self["coeff.breaks"]))
        return Checker(tuple(self["coeff.values"][:2]))

    @property
    def q(self) -> QField:
        H = ((self["coeff.h11"], self["coeff.h12"]), (self["coeff.h12"], self["coeff.h22"]))
        return QField(self["coeff.q0"], H, self["coeff.c3"], self["coeff.bump_radius"])

    def oscillator_override(self) -> OscillatorSpec | None:
        """Directly specified ``(A, Q)``, or None when they come from the cell problem."""
        given = {k: self[f"effective.{k}"] for k in _EFFECTIVE_MATRIX_KEYS}
        if all(v is None for v in given.values()):
            return None
        missing = [k for k in ("a11", "a22", "q11", "q22") if given[k] is None]
        if missing:
            raise ConfigurationError(f"{self.source}: effective block needs {', '.join('effective.' + m for m in missing)}")
        a12 = given["a12"] or 0.0
        q12 = given["q12"] or 0.0
        A = np.array([[given["a11"], a12], [a12, given["a22"]]])
        Q = np.array([[given["q11"], q12], [q12, given["q22"]]])
        return OscillatorSpec(A, Q)

    def study(self, seed: int | None = None) -> StudyConfig:
        return StudyConfig(
            half_width=self["geometry.L"],
            hole_radius=self["geometry.hole_radius"],
            n_seg=self["geometry.n_seg"],
            h=self["geometry.h"],
            a=self.a,
            q=self.q,
            k=self["solver.k"],
            tol=self["solver.tol"],
            shift_factor=self["solver.shift_factor"],
            block_size=self["solver.block_size"],
            gamma=self["study.gamma"],
            seed=self["solver.seed"] if seed is None else seed,
        )

    def validate(self) -> None:
        """Re-run the cross-field checks of the domain and coefficient types."""
        self.cell
        for e in self.eps_list:
            self.domain(e)
        if not self.eps_list:
            raise ConfigurationError("geometry.eps is empty")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigurationError("geometry.eps must be strictly decreasing")
        self.a
        self.q
        self.oscillator_override()
        if min(self["study.j"]) < 1:
            raise ConfigurationError("study.j indices are 1-based")
        unknown = set(self["output.formats"]) - {"csv", "json"}
        if unknown:
            raise ConfigurationError(f"unsupported output formats {sorted(unknown)}")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Every problem is reported as ``source:line: message`` and raised before
    any computation starts.
    """
    cfg = RunConfig(source=source)
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in lines:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        parser, _ = _SCHEMA[key]
        try:
            cfg.values[key] = parser(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
        lines[key] = lineno
    try:
        cfg.validate()
    except SpeclocError as exc:
        # point at the line most likely responsible when we can tell
        hint = next((f":{n}" for k, n in lines.items() if k.split(".")[-1] in str(exc)), "")
        raise type(exc)(f"{source}{hint}: {exc}") from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
