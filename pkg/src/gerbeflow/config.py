"""Experiment configuration files.

The format is INI-like: ``[section]`` headers, ``key = value`` lines and
``#`` or ``;`` comments. Every problem is reported with its line number.
A hand-written reader is used because the standard ``configparser`` does
not keep line numbers for keys.

Recognised sections and keys::

    [grid]           n, N, lengths
    [evolution]      dt, steps, lambda, record_every, filter_modes
    [constraints2d]  c, k, F, phi
    [io]             out
    [seed]           seed

``N`` and ``lengths`` take one value (used on every axis) or one per axis.
``phi`` is a sum of terms ``a*sin(k*x)`` / ``a*cos(k*y)`` (meaning
``a sin(2 pi k x / L_x)``) and optional constants.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConfigError", "PhiExpression", "ExperimentConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the line or section."""


_SCHEMA = {
    "grid": {"n", "N", "lengths"},
    "evolution": {"dt", "steps", "lambda", "record_every", "filter_modes"},
    "constraints2d": {"c", "k", "F", "phi"},
    "io": {"out"},
    "seed": {"seed"},
}

_AXES = {"x": 0, "y": 1, "z": 2}
_NUM = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_TRIG = re.compile(
    rf"^(?:(?P<amp>{_NUM})\s*\*\s*)?(?P<fn>sin|cos)\s*\(\s*(?:(?P<k>[0-9]+)\s*\*\s*)?(?P<var>[xyz])\s*\)$")
_CONST = re.compile(rf"^{_NUM}$")


@dataclass(frozen=True)
class PhiExpression:
    """Whitelisted trigonometric sum ``sum a sin/cos(2 pi k x_axis / L_axis) + const``."""

    text: str
    terms: tuple
    constant: float = 0.0

    @classmethod
    def parse(cls, text: str, where: str = "phi") -> "PhiExpression":
        src = text.strip()
        if not src:
            raise ConfigError(f"{where}: empty expression")
        # split before every sign that is not an exponent sign
        pieces = [p for p in re.split(r"(?<![0-9][eE])(?=[+-])", src.replace(" ", "")) if p]
        terms = []
        const = 0.0
        for piece in pieces:
            sign = -1.0 if piece.startswith("-") else 1.0
            body = piece.lstrip("+-")
            if _CONST.match(body):
                const += sign * float(body)
                continue
            m = _TRIG.match(body)
            if not m:
                raise ConfigError(f"{where}: term {piece!r} is not a*sin(k*x) or a*cos(k*x) form")
            amp = sign * float(m.group("amp") or 1.0)
            k = int(m.group("k") or 1)
            terms.append((amp, m.group("fn"), k, _AXES[m.group("var")]))
        return cls(text.strip(), tuple(terms), const)

    @property
    def is_constant(self) -> bool:
        return all(a == 0.0 for a, *_ in self.terms)

    def max_axis(self) -> int:
        return max((ax for *_, ax in self.terms), default=-1)

    def evaluate(self, grid):
        """Values on ``grid`` (a Grid or any lattice exposing ``coords``/``lengths``)."""
        xs = grid.coords()
        out = np.full(grid.shape, self.constant)
        for amp, fn, k, ax in self.terms:
            if ax >= len(xs):
                raise ConfigError(f"phi uses axis {'xyz'[ax]} but the grid has {len(xs)} axes")
            arg = 2.0 * math.pi * k * xs[ax] / grid.lengths[ax]
            out = out + amp * (np.sin(arg) if fn == "sin" else np.cos(arg))
        return out


@dataclass
class ExperimentConfig:
    path: str = "<string>"
    n: int = 2
    N: tuple = (64, 64)
    lengths: tuple = (1.0, 1.0)
    dt: float | None = None
    steps: int = 0
    lam: float = 0.0
    record_every: int = 1
    filter_modes: int | None = None
    c: float = 1.0
    k: float = 0.0
    F: str = "zero"
    phi: PhiExpression = field(default_factory=lambda: PhiExpression.parse("0.3*sin(1*x)"))
    out: str = "out"
    seed: int = 0
    sections: tuple = ()

    def grid(self):
        from .grid import Grid
        return Grid(self.N, self.lengths)

    def time_step(self):
        return self.dt if self.dt is not None else 0.25 * min(L / N for L, N in zip(self.lengths, self.N))


def _tokens(lines):
    section = None
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {no}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            yield no, "section", section, None
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"line {no}: key {key!r} appears before any section")
        if not key:
            raise ConfigError(f"line {no}: empty key")
        yield no, "key", section, (key, value)


def _number(value, kind, no, key):
    try:
        v = kind(value)
    except ValueError:
        raise ConfigError(f"line {no}: {key} must be {'an integer' if kind is int else 'a number'}, "
                          f"got {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"line {no}: {key} must be finite")
    return v


def _numbers(value, kind, no, key):
    parts = [p for p in re.split(r"[,\s]+", value.strip()) if p]
    if not parts:
        raise ConfigError(f"line {no}: {key} needs a value")
    return tuple(_number(p, kind, no, key) for p in parts)


def parse_config(text: str, path: str = "<string>", required=("grid",)) -> ExperimentConfig:
    """Parse configuration text; ``required`` lists sections that must appear."""
    cfg = ExperimentConfig(path=path)
    seen_sections = {}
    seen_keys = {}
    raw = {}
    for no, kind, section, item in _tokens(text.splitlines()):
        if kind == "section":
            if section not in _SCHEMA:
                raise ConfigError(f"line {no}: unknown section [{section}]")
            if section in seen_sections:
                raise ConfigError(f"line {no}: section [{section}] repeated (first at line {seen_sections[section]})")
            seen_sections[section] = no
            continue
        key, value = item
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {no}: unknown key {key!r} in [{section}]; "
                              f"allowed: {', '.join(sorted(_SCHEMA[section]))}")
        if (section, key) in seen_keys:
            raise ConfigError(f"line {no}: key {key!r} repeated in [{section}]")
        seen_keys[(section, key)] = no
        raw[(section, key)] = (value, no)
    for sec in required:
        if sec not in seen_sections:
            raise ConfigError(f"missing section [{sec}]")
    cfg.sections = tuple(seen_sections)

    def get(section, key):
        return raw.get((section, key), (None, None))

    value, no = get("grid", "n")
    if value is None and "grid" in seen_sections:
        raise ConfigError(f"[grid] at line {seen_sections['grid']}: missing key 'n'")
    if value is not None:
        cfg.n = _number(value, int, no, "n")
        if cfg.n not in (1, 2, 3):
            raise ConfigError(f"line {no}: n must be 1, 2 or 3, got {cfg.n}")
    for key, kind in (("N", int), ("lengths", float)):
        value, no = get("grid", key)
        if value is None:
            if key == "N" and "grid" in seen_sections:
                raise ConfigError(f"[grid] at line {seen_sections['grid']}: missing key 'N'")
            vals = (1.0,) if key == "lengths" else cfg.N[:1]
        else:
            vals = _numbers(value, kind, no, key)
        if len(vals) == 1:
            vals = vals * cfg.n
        if len(vals) != cfg.n:
            raise ConfigError(f"line {no}: {key} needs 1 or {cfg.n} values, got {len(vals)}")
        if key == "N" and any(v < 8 or v % 2 for v in vals):
            raise ConfigError(f"line {no}: every N must be even and >= 8, got {list(vals)}")
        if key == "lengths" and any(v <= 0 for v in vals):
            raise ConfigError(f"line {no}: lengths must be positive")
        setattr(cfg, key, vals)

    value, no = get("evolution", "dt")
    if value is not None:
        cfg.dt = _number(value, float, no, "dt")
        if cfg.dt <= 0:
            raise ConfigError(f"line {no}: dt must be positive")
        bound = 0.25 * min(L / N for L, N in zip(cfg.lengths, cfg.N))
        if cfg.dt > bound * (1 + 1e-12):
            raise ConfigError(f"line {no}: dt = {cfg.dt} exceeds 0.25 * min spacing = {bound}")
    for key, attr, lo in (("steps", "steps", 0), ("record_every", "record_every", 1),
                          ("filter_modes", "filter_modes", 1)):
        value, no = get("evolution", key)
        if value is not None:
            v = _number(value, int, no, key)
            if v < lo:
                raise ConfigError(f"line {no}: {key} must be >= {lo}")
            setattr(cfg, attr, v)
    value, no = get("evolution", "lambda")
    if value is not None:
        cfg.lam = _number(value, float, no, "lambda")

    for key in ("c", "k"):
        value, no = get("constraints2d", key)
        if value is not None:
            setattr(cfg, key, _number(value, float, no, key))
    value, no = get("constraints2d", "F")
    if value is not None:
        if value not in ("zero", "const1", "linear"):
            raise ConfigError(f"line {no}: F must be one of zero, const1, linear; got {value!r}")
        cfg.F = value
    value, no = get("constraints2d", "phi")
    if value is not None:
        cfg.phi = PhiExpression.parse(value, where=f"line {no}")
        if cfg.phi.max_axis() >= cfg.n:
            raise ConfigError(f"line {no}: phi uses an axis beyond n = {cfg.n}")

    value, no = get("io", "out")
    if value is not None:
        if not value:
            raise ConfigError(f"line {no}: out must not be empty")
        cfg.out = value
    value, no = get("seed", "seed")
    if value is not None:
        cfg.seed = _number(value, int, no, "seed")
    return cfg


def load_config(path, required=("grid",)) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return parse_config(text, str(path), required)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
