"""Initial data: named profiles and seeded random fields."""

from __future__ import annotations

import numpy as np

from .grid import GridFunction, GridSpec, from_callable, indicator


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator; one 64-bit seed reproduces every random field."""
    return np.random.Generator(np.random.Philox(int(seed)))


def gaussian_bump(spec: GridSpec, amp: float = 1.0, width: float = 1.0, center=None) -> GridFunction:
    c = np.zeros(spec.n) if center is None else np.asarray(center, dtype=float)
    return from_callable(
        spec, lambda *x: amp * np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / width**2)
    )


def compact_bump(spec: GridSpec, amp: float = 1.0, width: float = 1.0) -> GridFunction:
    """amp * exp(1 - 1/(1 - |x|^2/width^2)) inside the ball, zero outside; peak amp."""
    s = spec.radius() ** 2 / width**2
    inside = s < 1
    vals = np.zeros(spec.shape)
    vals[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return GridFunction(spec, vals)


def random_field(spec: GridSpec, rng: np.random.Generator, bumps: int = 4,
                 amp: float = 1.0) -> GridFunction:
    """Sum of Gaussians with random centres, widths, signs and amplitudes."""
    vals = np.zeros(spec.shape)
    coords = spec.coords()
    for _ in range(bumps):
        c = rng.uniform(-spec.L / 4, spec.L / 4, size=spec.n)
        w = rng.uniform(2 * spec.h, spec.L / 4)
        a = amp * rng.uniform(-1.0, 1.0)
        vals += a * np.exp(-sum((x - ci) ** 2 for x, ci in zip(coords, c)) / w**2)
    return GridFunction(spec, vals)


def parse_ic(text: str):
    """``kind:key=value,...`` to (kind, {key: float})."""
    kind, _, rest = text.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"initial data option {item!r} is not key=value")
        opts[key.strip()] = float(val)
    return kind.strip(), opts


_IC_KEYS = {
    "bump": {"amp", "width"},
    "cbump": {"amp", "width"},
    "indicator": {"amp", "measure"},
    "random": {"amp", "bumps"},
}


def make_initial(spec: GridSpec, text: str, seed: int = 0) -> GridFunction:
    kind, opts = parse_ic(text)
    if kind not in _IC_KEYS:
        raise ValueError(f"unknown initial data {kind!r}; expected one of {sorted(_IC_KEYS)}")
    unknown = set(opts) - _IC_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown options {sorted(unknown)} for {kind}")
    amp = opts.get("amp", 1.0)
    if kind == "bump":
        return gaussian_bump(spec, amp, opts.get("width", 1.0))
    if kind == "cbump":
        return compact_bump(spec, amp, opts.get("width", 1.0))
    if kind == "indicator":
        return indicator(spec, opts.get("measure", 1.0), amp)
    return random_field(spec, rng_from_seed(seed), int(opts.get("bumps", 4)), amp)
