"""Synthetic instances: structural presets for five reference instance shapes, plus free parameters.

Demand follows a size-curve model: per-branch volume is lognormal, per-size
shares come from a fixed unimodal curve perturbed by per-branch noise.  Volumes
are rescaled so total demand sits at the centre of the supply window, which
keeps the window reachable.  Values are written with one decimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lotdesign.model import Instance, make_instance


@dataclass(frozen=True)
class Preset:
    num_branches: int
    num_sizes: int
    k: int
    min_c: int
    max_c: int
    min_t: int
    max_t: int
    supply_lo: int
    supply_hi: int
    multiplicities: tuple[int, ...] = (1, 2, 3)


PRESETS: dict[str, Preset] = {
    "t1-i1": Preset(10, 4, 3, 0, 2, 4, 8, 54, 66),
    "t1-i2": Preset(10, 4, 5, 0, 5, 3, 15, 54, 66),
    "t1-i3": Preset(1303, 4, 5, 0, 5, 3, 15, 11900, 12100),
    "t1-i4": Preset(1328, 7, 4, 0, 2, 7, 14, 9702, 9898),
    "t1-i5": Preset(682, 12, 5, 0, 5, 12, 30, 15500, 16200),
}

SIZE_NAMES = {
    4: ("S", "M", "L", "XL"),
    7: ("XS", "S", "M", "L", "XL", "XXL", "3XL"),
}


def size_curve(num_sizes: int) -> np.ndarray:
    """Unimodal share vector peaking slightly below the middle size."""
    pos = np.arange(num_sizes, dtype=float)
    centre = 0.45 * (num_sizes - 1)
    width = max(num_sizes / 4.0, 0.75)
    w = np.exp(-0.5 * ((pos - centre) / width) ** 2)
    return w / w.sum()


def synth_demand(
    num_branches: int, num_sizes: int, total: float, rng: np.random.Generator, sigma: float = 0.5, noise: float = 0.25
) -> np.ndarray:
    """(B, S) demand rounded to one decimal whose sum is close to ``total``."""
    volume = rng.lognormal(0.0, sigma, size=num_branches)
    volume *= total / volume.sum()
    shares = size_curve(num_sizes)[None, :] * rng.lognormal(0.0, noise, size=(num_branches, num_sizes))
    shares /= shares.sum(axis=1, keepdims=True)
    return np.round(volume[:, None] * shares, 1)


def generate(
    num_branches: int,
    num_sizes: int,
    k: int,
    min_c: int,
    max_c: int,
    min_t: int,
    max_t: int,
    supply: tuple[int, int] | None = None,
    multiplicities: tuple[int, ...] = (1, 2, 3),
    seed: int = 0,
) -> Instance:
    """Parametric instance; without ``supply`` the window is ±2% around total demand."""
    if num_branches < 1 or num_sizes < 1:
        raise ValueError("need at least one branch and one size")
    rng = np.random.default_rng(seed)
    if supply is None:
        per_branch = (max(min_t, num_sizes * min_c) + min(max_t, num_sizes * max_c)) / 2.0
        centre = per_branch * num_branches
        supply = (int(np.floor(0.98 * centre)), int(np.ceil(1.02 * centre)))
    lo, hi = supply
    if lo > hi:
        raise ValueError(f"empty supply window [{lo}, {hi}]")
    demand = synth_demand(num_branches, num_sizes, (lo + hi) / 2.0, rng)
    names = SIZE_NAMES.get(num_sizes, tuple(f"s{i + 1:02d}" for i in range(num_sizes)))
    return make_instance(
        [[f"{v:.1f}" for v in row] for row in demand],
        multiplicities,
        min_c=min_c,
        max_c=max_c,
        min_t=min_t,
        max_t=max_t,
        supply=(lo, hi),
        k=k,
        sizes=names,
        branches=[f"branch-{b + 1:04d}" for b in range(num_branches)],
    )


def generate_preset(name: str, seed: int = 0) -> Instance:
    try:
        p = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return generate(
        p.num_branches,
        p.num_sizes,
        p.k,
        p.min_c,
        p.max_c,
        p.min_t,
        p.max_t,
        supply=(p.supply_lo, p.supply_hi),
        multiplicities=p.multiplicities,
        seed=seed,
    )
