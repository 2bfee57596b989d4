"""Named parameter sets for the weather simulator, stored as INI text.

Schema: one section per region, holding the two free chain probabilities and
twelve monthly exponential rates (1/mm):

    [some_region]
    p_dry_wet = 0.04
    p_wet_dry = 0.70
    rate_jan = 0.25
    ...
    rate_dec = 0.25

The complementary probabilities (stay dry, stay wet) are implied. A packaged
file ships four ready-made dryland presets.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .simulate import MONTH_NAMES, AmountModel, TransitionMatrix

_RATE_KEYS = tuple(f"rate_{m}" for m in MONTH_NAMES)
_KEYS = ("p_dry_wet", "p_wet_dry") + _RATE_KEYS


@dataclass(frozen=True)
class RegionParams:
    """One region's chain probabilities and monthly amount rates."""

    name: str
    transition: TransitionMatrix
    amounts: AmountModel


def _parse(text: str, source: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValueError(f"{source}: {exc}") from exc
    regions: dict[str, RegionParams] = {}
    for name in parser.sections():
        section = parser[name]
        missing = [k for k in _KEYS if k not in section]
        if missing:
            raise ValueError(f"{source}: [{name}] is missing {', '.join(missing)}")
        extra = [k for k in section if k not in _KEYS]
        if extra:
            raise ValueError(f"{source}: [{name}] has unknown keys {', '.join(extra)}")
        try:
            p_dw = float(section["p_dry_wet"])
            p_wd = float(section["p_wet_dry"])
            rates = [float(section[k]) for k in _RATE_KEYS]
        except ValueError as exc:
            raise ValueError(f"{source}: [{name}]: {exc}") from exc
        regions[name] = RegionParams(
            name,
            TransitionMatrix.from_rates(p_dw, p_wd),
            AmountModel.monthly(rates),
        )
    if not regions:
        raise ValueError(f"{source}: no region sections found")
    return regions


def load_regions(path) -> dict:
    """Read a region-parameter file; returns {name: RegionParams} in file order."""
    path = Path(path)
    return _parse(path.read_text(), str(path))


def save_regions(path, regions) -> None:
    """Write regions to INI text; full float precision survives a round trip."""
    parser = configparser.ConfigParser()
    for region in regions.values() if isinstance(regions, dict) else regions:
        parser[region.name] = {}
        section = parser[region.name]
        section["p_dry_wet"] = repr(region.transition.p_dry_wet)
        section["p_wet_dry"] = repr(region.transition.p_wet_dry)
        for key, rate in zip(_RATE_KEYS, region.amounts.rates):
            section[key] = repr(rate)
    with open(path, "w") as handle:
        parser.write(handle)


def default_regions() -> dict:
    """The four packaged dryland presets."""
    text = (resources.files("sparsedelay") / "data" / "regions.ini").read_text()
    return _parse(text, "packaged regions.ini")
