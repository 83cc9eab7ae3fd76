"""Bundled parity-check matrices and trained-artifact loaders."""

from __future__ import annotations

from importlib import resources

from ..graph import TannerGraph, parse_alist

BUNDLED = ("ccsds_128_64", "small_32_16")


def alist_text(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled code {name!r}; have {BUNDLED}")
    return resources.files(__package__).joinpath(f"{name}.alist").read_text()


def load(name: str) -> TannerGraph:
    """Parse a bundled code by name, e.g. load('ccsds_128_64')."""
    return parse_alist(alist_text(name))
