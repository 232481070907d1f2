"""Installed version lookup with a constant fallback for source checkouts."""

from __future__ import annotations
from importlib.metadata import PackageNotFoundError, version as _pkg_version

__version__ = "0.1.0"


def package_version(dist_name: str = "hokam") -> str:
    try:
        return _pkg_version(dist_name)
    except PackageNotFoundError:
        return __version__
