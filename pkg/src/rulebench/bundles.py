"""Access to the data files shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

BUNDLED = (
    "sms_banking.karb",
    "zoo_violation.karb",
    "zoo_compliant.karb",
    "quality_rules.karb",
    "space.cfg",
    "experts.cfg",
)


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled program/config file."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled file {name!r}; available: {', '.join(BUNDLED)}")
    return Path(str(resources.files(__package__) / "programs" / name))


def bundled_text(name: str) -> str:
    return bundled_path(name).read_text(encoding="utf-8")
