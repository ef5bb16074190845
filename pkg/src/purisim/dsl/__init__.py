"""Protocol scripts: parsing, pretty-printing and the three-condition checks."""
from importlib import resources
from pathlib import Path

from .ast import ProtocolSpec, phases, pretty_print
from .checker import TheoremVerdict, check, check_condition1, check_condition2, check_condition3
from .parser import parse, parse_file

BUNDLED = ("protocol1", "protocol2", "protocol3", "phase_correction")
NEGATIVE = {"neg_condition1": 1, "neg_condition2": 2, "neg_condition3": 3}


def bundled_path(name: str) -> Path:
    """Path of a bundled script, e.g. ``protocol3`` or ``neg_condition2``."""
    stem = name[:-4] if name.endswith(".epp") else name
    base = resources.files("purisim") / "data"
    path = base / "negative" / f"{stem}.epp" if stem in NEGATIVE else base / f"{stem}.epp"
    return Path(str(path))


def load_bundled(name: str) -> ProtocolSpec:
    return parse_file(bundled_path(name))


__all__ = [
    "BUNDLED", "NEGATIVE", "ProtocolSpec", "TheoremVerdict", "bundled_path", "check",
    "check_condition1", "check_condition2", "check_condition3", "load_bundled", "parse",
    "parse_file", "phases", "pretty_print",
]
