"""Slice functions and membership assignment.

A slice is a subset of the data picked out by a deterministic predicate over
the raw text. Slot 0 of every schema is the base slice, which contains every
sample; the remaining slots are the monitored slices. A sample may belong to
any number of slices at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError


def sf_length(text: str, k: int = 10) -> bool:
    """Short texts: character count strictly below k."""
    return len(text) < k


def sf_substring(text: str, needle: str) -> bool:
    """Texts containing ``needle`` anywhere (plain substring, no boundaries)."""
    return needle in text


def sf_long(text: str, k: int = 10) -> bool:
    """Long texts: more than k fields when split on single spaces.

    Splitting on ' ' (not arbitrary whitespace) counts empty fields produced
    by repeated spaces, so "a  b" has three fields.
    """
    return len(text.split(" ")) > k


def sf_question(text: str) -> bool:
    """Texts whose final character is '?'; empty text is not a question."""
    return bool(text) and text[-1] == "?"


def sf_base(text: str) -> bool:
    return True


@dataclass(frozen=True)
class SliceFunction:
    """A named, total, deterministic predicate over raw text."""

    name: str
    predicate: Callable[[str], bool]
    params: dict = field(default_factory=dict)

    def __call__(self, text: str) -> bool:
        return bool(self.predicate(text, **self.params))


_BUILTINS: dict[str, Callable] = {
    "base": sf_base,
    "length": sf_length,
    "substring": sf_substring,
    "long": sf_long,
    "question": sf_question,
}

BASE_SLICE = SliceFunction("base", sf_base)


def builtin(name: str, builtin_name: str | None = None, params: dict | None = None) -> SliceFunction:
    """Instantiate a built-in slice function under a display name."""
    key = builtin_name or name
    if key not in _BUILTINS:
        raise ConfigError(f"unknown builtin slice function {key!r}")
    return SliceFunction(name, _BUILTINS[key], dict(params or {}))


@dataclass(frozen=True)
class SliceSchema:
    """Ordered slice functions; slot 0 is always the base slice.

    ``lowercase`` controls whether predicates see lowercased text, making
    substring matching case-insensitive by default. Set it to False to run
    the predicates on raw text.
    """

    functions: tuple[SliceFunction, ...]
    lowercase: bool = True

    def __post_init__(self):
        names = [f.name for f in self.functions]
        if not self.functions or self.functions[0].predicate is not sf_base:
            raise ConfigError("slices: slot 0 must be the base slice")
        if len(set(names)) != len(names):
            raise ConfigError(f"slices: duplicate slice names in {names}")

    @property
    def k(self) -> int:
        return len(self.functions)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.functions)

    @property
    def monitored(self) -> tuple[str, ...]:
        return self.names[1:]

    def assign(self, text: str) -> np.ndarray:
        """Membership vector gamma; gamma[0] is 1 for every sample."""
        t = text.lower() if self.lowercase else text
        gamma = np.zeros(self.k, dtype=np.int8)
        gamma[0] = 1
        for i, fn in enumerate(self.functions[1:], start=1):
            gamma[i] = 1 if fn(t) else 0
        return gamma

    def assign_all(self, texts) -> np.ndarray:
        return np.stack([self.assign(t) for t in texts]) if len(texts) else np.zeros((0, self.k), dtype=np.int8)

    def to_config(self) -> list[dict]:
        out = []
        for fn in self.functions:
            builtin_name = next((k for k, v in _BUILTINS.items() if v is fn.predicate), None)
            out.append({"name": fn.name, "builtin": builtin_name, "params": dict(fn.params)})
        return out


def schema_from_config(entries: list[dict], lowercase: bool = True) -> SliceSchema:
    """Build a schema from config entries of {name, builtin, params}.

    A leading base entry is optional; one is prepended when absent.
    """
    functions: list[SliceFunction] = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"slices[{i}]: expected an object with a 'name' field")
        functions.append(builtin(entry["name"], entry.get("builtin"), entry.get("params")))
    if not functions or functions[0].predicate is not sf_base:
        functions.insert(0, BASE_SLICE)
    return SliceSchema(tuple(functions), lowercase=lowercase)


def preset_schema(name: str, lowercase: bool = True) -> SliceSchema:
    """Schemas used by the two reference tasks.

    ``cola``: base, long sentences, questions (binary acceptability task).
    ``nlu``: base, short utterances, "time", "email" (intent task).
    """
    if name == "cola":
        entries = [{"name": "long", "builtin": "long", "params": {"k": 10}},
                   {"name": "question", "builtin": "question"}]
    elif name == "nlu":
        entries = [{"name": "length", "builtin": "length", "params": {"k": 10}},
                   {"name": "time", "builtin": "substring", "params": {"needle": "time"}},
                   {"name": "email", "builtin": "substring", "params": {"needle": "email"}}]
    else:
        raise ConfigError(f"unknown schema preset {name!r}")
    return schema_from_config(entries, lowercase=lowercase)
