"""Error kinds shared across the package.

The CLI maps these onto distinct exit codes: configuration problems,
data/file problems, and numeric failures are kept apart.
"""


class SliceMoaError(Exception):
    """Base class for all package errors."""


class ConfigError(SliceMoaError):
    """Invalid run configuration; message names the offending field path."""


class ParameterError(SliceMoaError):
    """A numeric parameter is outside its legal range (e.g. dropout p >= 1)."""


class DimensionError(SliceMoaError):
    """Tensor shapes do not line up; message names both shapes."""


class ContractError(SliceMoaError):
    """An API contract was violated (e.g. backward on a non-scalar)."""


class NumericError(SliceMoaError):
    """A numeric failure such as NaN input or NaN gradients."""


class DataError(SliceMoaError):
    """Dataset or cache file problem."""


class CacheFormatError(DataError):
    """Embedding cache has a bad magic, version, or length."""


class MissingIdError(DataError):
    """A requested sample id is not present in the embedding cache."""
