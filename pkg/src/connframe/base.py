"""Estimator plumbing: parameter introspection and input checks.

Estimators here follow the scikit-learn conventions (constructor stores
hyperparameters verbatim, fitted state ends in a trailing underscore,
get_params/set_params expose the constructor arguments) without requiring
scikit-learn itself; sklearn.base.clone works on them by duck typing.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import DataError


class ParamsMixin:
    """get_params/set_params/repr driven by the __init__ signature."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_vector(v, name="vector") -> np.ndarray:
    """Coerce to a finite 1-d float array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_matrix(X, n_columns=None, name="X") -> np.ndarray:
    """Coerce to a finite 2-d float array, optionally with a fixed width."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if n_columns is not None and arr.shape[1] != n_columns:
        raise DataError(
            f"{name} has {arr.shape[1]} columns, expected {n_columns}"
        )
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise DataError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
