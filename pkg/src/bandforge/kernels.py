"""Second-order kernels with their moment constants and samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UnsamplableKernel

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _epanechnikov(u):
    return 0.75 * np.maximum(0.0, 1.0 - u * u)


def _gaussian(u):
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def _biweight(u):
    t = np.maximum(0.0, 1.0 - u * u)
    return (15.0 / 16.0) * t * t


def _sample_epanechnikov(rng: np.random.Generator, size: int) -> np.ndarray:
    # Devroye: median-of-three construction on U(-1, 1)
    u = rng.uniform(-1.0, 1.0, size=(3, size))
    a1, a2, a3 = np.abs(u)
    return np.where((a3 >= a2) & (a3 >= a1), u[1], u[2])


def _sample_gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size)


def _sample_biweight(rng: np.random.Generator, size: int) -> np.ndarray:
    return 2.0 * rng.beta(3.0, 3.0, size) - 1.0


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density used as a smoothing kernel.

    ``support`` is the half-width of the support (``inf`` for unbounded),
    ``kappa`` is the integral of K squared and ``kappa2`` the second moment.
    """

    name: str
    support: float
    kappa: float
    kappa2: float
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is None:
            raise UnsamplableKernel(f"no sampler registered for kernel {self.name!r}")
        return self.sampler(rng, size)

    @property
    def plugin_constant(self) -> float:
        """kappa / kappa2**2, the kernel factor in the AMISE-optimal local linear bandwidth."""
        return self.kappa / self.kappa2**2


EPANECHNIKOV = Kernel("epanechnikov", 1.0, 3.0 / 5.0, 1.0 / 5.0, _epanechnikov, _sample_epanechnikov)
GAUSSIAN = Kernel("gaussian", np.inf, 1.0 / (2.0 * np.sqrt(np.pi)), 1.0, _gaussian, _sample_gaussian)
BIWEIGHT = Kernel("biweight", 1.0, 5.0 / 7.0, 1.0 / 7.0, _biweight, _sample_biweight)

KERNELS = {k.name: k for k in (EPANECHNIKOV, GAUSSIAN, BIWEIGHT)}


def get_kernel(kernel: str | Kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None
