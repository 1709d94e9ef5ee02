"""Ghost imaging through scattering media.

Pseudothermal speckle generation, paraxial two-arm propagation, Gaussian
scattering screens, detection, streaming correlation estimation and a
closed-form prediction of the correlation image.
"""

from .grid import ComplexField, GridSpec, IntensityFrame, flip, make_grid, total_power
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ComplexField",
    "GridSpec",
    "IntensityFrame",
    "flip",
    "make_grid",
    "total_power",
    "__version__",
]
