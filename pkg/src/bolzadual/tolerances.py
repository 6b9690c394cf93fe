"""Default numerical tolerances.

All residual-style checks are scaled by ``1 + |values involved|`` so that the
defaults behave the same across problem scalings.
"""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    psd: float = 1e-10        # symmetric eigenvalue floor for PSD checks
    kkt: float = 1e-9         # KKT residual accepted as "solved"
    feas: float = 1e-7        # constraint satisfaction of returned points
    cert: float = 1e-6        # Fenchel-Young certificate acceptance
    sub: float = 1e-6         # subgradient residual acceptance
    ri: float = 1e-7          # relative-interior slack (after row normalization)
    grid: float = 1e-7        # grid-line convexity slack (second differences)
    num: float = 1e-8         # generic numeric slack in property checks
    zero: float = 1e-11       # values below this count as exact zeros

    def override(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)


DEFAULT_TOLS = Tolerances()

#: Documented default seed for every randomized procedure in the toolkit.
DEFAULT_SEED = 1729
