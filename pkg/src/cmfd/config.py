"""Detector configuration.

Every stage of the pipeline reads its parameters from a single flat
:class:`Config` dataclass.  The file representation is plain ``key=value``
text so a run's parameters can be diffed and versioned alongside results.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

THREADS_ENV_VAR = "CMFD_THREADS"


@dataclass
class Config:
    # pre-processing
    s: float = 2.0                  # resize factor applied before anything else
    r_e: int = 3                    # local-entropy window radius (window side 2*r_e+1)
    # keypoint detection (run on the entropy image normalized to [0,1])
    t_con: float = 0.01             # contrast threshold on refined DoG values
    sigma0: float = 1.6             # base blur of the scale space
    scales_per_octave: int = 3
    edge_ratio: float = 10.0        # principal-curvature ratio limit; 0 disables the test
    # matching
    step1: int = 50                 # gray interval size
    step2: int = 10                 # gray interval overlap
    step3: float = 1.0              # entropy interval size
    step4: float = 0.0              # entropy interval overlap
    t_ratio: float = 0.5            # neighbor acceptance ratio of the g2NN scan
    min_spatial_distance: float = 10.0
    exhaustive_scan: bool = False   # test every neighbor rank instead of stopping at first failure
    # localization
    ransac_iters: int = 2000
    ransac_tol: float = 3.0         # inlier reprojection tolerance, pixels
    ransac_seed: int = 0
    max_transforms: int = 8
    min_region_area_fraction: float = 0.0005  # of original-resolution pixels
    # execution
    threads: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.s <= 0:
            raise ValueError(f"resize factor must be positive, got {self.s}")
        if self.r_e < 1:
            raise ValueError(f"entropy radius must be >= 1, got {self.r_e}")
        if not (0 < self.step1 <= 255) or not (0 <= self.step2 < self.step1):
            raise ValueError(
                f"gray steps need 0 < step1 <= 255 and 0 <= step2 < step1, "
                f"got step1={self.step1}, step2={self.step2}"
            )
        if self.step3 <= 0:
            raise ValueError(f"step3 must be positive, got {self.step3}")
        if not (0 <= self.step4 < 7):
            raise ValueError(f"step4 must be in [0, 7), got {self.step4}")
        if not (0 < self.t_ratio < 1):
            raise ValueError(f"match ratio must be in (0, 1), got {self.t_ratio}")
        if self.t_con < 0:
            raise ValueError(f"contrast threshold must be >= 0, got {self.t_con}")
        if self.sigma0 <= 0 or self.scales_per_octave < 1:
            raise ValueError("scale-space parameters out of range")

    @property
    def min_region_area(self) -> float:
        """Area threshold in pixels for an image of `npixels` — see tampered_area()."""
        return self.min_region_area_fraction

    def tampered_area(self, npixels: int) -> int:
        """Minimum mask area (original-resolution pixels) for a tampered verdict."""
        return max(1, int(round(self.min_region_area_fraction * npixels)))

    def effective_threads(self) -> int:
        env = os.environ.get(THREADS_ENV_VAR)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                pass
        return max(1, self.threads)

    def save(self, path: str | Path) -> None:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={getattr(self, f.name)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        values = {}
        field_types = {f.name: f.type for f in dataclasses.fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in field_types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(value.strip())
        return cls(**values)


def _parse_value(text: str):
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text.strip("'\"")
