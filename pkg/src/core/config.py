# solver limits, quadrature/grid resolutions and run-store location for the whole project
from typing import Any, Dict, Optional
from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    # project name, used in CLI help and report headers
    PROJECT_NAME: str = "wbary"

    # exact LP solver: dense cost matrices above this many atoms per side are refused (SizeError)
    LP_MAX_ATOMS: int = 2000

    # Θ-quadrature: midpoint nodes per axis of the parameter box
    QUAD_NODES: int = 33
    # Ω grid cells per axis used by c-transforms, grid push-forwards and template discretization
    GRID_CELLS: int = 256

    # fixed-support barycenter solver stopping rule:
    # stop when max support displacement < FIXED_SUPPORT_TOL_FACTOR * diam(Ω) or after MAX_ITER iterations
    FIXED_SUPPORT_MAX_ITER: int = 200
    FIXED_SUPPORT_TOL_FACTOR: float = 1e-7

    # experiments
    BOOTSTRAP_RESAMPLES: int = 1000
    # None means one worker per logical core
    THREADS: Optional[int] = None

    # measure hygiene
    WEIGHT_PRUNE: float = 1e-15       # atoms lighter than this are dropped (single renormalization)
    WEIGHT_RENORM_TOL: float = 1e-6   # loaded weights are renormalized only when their sum is this close to 1
    RENORM_TOL: float = 1e-3          # grid push-forward leakage allowed before DomainError
    DOMAIN_INFLATION: float = 0.01    # Ω = bounding box of all member supports, inflated by this fraction
    CONVEXITY_TOL: float = 1e-4       # Brenier potential second differences below -tol raise ConvexityWarning

    LOG_LEVEL: str = "INFO"

    # optional run store for `wbary simulate --db`
    DATABASE_URL: str = "sqlite:///./wbary_runs.db"

    model_config = SettingsConfigDict(
        env_prefix="WBARY_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    def merged(self, overrides: Optional[Dict[str, Any]] = None) -> "Settings":
        """
        Return a copy with the given overrides applied.
        Keys may be given in flag/config-file form (lower case) or as field names.
        None values are skipped so unset CLI flags never clobber the file or environment.
        """
        if not overrides:
            return self
        updates = {}
        for key, value in overrides.items():
            if value is None:
                continue
            field = key.upper().replace("-", "_")
            if field in type(self).model_fields:
                updates[field] = value
        return self.model_copy(update=updates)


# global settings instance imported throughout the project
settings = Settings()
