import logging
import math
from typing import Any, Callable, Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .closed_forms import (
    annealed_pressure,
    phase_regime,
    rs_pressure,
    shell_lower_bound,
    spherical_pressure,
    spherical_variational,
)
from .config import Settings
from .errors import DomainError, NumericError
from .fluctuations import annealed_susceptibility, blowup_time
from .parisi_rsb import (
    PiecewiseOrderParameter,
    parisi_closed_form,
    rsb_entropy_term,
    rsb_pressure_functional,
    stationarity_residual,
)
from .results import ResultStore

logger = logging.getLogger(__name__)

# Initialize settings and the optional result store with error handling
try:
    settings = Settings()
    startup_error = None
except Exception as e:
    settings = None
    startup_error = f"Configuration error: {e}"

result_store: Optional[ResultStore] = None
if settings and settings.RESULTS_DIR:
    result_store = ResultStore(settings.RESULTS_DIR, settings.RESULTS_MAX_SIZE_MB)

app = FastAPI(
    title="gaussglass",
    description="""
## Closed-form evaluation service for the fully Gaussian spin glass

All endpoints are deterministic; Monte Carlo campaigns run from the command line only.

**Parameters:** `beta` is the inverse temperature (β ≥ 0), `lambda` the variance shift (λ).

**Endpoints:**
- `GET /closed-form/annealed` - annealed pressure −½ log(1−λ)
- `GET /closed-form/rs` - replica-symmetric pressure, optimal q̄ and σ
- `GET /closed-form/shell` - supremum of the spherical-shell lower bound
- `GET /closed-form/spherical` - spherical-model pressure at radius R
- `GET /fluctuations/susceptibility` - ⟨ξ₁₂²⟩ at t = 1 in the annealed regime
- `POST /rsb/functional` - broken-replica functional of a step order parameter

**Error handling:**
- `422`: parameters outside the domain of the requested formula
- `500`: numerical failure or service misconfiguration
""",
    version=__version__,
)

BETA = Query(..., ge=0.0, description="Inverse temperature β")
LAMBDA = Query(0.0, alias="lambda", description="Variance shift λ")


class RsbFunctionalRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    beta: float = Field(..., ge=0.0)
    lam: float = Field(0.0, alias="lambda")
    x: PiecewiseOrderParameter


def _evaluate(fn: Callable[..., Any], *args: Any) -> Any:
    """Call a closed form, mapping domain errors to 422 and numeric failures to 500."""
    try:
        return fn(*args)
    except DomainError as e:
        raise HTTPException(status_code=422, detail={"error": "domain_error", "message": str(e)})
    except NumericError as e:
        logger.warning(f"{fn.__name__}{args}: {e}")
        raise HTTPException(status_code=500, detail={
            "error": type(e).__name__, "message": str(e), "diagnostics": e.diagnostics,
        })


@app.get("/health", tags=["Status"])
async def health():
    """
    Health check endpoint for monitoring.

    **Response fields:**
    - `status`: "healthy" or "unhealthy"
    - `startup_error`: Error message if the configuration failed to load, null otherwise
    - `result_store_configured`: Whether run records are persisted
    """
    return {
        "status": "healthy" if settings else "unhealthy",
        "startup_error": startup_error,
        "version": __version__,
        "result_store_configured": result_store is not None,
    }


@app.get("/debug/config", tags=["Status"])
async def debug_config():
    """Resolved configuration and result-store statistics."""
    if not settings:
        raise HTTPException(status_code=500, detail={"error": "misconfigured", "message": startup_error})
    config = settings.model_dump(mode="json")
    if result_store:
        config["result_store_stats"] = result_store.get_stats()
    return config


@app.get("/closed-form/annealed", tags=["Closed Forms"])
async def get_annealed(beta: float = BETA, lam: float = LAMBDA):
    value = _evaluate(annealed_pressure, beta, lam)
    return {"beta": beta, "lambda": lam, "value": value, "regime": phase_regime(beta, lam).value}


@app.get("/closed-form/rs", tags=["Closed Forms"])
async def get_rs(beta: float = BETA, lam: float = LAMBDA):
    """Replica-symmetric pressure; `regime` tells which branch of the infimum was taken."""
    solution = _evaluate(rs_pressure, beta, lam)
    return {"beta": beta, "lambda": lam, **solution.model_dump(mode="json")}


@app.get("/closed-form/shell", tags=["Closed Forms"])
async def get_shell(beta: float = BETA, lam: float = LAMBDA):
    solution = _evaluate(shell_lower_bound, beta, lam)
    return {"beta": beta, "lambda": lam, **solution.model_dump(mode="json")}


@app.get("/closed-form/spherical", tags=["Closed Forms"])
async def get_spherical(beta: float = BETA, r: float = Query(1.0, gt=0.0, description="Radius R")):
    """Spherical-model pressure at radius R; at R = 1 also the variational form."""
    value = _evaluate(spherical_pressure, beta, r)
    response = {"beta": beta, "r": r, "value": value}
    if r == 1.0:
        q, variational = spherical_variational(beta)
        response.update({"variational_q": q, "variational_value": variational})
    return response


@app.get("/fluctuations/susceptibility", tags=["Fluctuations"])
async def get_susceptibility(beta: float = BETA, lam: float = LAMBDA):
    value = _evaluate(annealed_susceptibility, beta, lam)
    t_star = blowup_time(beta, lam)
    # JSON has no infinity; β = 0 never blows up
    return {"beta": beta, "lambda": lam, "value": value, "blowup_time": t_star if math.isfinite(t_star) else None}


@app.post("/rsb/functional", tags=["Broken Replicas"])
async def post_rsb_functional(request: RsbFunctionalRequest):
    """
    Evaluate the broken-replica functional at a step order parameter.

    Order parameters whose denominator vanishes on [0, Q] are rejected with 500
    and the offending q in `diagnostics`.
    """
    beta, lam, x = request.beta, request.lam, request.x
    value = _evaluate(rsb_pressure_functional, beta, lam, x)
    return {
        "beta": beta,
        "lambda": lam,
        "x": x.model_dump(mode="json"),
        "value": value,
        "parisi_closed_form": _evaluate(parisi_closed_form, beta, lam, x),
        "entropy_term": _evaluate(rsb_entropy_term, beta, x),
        "stationarity_residual": _evaluate(stationarity_residual, beta, lam, x),
    }
