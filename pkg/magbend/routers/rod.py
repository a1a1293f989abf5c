from fastapi import APIRouter, HTTPException, status
from typing import List
import logging
import math
import time

from magbend.models.schemas import ErrorResponse, SolveRequest, SolveResponse
from magbend.routers import http_error
from magbend.services.magnetoelastic_rod import build_rod, bundled_spec_ids, load_spec, parse_spec, solve_equilibrium
from magbend.services.pipeline import summarize_equilibrium

router = APIRouter()
logger = logging.getLogger(__name__)


@router.get("/specs", response_model=List[str], summary="List bundled rod specs")
async def list_specs() -> List[str]:
    return bundled_spec_ids()


@router.post(
    "/solve",
    response_model=SolveResponse,
    responses={
        status.HTTP_400_BAD_REQUEST: {"model": ErrorResponse},
        status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": ErrorResponse}
    },
    summary="Solve a bending equilibrium",
    description="Equilibrium shape of a three-section rod in a uniform field. Non-convergence is reported in the body, not as an error."
)
def solve(request: SolveRequest) -> SolveResponse:
    if (request.spec is None) == (request.spec_id is None):
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Provide exactly one of spec or spec_id"
        )
    try:
        spec = parse_spec(request.spec) if request.spec is not None else load_spec(request.spec_id)
        start_time = time.time()
        rod = build_rod(spec, request.resolution)
        equilibrium = solve_equilibrium(rod, request.field_mT * 1e-3, math.radians(request.angle_deg))
        duration = time.time() - start_time

        logger.info(
            f"Solved {spec.name} at {request.field_mT} mT in {duration:.2f} seconds "
            f"(converged={equilibrium.converged})"
        )
        return SolveResponse(**summarize_equilibrium(spec, equilibrium))

    except Exception as e:
        raise http_error("Solve", e)
