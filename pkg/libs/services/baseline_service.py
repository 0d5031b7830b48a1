import logging
from typing import Optional, Sequence

from libs.diffusion.odmatrix import ODMatrix
from libs.errors import ValidationError
from libs.ingest.city import CityBundle
from libs.physical.gravity import DEFAULT_BETAS, GravityParams, fit_gravity, gravity
from libs.physical.radiation import DEFAULT_TRIP_RATE, radiation

logger = logging.getLogger(__name__)

MODELS = ("gravity", "radiation")


class BaselineService:
    """Service for the physical baseline models."""

    @staticmethod
    def fit(bundles: Sequence[CityBundle], betas: Sequence[float] = DEFAULT_BETAS) -> GravityParams:
        """
        Grid-search gravity parameters on cities with reference flows.

        Args:
            bundles: Fitting cities
            betas: Candidate distance exponents

        Returns:
            GravityParams with the lowest mean NRMSE
        """
        cities = [(b.geos, b.od) for b in bundles if b.od is not None]
        if not cities:
            raise ValidationError("Gravity fitting needs at least one city with a reference OD matrix")
        return fit_gravity(cities, betas)

    @staticmethod
    def gravity_params(
        bundle: CityBundle,
        fit_bundles: Optional[Sequence[CityBundle]] = None,
        G: Optional[float] = None,
        beta: Optional[float] = None,
    ) -> GravityParams:
        """
        Resolve gravity parameters: a fitting corpus wins, then explicit values,
        then an in-sample fit on the city's own reference flows, then G=1, beta=2.
        """
        if fit_bundles:
            betas = (beta,) if beta is not None else DEFAULT_BETAS
            return BaselineService.fit(fit_bundles, betas)
        if G is not None or beta is not None:
            defaults = GravityParams()
            return GravityParams(G=defaults.G if G is None else G, beta=defaults.beta if beta is None else beta)
        if bundle.od is not None:
            logger.warning(f"No fitting corpus given; fitting gravity on {bundle.name}'s own reference flows")
            return BaselineService.fit([bundle])
        return GravityParams()

    @staticmethod
    def run(
        model: str,
        bundle: CityBundle,
        params: Optional[GravityParams] = None,
        trip_rate: float = DEFAULT_TRIP_RATE,
        renormalize: bool = False,
    ) -> ODMatrix:
        """
        Baseline flows for one city.

        Radiation uses the reference row sums as outflows when the city has
        reference flows, population times ``trip_rate`` otherwise.

        Args:
            model: "gravity" or "radiation"
            bundle: City
            params: Gravity parameters (default G=1, beta=2)
            trip_rate: Trips per person for the default radiation outflow
            renormalize: Scale radiation rows to their outflow

        Returns:
            ODMatrix in region-id order
        """
        distances = bundle.distances()
        if model == "gravity":
            od = gravity(bundle.geos, params or GravityParams(), distances=distances)
        elif model == "radiation":
            outflow = None
            if bundle.od is not None:
                outflow = bundle.od.reindexed(bundle.region_ids).F.sum(axis=1)
            od = radiation(bundle.geos, outflow, trip_rate, distances=distances, renormalize=renormalize)
        else:
            raise ValidationError(f"Unknown baseline model {model!r} (expected {' or '.join(MODELS)})")
        logger.info(f"{model} baseline for {bundle.name}: {od.total:.0f} trips")
        return od
