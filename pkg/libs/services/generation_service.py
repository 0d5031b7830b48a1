"""Training and sampling over city bundles on disk."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from libs.diffusion.artifacts import TrainedModel, load_trained, save_trained
from libs.diffusion.odmatrix import ODMatrix
from libs.diffusion.process import ReverseVariance
from libs.diffusion.sampler import generate
from libs.diffusion.trainer import TrainConfig, TrainingCity, train
from libs.errors import ValidationError
from libs.features.conditions import ConditionSet, FeatureStats, build_conditions, fit_feature_stats
from libs.ingest.city import CityBundle, load_city_dir
from libs.ingest.corpus import has_split, load_corpus
from libs.utils.rng import stream

logger = logging.getLogger(__name__)


class GenerationService:
    """Service for the train and generate stages."""

    @staticmethod
    def conditions(bundle: CityBundle, stats: Optional[FeatureStats] = None) -> ConditionSet:
        """
        Condition set of a city, standardized with ``stats`` (fitted on the city when omitted).

        Args:
            bundle: City with embeddings
            stats: Feature statistics of the training corpus

        Returns:
            ConditionSet carrying the centroid distance matrix
        """
        if not bundle.features:
            raise ValidationError(f"City {bundle.name} has no embeddings")
        return build_conditions(bundle.features, stats, bundle.distances())

    @staticmethod
    def pooled_stats(bundles: Sequence[CityBundle]) -> FeatureStats:
        for bundle in bundles:
            if not bundle.features:
                raise ValidationError(f"City {bundle.name} has no embeddings")
        return fit_feature_stats([f for bundle in bundles for f in bundle.features])

    @staticmethod
    def training_cities(bundles: Sequence[CityBundle], stats: FeatureStats) -> list[TrainingCity]:
        cities = []
        for bundle in bundles:
            if bundle.od is None:
                raise ValidationError(f"City {bundle.name} has no reference OD matrix")
            cities.append((bundle.od, GenerationService.conditions(bundle, stats)))
        return cities

    @staticmethod
    def train_bundles(
        train_bundles: Sequence[CityBundle],
        config: TrainConfig,
        validation_bundles: Optional[Sequence[CityBundle]] = None,
        resume: Optional[TrainedModel] = None,
    ) -> TrainedModel:
        """
        Train on in-memory bundles; feature statistics are pooled over the training cities.

        Args:
            train_bundles: Training cities (embeddings and reference OD required)
            config: Training hyperparameters
            validation_bundles: Held-out cities; None lets the trainer hold out a share
            resume: Earlier run to continue (its feature statistics are kept)

        Returns:
            TrainedModel
        """
        stats = resume.feature_stats if resume is not None else GenerationService.pooled_stats(train_bundles)
        corpus = GenerationService.training_cities(train_bundles, stats)
        validation = None
        if validation_bundles is not None:
            validation = GenerationService.training_cities(validation_bundles, stats)
        return train(corpus, config, validation=validation, resume=resume)

    @staticmethod
    def train_corpus(
        corpus_dir: Union[str, Path],
        config: TrainConfig,
        out_path: Union[str, Path],
        resume_path: Optional[Union[str, Path]] = None,
    ) -> TrainedModel:
        """
        Train on a corpus directory and write the checkpoint.

        With a ``split.csv`` the ``train`` cities are trained on and the ``val``
        cities validate; without one, every city is used and the trainer holds
        out ``config.validation_split`` of them.
        """
        if has_split(corpus_dir):
            train_bundles = load_corpus(corpus_dir, splits=("train",))
            validation_bundles = load_corpus(corpus_dir, splits=("val",))
        else:
            train_bundles = load_corpus(corpus_dir)
            validation_bundles = None
        resume = load_trained(resume_path) if resume_path is not None else None
        trained = GenerationService.train_bundles(train_bundles, config, validation_bundles, resume)
        save_trained(out_path, trained)
        return trained

    @staticmethod
    def generate_bundle(
        trained: TrainedModel,
        bundle: CityBundle,
        seed: int = 0,
        variance: Union[ReverseVariance, str] = ReverseVariance.POSTERIOR,
        n_samples: int = 1,
        shuffle_embeddings: bool = False,
    ) -> ODMatrix:
        """
        Sample flows for one city.

        Args:
            trained: Loaded checkpoint
            bundle: City with embeddings
            seed: Seed of the sampling stream
            variance: Reverse-step variance rule
            n_samples: Chains averaged before rounding
            shuffle_embeddings: Permute embedding rows across regions (ablation)

        Returns:
            ODMatrix in region-id order
        """
        cond = GenerationService.conditions(bundle, trained.feature_stats)
        if shuffle_embeddings:
            cond = cond.shuffled_embeddings(stream(seed, "ablation"))
        return generate(
            trained.model,
            trained.codec,
            cond,
            trained.schedule,
            rng=stream(seed, "sampling"),
            variance=variance,
            n_samples=n_samples,
        )

    @staticmethod
    def generate_city(
        ckpt_path: Union[str, Path],
        city_dir: Union[str, Path],
        seed: int = 0,
        variance: Union[ReverseVariance, str] = ReverseVariance.POSTERIOR,
        n_samples: int = 1,
    ) -> ODMatrix:
        trained = load_trained(ckpt_path)
        bundle = load_city_dir(city_dir)
        od = GenerationService.generate_bundle(trained, bundle, seed, variance, n_samples)
        logger.info(f"Generated {od.n_regions}x{od.n_regions} flows for {bundle.name} ({od.total:.0f} trips)")
        return od
