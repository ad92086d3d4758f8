"""scikit-learn style wrappers so the analyses compose with pipelines."""

from __future__ import annotations

import dataclasses
from os import PathLike
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .framework import RatingSheet, validate_sheet
from .providers import DEFAULT_MODEL, Provider, Variant
from .rater import DEFAULT_REPEATS, RatingRun, rate_project
from .scratch_ir import Project, load_path, load_project
from .smells import HEURISTIC_CRITERIA, ConceptProfile, DetectorConfig, StereotypeSmell, concept_profile, run_heuristics
from .stats import verdict_tally


def check_projects(X: Iterable) -> list[Project]:
    """Coerce paths, raw ``.sb3`` bytes or loaded projects into a list of projects."""
    if isinstance(X, (str, bytes, PathLike, Project)):
        X = [X]
    out = []
    for item in X:
        if isinstance(item, Project):
            out.append(item)
        elif isinstance(item, (bytes, bytearray)):
            out.append(load_project(bytes(item)))
        elif isinstance(item, (str, PathLike)):
            out.append(load_path(item))
        else:
            raise TypeError(f"cannot interpret {type(item).__name__} as a Scratch project")
    if not out:
        raise ValueError("no projects given")
    return out


def check_sheets(sheets: Iterable) -> list[RatingSheet]:
    """Coerce dicts to sheets and validate every one."""
    out = []
    for s in sheets:
        sheet = RatingSheet.from_dict(s) if isinstance(s, Mapping) else s
        if not isinstance(sheet, RatingSheet):
            raise TypeError(f"expected RatingSheet or mapping, got {type(s).__name__}")
        out.append(validate_sheet(sheet))
    return out


_PROFILE_FIELDS = tuple(f.name for f in dataclasses.fields(ConceptProfile))


class ConceptProfiler(TransformerMixin, BaseEstimator):
    """Projects to a matrix of programming-concept counts."""

    def fit(self, X, y=None):
        check_projects(X)
        self.n_features_out_ = len(_PROFILE_FIELDS)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self)
        rows = [dataclasses.astuple(concept_profile(p)) for p in check_projects(X)]
        return np.asarray(rows, dtype=np.int64)

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray(_PROFILE_FIELDS, dtype=object)


class SmellTransformer(TransformerMixin, BaseEstimator):
    """Projects to a matrix of the highest heuristic severity per criterion (0 = none)."""

    def __init__(self, config: DetectorConfig | None = None, descriptions: Sequence[str] | None = None, rasterizer=None):
        self.config = config
        self.descriptions = descriptions
        self.rasterizer = rasterizer

    def fit(self, X, y=None):
        check_projects(X)
        self.criteria_ = HEURISTIC_CRITERIA
        return self

    def smells(self, X) -> list[list[StereotypeSmell]]:
        projects = check_projects(X)
        descriptions = list(self.descriptions) if self.descriptions is not None else [""] * len(projects)
        if len(descriptions) != len(projects):
            raise ValueError(f"{len(descriptions)} descriptions for {len(projects)} projects")
        return [run_heuristics(p, self.config, d, self.rasterizer) for p, d in zip(projects, descriptions)]

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self)
        found = self.smells(X)
        out = np.zeros((len(found), len(self.criteria_)), dtype=np.int64)
        for i, smells in enumerate(found):
            for s in smells:
                j = self.criteria_.index(s.criterion_id)
                out[i, j] = max(out[i, j], int(s.severity))
        return out

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray(HEURISTIC_CRITERIA, dtype=object)


class LLMRater(BaseEstimator):
    """Repeated model ratings; ``predict`` returns the majority verdict (``None`` on a tie)."""

    def __init__(
        self,
        provider: Provider | None = None,
        variant: str = "framework",
        repeats: int = DEFAULT_REPEATS,
        model_name: str = DEFAULT_MODEL,
        temperature: float | None = None,
        descriptions: Sequence[str] | None = None,
    ):
        self.provider = provider
        self.variant = variant
        self.repeats = repeats
        self.model_name = model_name
        self.temperature = temperature
        self.descriptions = descriptions

    def fit(self, X=None, y=None):
        if self.provider is None:
            raise ValueError("LLMRater needs a provider")
        Variant(self.variant)
        self.fitted_ = True
        return self

    def rate(self, X) -> list[RatingRun]:
        check_is_fitted(self)
        projects = check_projects(X)
        descriptions = list(self.descriptions) if self.descriptions is not None else [""] * len(projects)
        return [
            rate_project(
                p,
                d,
                Variant(self.variant),
                self.provider,
                repeats=self.repeats,
                project_id=p.source_path or f"project-{i}",
                model_name=self.model_name,
                temperature=self.temperature,
            )
            for i, (p, d) in enumerate(zip(projects, descriptions))
        ]

    def predict(self, X) -> np.ndarray:
        out = []
        for run in self.rate(X):
            majority = verdict_tally(run.sheets).majority if run.sheets else None
            out.append(majority.value if majority else None)
        return np.asarray(out, dtype=object)
