"""
Defines SolverOptionsFactory for loading named solver profiles from a JSON
configuration file and resolving them into typed option sets.
"""

import json
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from config import settings_manager
from solver_model.solver_options import EqOptions, MpecOptions, PipelineOptions, SoOptions, SolverProfile
from utils.logger import log

DEFAULT_CONFIG_FILE = Path(__file__).resolve().parents[1] / "config" / "solver_config.json"
DEFAULT_PROFILE = "default"


class SolverOptionsFactory:
    """
    Provides solver options for the profiles listed in the solver configuration file.
    """

    @staticmethod
    def config_file() -> Path:
        return Path(settings_manager.get_key("SOLVER_CONFIG_FILE") or DEFAULT_CONFIG_FILE)

    @staticmethod
    def load_config(config_file: Optional[Path] = None):
        """
        Loads the JSON configuration file.

        Returns:
            list: A list of single-key profile objects.

        Raises:
            FileNotFoundError: If the configuration file is not found.
            ValueError: If the configuration file is not valid JSON.
        """
        solver_config_file = Path(config_file) if config_file else SolverOptionsFactory.config_file()
        try:
            with open(solver_config_file, "r", encoding="utf-8") as file:
                return json.load(file)
        except FileNotFoundError as exception:
            raise FileNotFoundError(f"Configuration file '{solver_config_file}' not found.") from exception
        except json.JSONDecodeError as exception:
            raise ValueError(f"Invalid JSON in configuration file: {exception}") from exception

    @staticmethod
    def default_profile_name() -> str:
        return settings_manager.get_key("TOLLGRID_PROFILE") or DEFAULT_PROFILE

    @staticmethod
    def get_profile(profile_name: Optional[str] = None, config_file: Optional[Path] = None) -> SolverProfile:
        """
        Retrieves and validates the named profile; the pipeline inherits the profile's
        so/ue sections unless it sets its own.
        """
        profile_name = profile_name or SolverOptionsFactory.default_profile_name()
        config_list = SolverOptionsFactory.load_config(config_file)

        for profile_config in config_list:
            if profile_name in profile_config:
                raw_profile = dict(profile_config[profile_name])
                pipeline = dict(raw_profile.get("pipeline", {}))
                pipeline.setdefault("so", raw_profile.get("so", {}))
                pipeline.setdefault("ue", raw_profile.get("ue", {}))
                raw_profile["pipeline"] = pipeline
                try:
                    profile = SolverProfile.model_validate(raw_profile)
                except ValidationError as exception:
                    raise ValueError(f"Invalid solver profile '{profile_name}': {exception}") from exception
                log.debug("Solver profile '%s' loaded", profile_name)
                return profile

        raise ValueError(f"Invalid solver profile provided: {profile_name}")

    @staticmethod
    def with_overrides(profile: SolverProfile, seed: Optional[int] = None, tol: Optional[float] = None,
                       restarts: Optional[int] = None, threads: Optional[int] = None,
                       budget: Optional[int] = None) -> SolverProfile:
        """
        Applies command-line overrides to every section of a profile.
        """
        common = {}
        if seed is not None:
            common["seed"] = seed
        if threads is not None:
            common["threads"] = threads

        so_update = dict(common)
        ue_update = dict(common)
        mpec_update = dict(common)
        if tol is not None:
            so_update["tol"] = tol
            ue_update["tol"] = tol
        if restarts is not None:
            so_update["restarts"] = restarts
            ue_update["restarts"] = restarts
        if budget is not None:
            mpec_update["budget"] = budget

        so = SoOptions.model_validate({**profile.so.model_dump(), **so_update})
        ue = EqOptions.model_validate({**profile.ue.model_dump(), **ue_update})
        mpec = MpecOptions.model_validate({**profile.mpec.model_dump(), **mpec_update})
        pipeline = PipelineOptions.model_validate({
            **profile.pipeline.model_dump(),
            "so": {**profile.pipeline.so.model_dump(), **so_update},
            "ue": {**profile.pipeline.ue.model_dump(), **ue_update},
        })
        return SolverProfile(so=so, ue=ue, mpec=mpec, pipeline=pipeline)
