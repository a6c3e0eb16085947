"""
Configuration service for loading forge settings.

This service provides centralized configuration management with:
- Azure App Configuration integration for shared settings
- Fallback to a local JSON file for development
- Built-in defaults and environment overrides
- Caching for repeated CLI calls in one process
"""

import logging
import json
import os
from pathlib import Path
from typing import Optional

from azure.appconfiguration import AzureAppConfigurationClient

from utils.exceptions import ConfigurationError, InvalidInputError
from utils.validators import parse_budget, parse_rational


CONFIG_KEY = "forge_config"

DEFAULT_CONFIG = {
    "lambda0": "1/6",
    "epsilon0": "1/20",
    "oracle_budget": [3, 4],
    "norm_budget": [2, 2],
    "tune_cap": 10,
    "threads": 1,
    "reference_piece_limit": 64,
    "neighbour_piece_limit": 2000000,
    "cnf_cap": 256,
    "finite_budget": 10000000,
    "seed": 0,
    "log_level": "INFO",
}

POSITIVE_INT_KEYS = ("tune_cap", "threads", "cnf_cap", "finite_budget")
NON_NEGATIVE_INT_KEYS = ("reference_piece_limit", "neighbour_piece_limit", "seed")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigService:
    """Service for loading configuration from Azure App Configuration or local files."""

    # Module-level cache for configuration (singleton pattern)
    _app_config_client: Optional[AzureAppConfigurationClient] = None
    _forge_config_cache: Optional[dict] = None
    _forge_config_cache_key: Optional[tuple] = None

    def __init__(self, app_config_connection_string: str | None = None,
                 config_path: str | None = None):
        """
        Initialize Configuration service.

        Args:
            app_config_connection_string: Azure App Configuration connection string
                If None, will try to load from FORGE_APP_CONFIG_CONNECTION_STRING env var
            config_path: Local JSON file; defaults to FORGE_CONFIG_PATH or
                forge_config.json at the repository root
        """
        self.app_config_connection_string = (
            app_config_connection_string or
            os.environ.get("FORGE_APP_CONFIG_CONNECTION_STRING")
        )
        self.config_path = Path(
            config_path or
            os.environ.get("FORGE_CONFIG_PATH") or
            Path(__file__).parent.parent / "forge_config.json"
        )

        if self.app_config_connection_string:
            logging.debug("ConfigService initialized with Azure App Configuration")
        else:
            logging.debug("ConfigService initialized in local-only mode (no App Configuration)")

    def _get_app_config_client(self) -> AzureAppConfigurationClient | None:
        """
        Get Azure App Configuration client (with caching).

        Returns:
            AzureAppConfigurationClient or None if not configured
        """
        if not self.app_config_connection_string:
            return None

        if ConfigService._app_config_client:
            return ConfigService._app_config_client

        try:
            logging.info("Initializing Azure App Configuration client")
            ConfigService._app_config_client = AzureAppConfigurationClient.from_connection_string(
                self.app_config_connection_string
            )
            return ConfigService._app_config_client

        except Exception as e:
            logging.warning(
                f"Failed to initialize App Configuration client: {str(e)}. "
                f"Falling back to local configuration file."
            )
            return None

    def _load_from_app_config(self, key: str) -> dict | None:
        """
        Load configuration from Azure App Configuration.

        Args:
            key: Configuration key (e.g., "forge_config")

        Returns:
            dict: Parsed JSON configuration or None if not found/available
        """
        client = self._get_app_config_client()
        if not client:
            return None

        try:
            logging.info(f"Loading configuration '{key}' from Azure App Configuration")
            config_setting = client.get_configuration_setting(key=key)

            if not config_setting or not config_setting.value:
                logging.warning(f"Configuration key '{key}' not found in App Configuration")
                return None

            return json.loads(config_setting.value)

        except json.JSONDecodeError as e:
            logging.error(f"Invalid JSON in App Configuration key '{key}': {str(e)}")
            return None
        except Exception as e:
            logging.warning(
                f"Failed to load '{key}' from App Configuration: {str(e)}. "
                f"Falling back to local file."
            )
            return None

    def _load_from_local_file(self, file_path: Path) -> dict | None:
        """
        Load configuration from local JSON file.

        Args:
            file_path: Path to JSON configuration file

        Returns:
            dict: Parsed JSON configuration or None if not found
        """
        if not file_path.exists():
            logging.debug(f"Local config file not found: {file_path}")
            return None

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                config_data = json.load(f)
            logging.info(f"Loaded configuration from local file: {file_path}")
            return config_data

        except json.JSONDecodeError as e:
            logging.error(f"Invalid JSON in {file_path}: {str(e)}")
            return None
        except Exception as e:
            logging.error(f"Failed to load {file_path}: {str(e)}")
            return None

    def _apply_environment_overrides(self, config: dict) -> dict:
        threads = os.environ.get("FORGE_THREADS")
        if threads:
            try:
                config["threads"] = int(threads)
            except ValueError as e:
                raise ConfigurationError(f"FORGE_THREADS must be an integer, got '{threads}'", e)
        log_level = os.environ.get("FORGE_LOG_LEVEL")
        if log_level:
            config["log_level"] = log_level.upper()
        return config

    def _validate(self, config: dict) -> dict:
        """
        Validate configuration values.

        Raises:
            ConfigurationError: If a value has the wrong type or is out of range
        """
        unknown = sorted(set(config) - set(DEFAULT_CONFIG))
        if unknown:
            logging.warning(f"Ignoring unknown configuration keys: {', '.join(unknown)}")
            for key in unknown:
                config.pop(key)

        try:
            parse_rational(config["lambda0"], open_unit_interval=True)
            parse_rational(config["epsilon0"], open_unit_interval=True)
            config["oracle_budget"] = list(parse_budget(config["oracle_budget"]))
            config["norm_budget"] = list(parse_budget(config["norm_budget"]))
        except InvalidInputError as e:
            raise ConfigurationError(f"Invalid configuration value: {e.message}", e)

        for key in POSITIVE_INT_KEYS:
            value = config[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"Configuration '{key}' must be a positive integer, got {value!r}")
        for key in NON_NEGATIVE_INT_KEYS:
            value = config[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigurationError(f"Configuration '{key}' must be a non-negative integer, got {value!r}")
        if config["log_level"] not in LOG_LEVELS:
            raise ConfigurationError(f"Configuration 'log_level' must be one of {', '.join(LOG_LEVELS)}")
        return config

    def _cache_key(self) -> tuple:
        return (
            self.app_config_connection_string,
            str(self.config_path),
            os.environ.get("FORGE_THREADS"),
            os.environ.get("FORGE_LOG_LEVEL"),
        )

    def get_forge_config(self) -> dict:
        """
        Get forge configuration.

        Loading priority:
        1. Cached configuration (if loaded from the same sources and overrides)
        2. Azure App Configuration key 'forge_config' (if configured)
        3. Local forge_config.json file
        4. Built-in defaults

        Environment overrides (FORGE_THREADS, FORGE_LOG_LEVEL) are applied last.

        Returns:
            dict: Validated configuration with every key present

        Raises:
            ConfigurationError: If a configured value is invalid
        """
        cache_key = self._cache_key()
        if ConfigService._forge_config_cache and ConfigService._forge_config_cache_key == cache_key:
            logging.debug("Using cached forge configuration")
            return dict(ConfigService._forge_config_cache)

        config_data = self._load_from_app_config(CONFIG_KEY)

        if not config_data:
            config_data = self._load_from_local_file(self.config_path)

        if config_data is not None and not isinstance(config_data, dict):
            raise ConfigurationError("Forge configuration must be a JSON object")

        config = dict(DEFAULT_CONFIG)
        config.update(config_data or {})
        config = self._validate(self._apply_environment_overrides(config))

        ConfigService._forge_config_cache = config
        ConfigService._forge_config_cache_key = cache_key
        return dict(config)

    def clear_cache(self):
        """Clear cached configuration (useful for testing or forcing reload)."""
        ConfigService._forge_config_cache = None
        ConfigService._forge_config_cache_key = None
        logging.debug("Configuration cache cleared")
