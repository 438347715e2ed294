"""
Settings Class for Stratified HJB.

This module contains the Settings class that manages run defaults.
"""

import os
import json
from typing import Any, Dict, Optional

from stratified_hjb.utils.logging_utils import get_module_logger


class Settings:
    """Settings class for Stratified HJB."""

    def __init__(self, load_file: bool = True):
        """
        Initialize default settings.

        Args:
            load_file: Read overrides from settings.json in the app data directory
        """
        self.logger = get_module_logger("Settings")

        # Run settings
        self.threads = 1
        self.output_directory = "results"
        self.log_level = "INFO"
        self.log_to_file = True

        # Overrides the per-problem tolerance factor of the checks when set
        self.tolerance_factor: Optional[float] = None

        if load_file:
            self._load_settings()

    def get_app_data_dir(self) -> str:
        """
        Get the application data directory.

        Returns:
            Application data directory path
        """
        home = os.environ.get("STRATIFIED_HJB_HOME")
        if home:
            return home
        return os.path.join(os.path.expanduser("~"), ".stratified_hjb")

    def get_settings_path(self) -> str:
        """
        Get the settings file path.

        Returns:
            Settings file path
        """
        return os.path.join(self.get_app_data_dir(), "settings.json")

    def _load_settings(self) -> None:
        """Load settings from file."""
        settings_path = self.get_settings_path()

        if not os.path.exists(settings_path):
            return

        try:
            with open(settings_path, 'r', encoding='utf-8') as f:
                settings_dict = json.load(f)

            for key, value in settings_dict.items():
                if hasattr(self, key) and key != "logger":
                    setattr(self, key, value)
            self.logger.info(f"Loaded settings from {settings_path}")
        except Exception as e:
            self.logger.warning(f"Error loading settings: {str(e)}")

    def apply_overrides(self, **overrides: Any) -> None:
        """
        Apply command line overrides; None values leave the setting untouched.

        Args:
            **overrides: Setting names mapped to new values
        """
        for key, value in overrides.items():
            if value is None:
                continue
            if not hasattr(self, key):
                raise AttributeError(f"Unknown setting: {key}")
            setattr(self, key, value)

    def as_dict(self) -> Dict[str, Any]:
        """
        Get the settings as a plain dictionary.

        Returns:
            Settings dictionary
        """
        return {
            "threads": self.threads,
            "output_directory": self.output_directory,
            "log_level": self.log_level,
            "log_to_file": self.log_to_file,
            "tolerance_factor": self.tolerance_factor,
        }
