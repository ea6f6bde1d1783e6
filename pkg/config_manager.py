import json
import logging
import os
from dataclasses import fields
from datetime import datetime

from exceptions import ConfigError
from trainer import TrainConfig

# short names used in the literature and accepted in config files
ALIASES = {"K": "hops", "d": "samples", "D": "embedding_dim", "L": "layers"}


class ConfigManager:
    """Resolve training configuration from defaults, JSON files/profiles and overrides"""

    def __init__(self, profiles_dir="configs", logger=None):
        """Initialize the config manager with the profiles directory"""
        self.profiles_dir = profiles_dir
        self.logger = logger or logging.getLogger('SEHSSL')
        self._types = {f.name: f.type for f in fields(TrainConfig)}

    def _coerce(self, key, value):
        """Convert a raw value to the declared type of a TrainConfig field"""
        name = ALIASES.get(key, key)
        if name not in self._types:
            raise ConfigError(f"Unknown configuration key: {key}")
        kind = self._types[name]
        try:
            if kind in (bool, "bool"):
                if not isinstance(value, bool):
                    raise TypeError("expected true/false")
                return name, value
            if kind in (int, "int"):
                if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                    raise TypeError("expected an integer")
                return name, int(value)
            if kind in (float, "float"):
                if isinstance(value, bool):
                    raise TypeError("expected a number")
                return name, float(value)
            return name, str(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid value for {key}: {value!r} ({e})") from None

    def normalize(self, raw):
        """Map a flat dict onto TrainConfig field names with coerced values"""
        if not isinstance(raw, dict):
            raise ConfigError("Configuration must be a flat JSON object")
        values = {}
        for key, value in raw.items():
            if key == "Metadata":
                continue
            name, coerced = self._coerce(key, value)
            values[name] = coerced
        return values

    def load_file(self, path):
        """Read a flat JSON configuration file"""
        if not os.path.isfile(path):
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse config {path}: {e}") from e
        return self.normalize(raw)

    def resolve(self, config_file=None, profile=None, overrides=None):
        """Defaults, then a profile or file, then explicit overrides"""
        values = {}
        if profile:
            values.update(self.load_file(self.profile_path(profile)))
        if config_file:
            values.update(self.load_file(config_file))
        if overrides:
            values.update(self.normalize({k: v for k, v in overrides.items() if v is not None}))
        config = TrainConfig(**values).validate()
        self.logger.debug(f"Resolved configuration: {config.to_dict()}")
        return config

    def profile_path(self, profile_name):
        return os.path.join(self.profiles_dir, f"{profile_name}.json")

    def save_profile(self, config: TrainConfig, profile_name):
        """Save a configuration as a named profile"""
        if not profile_name:
            raise ConfigError("Profile name cannot be empty")
        os.makedirs(self.profiles_dir, exist_ok=True)

        config_dict = config.to_dict()
        config_dict["Metadata"] = {
            "created": datetime.now().isoformat(),
            "profile_name": profile_name
        }

        profile_file = self.profile_path(profile_name)
        with open(profile_file, "w", encoding="utf-8") as f:
            json.dump(config_dict, f, indent=4)
        self.logger.info(f"Saved profile {profile_name} to {profile_file}")
        return profile_file

    def load_profile(self, profile_name):
        """Load a named profile on top of the defaults"""
        if not os.path.isfile(self.profile_path(profile_name)):
            raise ConfigError(f"Profile '{profile_name}' not found in {self.profiles_dir}")
        return self.resolve(profile=profile_name)

    def list_profiles(self):
        """List all available profiles"""
        if not os.path.isdir(self.profiles_dir):
            return []
        return sorted(os.path.splitext(name)[0] for name in os.listdir(self.profiles_dir)
                      if name.endswith(".json"))
