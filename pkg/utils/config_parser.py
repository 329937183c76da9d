import dataclasses
import logging
import re
from pathlib import Path

from models.exceptions import ConfigParseError
from models.twin_experiment import REQUIRED_KEYS, ExperimentConfig, format_value

logger = logging.getLogger(__name__)

LINE_PATTERN = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
TRUE_WORDS = {"true", "yes", "on", "1"}
FALSE_WORDS = {"false", "no", "off", "0"}


def _field_types():
    return {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


class ConfigParser:
    """Flat `key = value` experiment files with `#` comments"""

    def __init__(self):
        self.types = _field_types()

    def strip_comment(self, line):
        return line.split("#", 1)[0].rstrip()

    def convert(self, key, text, line_number):
        kind = self.types[key]
        kind = getattr(kind, "__name__", str(kind))
        try:
            if kind == "bool":
                word = text.lower()
                if word in TRUE_WORDS:
                    return True
                if word in FALSE_WORDS:
                    return False
                raise ValueError(text)
            if kind == "int":
                number = float(text)
                if number != int(number):
                    raise ValueError(text)
                return int(number)
            if kind == "float":
                return float(text)
        except ValueError:
            raise ConfigParseError(f"Invalid value {text!r} for {key} (expected {kind})", key=key, line=line_number)
        # str and Optional[str]
        return text if text else None

    def parse_text(self, text):
        values, lines = {}, {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = self.strip_comment(raw)
            if not line.strip():
                continue
            match = LINE_PATTERN.match(line)
            if not match:
                raise ConfigParseError(f"Expected 'key = value', got {raw.strip()!r}", line=number)
            key, value = match.group(1), match.group(2)
            if key not in self.types:
                raise ConfigParseError(f"Unknown key {key!r}", key=key, line=number)
            if key in values:
                raise ConfigParseError(f"Duplicate key {key!r}", key=key, line=number)
            values[key] = self.convert(key, value, number)
            lines[key] = number

        for key in REQUIRED_KEYS:
            if key not in values:
                raise ConfigParseError(f"Missing required key {key!r}", key=key)
        try:
            return ExperimentConfig(**values)
        except ConfigParseError as exc:
            if exc.key in lines and exc.line is None:
                raise ConfigParseError(str(exc), key=exc.key, line=lines[exc.key]) from None
            raise

    def load(self, path):
        path = Path(path)
        logger.debug("Loading experiment config %s", path)
        return self.parse_text(path.read_text(encoding="utf-8"))

    def dump(self, cfg):
        lines = [f"{key} = {format_value(getattr(cfg, key))}" for key in self.types
                 if getattr(cfg, key) is not None]
        return "\n".join(lines) + "\n"


def load_config(path):
    return ConfigParser().load(path)


def write_config(cfg, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ConfigParser().dump(cfg), encoding="utf-8")
    return path
