from typing import Optional

import environ

TRUTHY = ("y", "yes", "t", "true", "on", "1")
FALSY = ("n", "no", "f", "false", "off", "0")


def strtobool(value: str) -> int:
    value = value.strip().lower()
    if value in TRUTHY:
        return 1
    if value in FALSY:
        return 0
    raise ValueError(f"invalid truth value {value!r}")


class Converter:
    @staticmethod
    def int(value: Optional[str]) -> Optional[int]:
        return None if value is None else int(value)

    @staticmethod
    def list(value: Optional[str], delimiter=",", converter=str) -> Optional[list]:
        return None if value is None else list(map(converter, value.split(delimiter)))

    @staticmethod
    def bool(value: Optional[str]) -> Optional[bool]:
        return None if value is None else strtobool(value) == 1


@environ.config(prefix="NCK", frozen=True)
class AppConfig:
    @environ.config(prefix="OVERRIDES", frozen=True)
    class Overrides:
        data_path = environ.var(None)

    @environ.config(prefix="SETTINGS", frozen=True)
    class Settings:
        console_level = environ.var(None)
        logging = environ.var(None, converter=Converter.bool)
        workers = environ.var(None, converter=Converter.int)

    @environ.config(prefix="ANALYSIS", frozen=True)
    class Analysis:
        family_cap = environ.var(None, converter=Converter.int)
        pair_cap = environ.var(None, converter=Converter.int)

    # NCK_CAP: sample-count cap for Sym(X) enumeration
    cap = environ.var(None, converter=Converter.int)
    overrides: Overrides = environ.group(Overrides)
    settings: Settings = environ.group(Settings)
    analysis: Analysis = environ.group(Analysis)


ENVIRO_CONFIG: AppConfig = environ.to_config(AppConfig)
