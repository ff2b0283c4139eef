import pathlib

from neuraCrypt.env_config import ENVIRO_CONFIG

if (
    ENVIRO_CONFIG.overrides.data_path is None
    or not (p := pathlib.Path(ENVIRO_CONFIG.overrides.data_path)).exists()
):
    HOME_PATH = pathlib.Path().absolute().joinpath(".config")
else:
    HOME_PATH = p

LOGS_FOLDER = HOME_PATH.joinpath("logs")
