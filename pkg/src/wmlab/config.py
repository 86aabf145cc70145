"""Project-level path configuration.
Configuration is read from `config.json` and the git-ignored file `config_local.json`
(create it yourself if you need to override paths locally) and merged.
"""

import os
from pathlib import Path

from accsr.config import ConfigProviderBase, DefaultDataConfiguration

from wmlab.constants import ENV_OUTPUT_DIR
from wmlab.types import PathLike

file_dir = os.path.dirname(__file__) if "__file__" in locals() else os.getcwd()

top_level_directory: str = os.path.abspath(os.path.join(file_dir, os.pardir, os.pardir))


class __Configuration(DefaultDataConfiguration):
    def results_dir(self) -> str:
        return self._get_existing_path("results", create=True)

    def default_experiment_config_path(self) -> str:
        """:return: absolute path of the experiment configuration used when none is passed explicitly"""
        return self._get_existing_path("default_experiment_config", create=False)

    def resolve_output_dir(
        self,
        cli_out: PathLike | None = None,
        config_out: PathLike | None = None,
    ) -> Path:
        """Resolves the directory into which a run writes its artifacts.

        Precedence: explicit flag, then the experiment config, then the environment variable
        `WMLAB_OUT`, then the configured results directory.
        """
        for candidate in (cli_out, config_out, os.environ.get(ENV_OUTPUT_DIR) or None):
            if candidate is not None:
                return Path(candidate).absolute()
        return Path(self.results_dir())


class ConfigProvider(ConfigProviderBase[__Configuration]):
    pass


_config_provider = ConfigProvider()


def get_config(reload: bool = False) -> __Configuration:
    """:param reload: if True, the configuration will be reloaded from the json files
    :return: the configuration instance
    """
    return _config_provider.get_config(reload=reload, config_directory=top_level_directory)
