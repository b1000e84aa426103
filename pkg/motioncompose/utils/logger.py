# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import logging
import os
import sys
from typing import Optional, Union


class Logger(logging.Logger):
    """Writes every record to `<dump_folder>/<name>.<extension_name>`; plain logs are echoed to stdout as well.

    Each call takes an optional `tag` naming the component that emits it (e.g. "VAE", "Sampler"). Loggers with another
    extension (csv loss and sample tables) keep their rows in the file only.
    """

    def __init__(
        self, name: str, level: Union[int, str] = logging.INFO,
        dump_mode: str = "w", dump_folder: str = "./", extension_name: str = "log",
    ) -> None:
        super().__init__(name, logging.NOTSET)

        # Workers of a thread pool may create the same folder concurrently.
        os.makedirs(dump_folder, exist_ok=True)

        self.dump_path: str = os.path.join(dump_folder, f"{name}.{extension_name}")
        file_handler = logging.FileHandler(filename=self.dump_path, mode=dump_mode, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        self.addHandler(file_handler)

        if extension_name == "log":
            stdout_handler = logging.StreamHandler(sys.stdout)
            stdout_handler.setLevel(os.environ.get("LOG_LEVEL") or level)
            stdout_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s", "%H:%M:%S"))
            self.addHandler(stdout_handler)

    @staticmethod
    def _tagged(msg: str, tag: Optional[str]) -> str:
        return msg if tag is None else f"[{tag}] {msg}"

    def debug(self, msg, tag: str = None) -> None:
        super().debug(self._tagged(msg, tag))

    def info(self, msg, tag: str = None) -> None:
        super().info(self._tagged(msg, tag))

    def warning(self, msg, tag: str = None) -> None:
        super().warning(self._tagged(msg, tag))

    def error(self, msg, tag: str = None) -> None:
        super().error(self._tagged(msg, tag))

    def exception(self, msg, tag: str = None) -> None:
        super().exception(self._tagged(msg, tag))

    def close(self) -> None:
        for handler in list(self.handlers):
            handler.close()
            self.removeHandler(handler)
        return
