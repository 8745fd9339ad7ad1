"""
Extended pydantic.BaseModel with JSON defaults and report file helpers.
"""

import os
from typing import Any
import aiofiles
from pydantic import BaseModel

from hmaflow.etc.utils import ensure_parent_directory


class JsonModel(BaseModel):
    """
    A BaseModel that serialises using `mode='json'` by default
    """

    def model_dump(self, *, mode: str = "json", **kwargs: Any) -> dict:
        return super().model_dump(mode=mode, **kwargs)

    async def save_json(self, path: str | os.PathLike, indent: int = 2):
        """
        Write the model as a JSON document, creating parent directories as needed.
        :param path: The destination file.
        :param indent: JSON indentation width.
        """
        ensure_parent_directory(path)
        async with aiofiles.open(path, mode='w', encoding='utf-8') as f:
            await f.write(self.model_dump_json(indent=indent))
            await f.write('\n')

    @classmethod
    async def load_json(cls, path: str | os.PathLike):
        """
        Read and validate a JSON document written by `save_json`.
        """
        async with aiofiles.open(path, mode='r', encoding='utf-8') as f:
            return cls.model_validate_json(await f.read())
