"""
Append-only JSON-lines log of training epochs. Keys are sorted so identical
runs produce identical files.
"""
import json
from pathlib import Path
from typing import Union

import aiofiles


def format_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True) + "\n"


class RunLog:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    async def reset(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(self.path, "w", encoding="utf-8") as f:
            await f.write("")

    async def append(self, record: dict):
        async with aiofiles.open(self.path, "a", encoding="utf-8") as f:
            await f.write(format_record(record))

    async def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        async with aiofiles.open(self.path, encoding="utf-8") as f:
            text = await f.read()
        return [json.loads(line) for line in text.splitlines() if line.strip()]
