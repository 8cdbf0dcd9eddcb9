"""
ToolNet Pipeline Run Storage Service
运行目录存储服务 - 场景、语料、结果文件的读写
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.core.error_handler import MissingInputError, SchemaValidationError
from app.models.world_models import WorldGraph
from app.schemas.corpus_schemas import DemoPlan
from config.settings import settings

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def _dump(record: Union[BaseModel, dict]) -> dict:
    if isinstance(record, BaseModel):
        return record.model_dump(mode="json", by_alias=True)
    return record


def _line(record: Union[BaseModel, dict]) -> str:
    # 固定键序，便于 diff 与逐字节比较
    return json.dumps(_dump(record), sort_keys=True, ensure_ascii=False)


class RunStorage:
    """一个运行目录下的全部输出文件"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def require(self, *parts: str) -> Path:
        """输入文件必须存在，否则 MissingInputError"""
        path = self.path(*parts)
        if not path.exists():
            raise MissingInputError(str(path))
        return path

    def _target(self, relative: Union[str, Path]) -> Path:
        path = self.root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # ------------------------------------------------------------ json / jsonl

    def write_json(self, relative: Union[str, Path], data: Union[BaseModel, dict, list]) -> Path:
        path = self._target(relative)
        payload = [_dump(d) for d in data] if isinstance(data, list) else _dump(data)
        path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        logger.debug(f"已写入 {path}")
        return path

    def read_json(self, relative: Union[str, Path]) -> Any:
        path = self.require(str(relative))
        return json.loads(path.read_text(encoding="utf-8"))

    def write_jsonl(self, relative: Union[str, Path], records: Iterable[Union[BaseModel, dict]]) -> Path:
        path = self._target(relative)
        count = 0
        with path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(_line(record) + "\n")
                count += 1
        logger.debug(f"已写入 {path} ({count} 行)")
        return path

    def read_jsonl(self, relative: Union[str, Path], model: Optional[Type[M]] = None) -> List[Any]:
        path = self.require(str(relative))
        out = []
        with path.open("r", encoding="utf-8") as fh:
            for line_number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    out.append(model.model_validate(data) if model is not None else data)
                except (json.JSONDecodeError, ValidationError) as e:
                    raise SchemaValidationError(f"{path}:{line_number}", str(e)) from e
        return out

    # ------------------------------------------------------------ csv / text

    def write_csv(self, relative: Union[str, Path], columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
        path = self._target(relative)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({c: row.get(c, "") for c in columns})
        return path

    def read_csv(self, relative: Union[str, Path]) -> List[Dict[str, str]]:
        path = self.require(str(relative))
        with path.open("r", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))

    def write_text(self, relative: Union[str, Path], text: str) -> Path:
        path = self._target(relative)
        path.write_text(text, encoding="utf-8")
        return path

    # ------------------------------------------------------------ domain files

    def scene_path(self, domain: str, seed: int) -> Path:
        return self.path(settings.SCENES_DIRNAME, f"{domain}_{seed:04d}.json")

    def save_scene(self, w: WorldGraph) -> Path:
        return self.write_json(self.scene_path(w.domain, w.seed).relative_to(self.root), w.to_dict())

    def load_scene(self, domain: str, seed: int) -> WorldGraph:
        path = self.scene_path(domain, seed)
        if not path.is_file():
            raise MissingInputError(str(path))
        return WorldGraph.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def save_corpus(self, plans: Iterable[DemoPlan], name: str = settings.CORPUS_FILENAME) -> Path:
        return self.write_jsonl(name, plans)

    def load_corpus(self, name: str = settings.CORPUS_FILENAME) -> List[DemoPlan]:
        return self.read_jsonl(name, DemoPlan)


def get_storage_service(root: Optional[Union[str, Path]] = None) -> RunStorage:
    """获取运行目录存储实例"""
    return RunStorage(root if root is not None else settings.DATA_DIR)
