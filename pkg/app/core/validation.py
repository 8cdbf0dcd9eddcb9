"""
ToolNet Pipeline Output Validation
输出文件校验模块：重新读取写出的文件并逐条按 schema 验证
"""

import csv
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Type, Union

from pydantic import BaseModel, ValidationError

from app.core.error_handler import MissingInputError, SchemaValidationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class OutputValidator:
    """输出验证器"""

    @staticmethod
    def _existing(path: PathLike) -> Path:
        path = Path(path)
        if not path.is_file():
            raise MissingInputError(str(path))
        return path

    @staticmethod
    def validate_jsonl(path: PathLike, model: Type[BaseModel]) -> int:
        """逐行验证，返回记录数"""
        path = OutputValidator._existing(path)
        count = 0
        with path.open("r", encoding="utf-8") as fh:
            for line_number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    model.model_validate(json.loads(line))
                except (json.JSONDecodeError, ValidationError) as e:
                    raise SchemaValidationError(f"{path}:{line_number}", str(e)) from e
                count += 1
        return count

    @staticmethod
    def validate_json(path: PathLike, model: Type[BaseModel], many: bool = False) -> int:
        """整个文件是一个文档，many=True 时是文档列表"""
        path = OutputValidator._existing(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            documents = data if many else [data]
            if many and not isinstance(data, list):
                raise SchemaValidationError(str(path), "expected a list of documents")
            for document in documents:
                model.model_validate(document)
        except (json.JSONDecodeError, ValidationError) as e:
            raise SchemaValidationError(str(path), str(e)) from e
        return len(documents)

    @staticmethod
    def validate_csv(path: PathLike, model: Type[BaseModel], columns: Sequence[str]) -> int:
        path = OutputValidator._existing(path)
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if list(reader.fieldnames or []) != list(columns):
                raise SchemaValidationError(str(path), f"expected columns {', '.join(columns)}")
            count = 0
            for line_number, row in enumerate(reader, start=2):
                try:
                    model.model_validate(row)
                except ValidationError as e:
                    raise SchemaValidationError(f"{path}:{line_number}", str(e)) from e
                count += 1
        return count

    @staticmethod
    def validate_text(path: PathLike, required: Iterable[str] = ()) -> int:
        path = OutputValidator._existing(path)
        text = path.read_text(encoding="utf-8")
        for marker in required:
            if marker not in text:
                raise SchemaValidationError(str(path), f"missing section '{marker}'")
        return 1


# (path, model, kind) ；kind: jsonl | json | json-list | csv
OutputSpec = Tuple[PathLike, Optional[Type[BaseModel]], str]


def validate_outputs(outputs: Sequence[OutputSpec], csv_columns: Sequence[str] = ()) -> List[str]:
    """校验全部输出；任何一条不合规即抛出 SchemaValidationError"""
    checked: List[str] = []
    for path, model, kind in outputs:
        if kind == "jsonl":
            count = OutputValidator.validate_jsonl(path, model)
        elif kind == "json":
            count = OutputValidator.validate_json(path, model)
        elif kind == "json-list":
            count = OutputValidator.validate_json(path, model, many=True)
        elif kind == "csv":
            count = OutputValidator.validate_csv(path, model, csv_columns)
        else:
            count = OutputValidator.validate_text(path)
        logger.debug(f"已验证 {path} ({count} 条记录)")
        checked.append(str(path))
    return checked
