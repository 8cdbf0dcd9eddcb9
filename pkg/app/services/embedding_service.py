"""
ToolNet Pipeline Embedding Service
词向量提供者：哈希、文本表文件、内置知识库聚类表
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.error_handler import ContractError, EmbeddingParseError, MissingInputError

logger = logging.getLogger(__name__)

TOY_KB_PATH = Path(__file__).resolve().parent.parent / "data" / "toy_kb_clusters.json"

SOURCES = ("hash", "file", "toy-kb")


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v / norm if norm > 0 else v


def hash_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """按 (seed, token) 生成的确定性单位向量"""
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return _normalize(rng.standard_normal(dim))


class EmbeddingProvider:
    """词向量提供者；构造后不可变，查询结果为单位向量"""

    def __init__(
        self,
        dim: int,
        source: str = "hash",
        seed: int = 0,
        table: Optional[Dict[str, np.ndarray]] = None,
        digest: str = "",
    ):
        if dim <= 0:
            raise ContractError(f"embedding dimension must be positive, got {dim}")
        if source not in SOURCES:
            raise ContractError(f"unknown embedding source: {source}")
        self.dim = dim
        self.source = source
        self.seed = seed
        self._table = {k: _normalize(np.asarray(v, dtype=np.float64)) for k, v in (table or {}).items()}
        self.digest = digest
        self._cache: Dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, token: str) -> bool:
        return token in self._table

    @property
    def tokens(self) -> List[str]:
        return sorted(self._table)

    def embed(self, token: str) -> np.ndarray:
        """查询词向量；表中没有的词回退到哈希向量"""
        if not token:
            raise ContractError("cannot embed an empty token")
        cached = self._cache.get(token)
        if cached is None:
            vector = self._table.get(token)
            if vector is None:
                vector = hash_vector(token, self.dim, self.seed)
            cached = vector
            cached.setflags(write=False)
            self._cache[token] = cached
        return cached.copy()

    def bow(self, tokens: Sequence[str]) -> np.ndarray:
        return bow(tokens, self)

    def fingerprint(self) -> Dict[str, object]:
        return {"source": self.source, "dim": self.dim, "seed": self.seed, "digest": self.digest}

    def __repr__(self) -> str:
        return f"<EmbeddingProvider(source='{self.source}', dim={self.dim}, tokens={len(self)})>"


def bow(tokens: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    """词袋平均；空序列返回零向量"""
    if not tokens:
        return np.zeros(provider.dim)
    return np.mean([provider.embed(t) for t in tokens], axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def nearest(token: str, candidates: Iterable[str], provider: EmbeddingProvider, k: int = 1) -> List[Tuple[str, float]]:
    """按余弦相似度排序的近邻（相同得分按词序）"""
    anchor = provider.embed(token)
    scored = [(c, cosine(anchor, provider.embed(c))) for c in sorted(set(candidates)) if c != token]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


# ---------------------------------------------------------------- constructors

def hash_provider(dim: int, seed: int) -> EmbeddingProvider:
    return EmbeddingProvider(dim, source="hash", seed=seed)


def load_table(path: Union[str, Path], expected_dim: int, seed: int = 0) -> EmbeddingProvider:
    """读取 `token v1 ... vd` 文本表"""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(str(path))
    table: Dict[str, np.ndarray] = {}
    sha = hashlib.sha256()
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            sha.update(line.encode("utf-8"))
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise EmbeddingParseError(
                    str(path), line_number, f"expected {expected_dim} values, found {len(values)}"
                )
            try:
                table[token] = np.array([float(v) for v in values])
            except ValueError as e:
                raise EmbeddingParseError(str(path), line_number, str(e)) from e
    logger.info(f"词向量表加载完成: {path} ({len(table)} 词, d={expected_dim})")
    return EmbeddingProvider(expected_dim, source="file", seed=seed, table=table, digest=sha.hexdigest()[:16])


def export_table(provider: EmbeddingProvider, tokens: Iterable[str], path: Union[str, Path]) -> Path:
    """把提供者的向量写成文本表"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for token in sorted(set(tokens)):
            values = " ".join(repr(float(v)) for v in provider.embed(token))
            fh.write(f"{token} {values}\n")
    return path


def toy_kb_provider(dim: int, seed: int, path: Union[str, Path] = TOY_KB_PATH) -> EmbeddingProvider:
    """由聚类表合成向量：聚类中心方向 + 较小的词自身分量"""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(str(path))
    raw = path.read_bytes()
    doc = json.loads(raw.decode("utf-8"))
    cluster_weight = float(doc.get("cluster_weight", 0.9))
    token_weight = float(doc.get("token_weight", 0.45))
    table: Dict[str, np.ndarray] = {}
    for name, members in sorted(doc["clusters"].items()):
        centre = hash_vector(f"cluster:{name}", dim, seed)
        for token in members:
            if token in table:
                raise ContractError(f"token {token} listed in two clusters")
            table[token] = cluster_weight * centre + token_weight * hash_vector(token, dim, seed)
    digest = hashlib.sha256(raw).hexdigest()[:16]
    return EmbeddingProvider(dim, source="toy-kb", seed=seed, table=table, digest=digest)


def make_provider(dim: int, seed: int, conceptnet: bool = False, table_path: str = "") -> EmbeddingProvider:
    """按配置选择提供者：+C 使用知识库表，否则文件表或哈希"""
    if conceptnet:
        return toy_kb_provider(dim, seed)
    if table_path:
        return load_table(table_path, dim, seed)
    return hash_provider(dim, seed)
