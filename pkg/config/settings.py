"""
Application Settings
Centralized process-level configuration
"""

import os
from typing import List

from dotenv import load_dotenv

# .env 可选，不存在时仅使用环境变量
load_dotenv()

class Settings:
    """Application settings"""

    # Application
    APP_NAME = "ToolNet Pipeline"
    APP_VERSION = "1.0.0"
    DEBUG = os.getenv("DEBUG", "False").lower() == "true"

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Storage
    DATA_DIR = os.getenv("DATA_DIR", "runs")

    # Workers - 仅用于可并行的阶段
    WORKERS = int(os.getenv("WORKERS", 1))

    # Output file names
    SCENES_DIRNAME = "scenes"
    CORPUS_FILENAME = "corpus.jsonl"
    AUGMENTED_CORPUS_FILENAME = "corpus_augmented.jsonl"
    AUGMENT_REPORT_FILENAME = "report.json"
    GENTEST_FILENAME = "gentest.jsonl"
    GENTEST_SUMMARY_FILENAME = "gentest_summary.json"
    RESULTS_FILENAME = "results.csv"
    HISTORY_FILENAME = "history.json"
    PLANS_DIRNAME = "plans"
    PLANNER_SUMMARY_FILENAME = "summary.json"
    CHECKPOINT_DIRNAME = "checkpoints"
    PERFORMANCE_FILENAME = "performance.json"
    REPORT_FILENAME = "report.md"

    @classmethod
    def get_domains(cls) -> List[str]:
        """Supported world domains"""
        return ["home", "factory"]

# Global settings instance
settings = Settings()
