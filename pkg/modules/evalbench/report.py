# modules/evalbench/report.py
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional
import csv
import logging

from core.checkpoint import CHECKPOINT_VERSION
from .metrics import EvalEntry

logger = logging.getLogger(__name__)

METHODS = ("transfer", "dr", "suprat", "rat")
CSV_COLUMNS = ["env", "method", "deviation", "mean", "std_error", "episodes", "samples", "horizon",
               "seed", "config_hash", "format_version", "best"]


def _method_rank(method: str) -> int:
    return METHODS.index(method) if method in METHODS else len(METHODS)


@dataclass
class EvalReport:
    """Methods x deviation levels, each cell an EvalEntry"""
    env_id: str
    seed: int
    config_hash: str = ""
    entries: List[EvalEntry] = field(default_factory=list)

    def add(self, entry: EvalEntry) -> None:
        self.entries.append(entry)

    def get(self, method: str, deviation: float) -> Optional[EvalEntry]:
        for entry in self.entries:
            if entry.method == method and entry.deviation == deviation:
                return entry
        return None

    def deviations(self) -> List[float]:
        return sorted({e.deviation for e in self.entries})

    def best_methods(self) -> Dict[float, str]:
        """Highest mean per deviation level (ties go to the earlier method)"""
        best: Dict[float, EvalEntry] = {}
        for entry in self.sorted_entries():
            current = best.get(entry.deviation)
            if current is None or entry.mean > current.mean:
                best[entry.deviation] = entry
        return {d: e.method for d, e in best.items()}

    def sorted_entries(self) -> List[EvalEntry]:
        return sorted(self.entries, key=lambda e: (e.deviation, _method_rank(e.method), e.method))

    def to_rows(self) -> List[Dict[str, str]]:
        best = self.best_methods()
        return [{
            'env': self.env_id,
            'method': e.method,
            'deviation': repr(e.deviation),
            'mean': repr(e.mean),
            'std_error': repr(e.std_error),
            'episodes': str(e.episodes),
            'samples': str(e.samples),
            'horizon': str(e.horizon),
            'seed': str(e.seed),
            'config_hash': self.config_hash,
            'format_version': str(CHECKPOINT_VERSION),
            'best': "1" if best.get(e.deviation) == e.method else "0",
        } for e in self.sorted_entries()]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(self.to_rows())
        logger.info(f"Wrote {len(self.entries)} report rows to {path}")
        return path

    def summary(self) -> str:
        lines = []
        for e in self.sorted_entries():
            lines.append(f"{e.method:>9} dev={e.deviation:<5g} mean={e.mean:.4f} ± {e.std_error:.4f} (n={e.episodes})")
        return "\n".join(lines)
