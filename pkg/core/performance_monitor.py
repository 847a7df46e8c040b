"""
Performance Monitoring for NODAL LAB
Tracks replicate latencies and campaign throughput
"""

from typing import Dict, List, Optional
from datetime import datetime
from collections import defaultdict, deque
import logging
import threading

import numpy as np

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """
    Monitor campaign performance metrics
    Features:
    - Replicate latency tracking
    - Throughput measurement
    - Failure counting
    - Per-degree breakdown
    """

    def __init__(self, window_size: int = 1000):
        """
        Initialize performance monitor

        Args:
            window_size: Number of recent replicates to keep for percentiles
        """
        self.window_size = window_size
        self.replicate_times = deque(maxlen=window_size)
        self.failure_count = 0
        self.total_replicates = 0
        self._lock = threading.Lock()

        # Degree-specific metrics
        self.degree_latencies: Dict[int, List[float]] = defaultdict(list)

        # Stage-specific metrics (synthesis, contour, functionals)
        self.stage_latencies: Dict[str, List[float]] = defaultdict(list)

        self.start_time = datetime.now()

    def record_replicate(
        self,
        latency: float,
        ell: int,
        stages: Optional[Dict[str, float]] = None,
        success: bool = True
    ) -> None:
        """
        Record one replicate

        Args:
            latency: Wall time in seconds
            ell: Degree of the replicate
            stages: Optional per-stage wall times
            success: Whether the replicate completed
        """
        with self._lock:
            self.total_replicates += 1
            if not success:
                self.failure_count += 1
                return

            self.replicate_times.append(latency)
            self.degree_latencies[ell].append(latency)
            for stage, seconds in (stages or {}).items():
                self.stage_latencies[stage].append(seconds)

    def get_metrics(self) -> Dict:
        """
        Get current performance metrics

        Returns:
            Dict with latency and throughput statistics
        """
        if not self.replicate_times:
            return {
                "status": "no_data",
                "message": "No replicates recorded yet"
            }

        latencies = np.asarray(self.replicate_times)
        p50, p95, p99 = np.percentile(latencies, [50, 95, 99])

        uptime = (datetime.now() - self.start_time).total_seconds()
        replicates_per_second = self.total_replicates / uptime if uptime > 0 else 0

        return {
            "latency": {
                "avg_seconds": round(float(latencies.mean()), 4),
                "min_seconds": round(float(latencies.min()), 4),
                "max_seconds": round(float(latencies.max()), 4),
                "p50_seconds": round(float(p50), 4),
                "p95_seconds": round(float(p95), 4),
                "p99_seconds": round(float(p99), 4)
            },
            "throughput": {
                "total_replicates": self.total_replicates,
                "failure_count": self.failure_count,
                "replicates_per_second": round(replicates_per_second, 2)
            },
            "uptime_seconds": round(uptime, 2)
        }

    def get_degree_metrics(self) -> Dict:
        """
        Get metrics broken down by degree

        Returns:
            Dict keyed by ell
        """
        return {
            str(ell): {
                "replicates": len(latencies),
                "avg_latency_seconds": round(sum(latencies) / len(latencies), 4),
                "max_latency_seconds": round(max(latencies), 4)
            }
            for ell, latencies in sorted(self.degree_latencies.items())
            if latencies
        }

    def get_stage_metrics(self) -> Dict:
        """Total and mean wall time per pipeline stage"""
        return {
            stage: {
                "total_seconds": round(sum(values), 4),
                "avg_seconds": round(sum(values) / len(values), 4)
            }
            for stage, values in sorted(self.stage_latencies.items())
            if values
        }

    def get_full_report(self) -> Dict:
        """
        Get comprehensive performance report

        Returns:
            Full performance report
        """
        return {
            "overall": self.get_metrics(),
            "by_degree": self.get_degree_metrics(),
            "by_stage": self.get_stage_metrics(),
            "system_info": {
                "start_time": self.start_time.isoformat(),
                "window_size": self.window_size
            }
        }

    def reset(self) -> None:
        """Reset all metrics"""
        with self._lock:
            self.replicate_times.clear()
            self.degree_latencies.clear()
            self.stage_latencies.clear()
            self.failure_count = 0
            self.total_replicates = 0
            self.start_time = datetime.now()

        logger.info("Performance metrics reset")


# Global instance
performance_monitor = PerformanceMonitor()
