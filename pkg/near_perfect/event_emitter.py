"""
Event Emitter Module for near-perfect hashing runs

Broadcasts progress records (run start, one record per generation, run
completion) as JSON objects, one per line, to an optional text sink and
to registered callbacks. Recent events are kept in a bounded buffer so a
caller can inspect them after the run.
"""

import json
import logging
import threading
import uuid
from collections import defaultdict, deque
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, TextIO

logger = logging.getLogger(__name__)

EventCallback = Callable[[str, Dict[str, Any]], None]


class EventBuffer:
    """
    Thread-safe buffer for storing recent events
    """

    def __init__(self, max_size: int = 1000):
        self.max_size = max_size
        self.buffer = deque(maxlen=max_size)
        self.lock = threading.RLock()

    def add_event(self, event_name: str, data: Dict[str, Any]):
        """Add an event to the buffer"""
        with self.lock:
            self.buffer.append({'event': event_name, **data})

    def get_events(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """Get events from buffer"""
        with self.lock:
            if limit:
                return list(self.buffer)[-limit:]
            return list(self.buffer)


class ProgressEmitter:
    """
    Emits structured progress records for a GA run.

    Every record carries the event name, a UTC timestamp and the run id.
    With a sink, each record is written as one JSON line and flushed.
    """

    def __init__(self, sink: Optional[TextIO] = None, buffer_size: int = 1000,
                 run_id: Optional[str] = None):
        self.sink = sink
        self.buffer = EventBuffer(max_size=buffer_size)
        self.run_id = run_id or str(uuid.uuid4())
        self.enabled = True
        self.event_callbacks: Dict[str, List[EventCallback]] = defaultdict(list)
        self._sink_lock = threading.Lock()

    def set_enabled(self, enabled: bool):
        self.enabled = enabled

    def add_event_callback(self, event_name: str, callback: EventCallback):
        """Register a callback for one event name"""
        self.event_callbacks[event_name].append(callback)

    def remove_event_callback(self, event_name: str, callback: EventCallback):
        if callback in self.event_callbacks.get(event_name, []):
            self.event_callbacks[event_name].remove(callback)

    def emit_event(self, event_name: str, data: Dict[str, Any]):
        """
        Emit an event to callbacks, the buffer and the sink.

        Args:
            event_name: Name of the event to emit
            data: JSON-serializable event data
        """
        if not self.enabled:
            return

        record = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'run_id': self.run_id,
            **data
        }

        for callback in self.event_callbacks.get(event_name, []):
            try:
                callback(event_name, record)
            except Exception as e:
                logger.error(f"Error in event callback for {event_name}: {e}")

        self.buffer.add_event(event_name, record)

        if self.sink is not None:
            line = json.dumps({'event': event_name, **record}, sort_keys=True)
            with self._sink_lock:
                self.sink.write(line + "\n")
                self.sink.flush()

    def emit_run_started(self, population_size: int, max_generations: int,
                         stagnation_limit: int, keyset_size: int):
        self.emit_event('run_started', {
            'population_size': population_size,
            'max_generations': max_generations,
            'stagnation_limit': stagnation_limit,
            'keyset_size': keyset_size,
        })

    def emit_generation(self, generation: int, best_fitness: float, mean_fitness: float,
                        best_so_far: float, best_k: int, evaluations: int):
        """Emit the per-generation progress record"""
        self.emit_event('generation', {
            'generation': generation,
            'best_fitness': best_fitness,
            'mean_fitness': mean_fitness,
            'best_so_far': best_so_far,
            'best_k': best_k,
            'evaluations': evaluations,
        })

    def emit_run_completed(self, best_k: int, fitness: float, generations: int,
                           stop_reason: str):
        self.emit_event('run_completed', {
            'best_k': best_k,
            'fitness': fitness,
            'generations': generations,
            'stop_reason': stop_reason,
        })

    def get_buffered_events(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        return self.buffer.get_events(limit)
