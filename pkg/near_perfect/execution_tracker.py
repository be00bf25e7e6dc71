import logging
import time
from typing import Any, Dict, List, Optional

import numpy as np

from .local_ga import Controller, GenerationGraph, Operation, Scorer

logger = logging.getLogger(__name__)


class GaExecutionTracker:
    """Execution tracker for the operations of every generation graph."""

    def __init__(self):
        self.start_time: Optional[float] = None
        self.operations_data: List[Dict[str, Any]] = []
        self.execution_events: List[Dict[str, Any]] = []
        self.run_metadata: Dict[str, Any] = {}

    def initialize_tracking(self, run_id: str, population_size: int, elite_size: int):
        """Initialize tracking for a GA run."""
        self.start_time = time.time()
        self.operations_data = []
        self.execution_events = []
        self.run_metadata = {
            'run_id': run_id,
            'population_size': population_size,
            'elite_size': elite_size,
            'start_time': self.start_time
        }

    def register_generation(self, graph: GenerationGraph, generation: int):
        """Add the operations of one generation graph as pending."""
        for index, operation in enumerate(graph.operations):
            self.operations_data.append({
                'id': f"{operation.__class__.__name__}_{generation}_{index}",
                'type': operation.__class__.__name__,
                'generation': generation,
                'operation': operation,
                'status': 'pending',
                'individuals': 0,
                'execution_time': 0.0,
                'start_time': None,
                'end_time': None,
                'error': None,
                'parameters': self._extract_operation_parameters(operation),
            })

    def start_operation(self, operation: Operation):
        """Mark an operation as started."""
        op_data = self._find_operation_data(operation)
        if op_data:
            op_data['status'] = 'running'
            op_data['start_time'] = time.time()
            self.execution_events.append({
                'operation_id': op_data['id'],
                'event': 'started',
                'timestamp': op_data['start_time'] - self.start_time,
            })

    def complete_operation(self, operation: Operation, individuals: int = 0):
        """Mark an operation as completed."""
        op_data = self._find_operation_data(operation)
        if op_data:
            end_time = time.time()
            op_data['status'] = 'completed'
            op_data['end_time'] = end_time
            op_data['execution_time'] = end_time - (op_data['start_time'] or end_time)
            op_data['individuals'] = individuals
            self.execution_events.append({
                'operation_id': op_data['id'],
                'event': 'completed',
                'timestamp': end_time - self.start_time,
                'execution_time': op_data['execution_time'],
                'individuals': individuals,
            })
            logger.debug(f"Completed operation: {op_data['id']} ({individuals} individuals, "
                         f"{op_data['execution_time']:.3f}s)")

    def fail_operation(self, operation: Operation, error_message: str):
        """Mark an operation as failed."""
        op_data = self._find_operation_data(operation)
        if op_data:
            end_time = time.time()
            op_data['status'] = 'failed'
            op_data['end_time'] = end_time
            op_data['execution_time'] = end_time - (op_data['start_time'] or end_time)
            op_data['error'] = str(error_message)
            self.execution_events.append({
                'operation_id': op_data['id'],
                'event': 'failed',
                'timestamp': end_time - self.start_time,
                'error': str(error_message),
            })
            logger.error(f"Failed operation: {op_data['id']} - {error_message}")

    def get_execution_trace(self) -> Dict[str, Any]:
        """Get complete execution trace data (JSON-serializable)."""
        total_time = time.time() - self.start_time if self.start_time else 0
        completed = sum(1 for op in self.operations_data if op['status'] == 'completed')
        time_by_type: Dict[str, float] = {}
        for op in self.operations_data:
            time_by_type[op['type']] = time_by_type.get(op['type'], 0.0) + op['execution_time']
        return {
            'operations': [
                {key: value for key, value in op.items() if key != 'operation'}
                for op in self.operations_data
            ],
            'events': self.execution_events,
            'total_time': total_time,
            'time_by_operation_type': time_by_type,
            'completion_rate': completed / len(self.operations_data) if self.operations_data else 0,
            'run_metadata': self.run_metadata
        }

    def _find_operation_data(self, operation: Operation) -> Optional[Dict[str, Any]]:
        for op_data in reversed(self.operations_data):
            if op_data['operation'] is operation:
                return op_data
        return None

    def _extract_operation_parameters(self, operation: Operation) -> Dict[str, Any]:
        params = {}
        for param_name in ('n', 'count'):
            if hasattr(operation, param_name):
                params[param_name] = getattr(operation, param_name)
        return params


def create_tracked_controller(graph: GenerationGraph, scorer: Scorer, rng: np.random.Generator,
                              problem_parameters: dict, tracker: GaExecutionTracker,
                              generation: int) -> Controller:
    """Create a controller whose operations report to ``tracker``."""
    tracker.register_generation(graph, generation)
    ctrl = Controller(graph, scorer, rng, problem_parameters)

    for operation in graph.operations:
        original_execute = operation.execute

        def make_tracked_execute(op, original_exec):
            def tracked_execute(*args, **kwargs):
                tracker.start_operation(op)
                try:
                    result = original_exec(*args, **kwargs)
                    tracker.complete_operation(op, len(op.get_individuals()))
                    return result
                except Exception as e:
                    tracker.fail_operation(op, str(e))
                    raise
            return tracked_execute

        operation.execute = make_tracked_execute(operation, original_execute)

    return ctrl
