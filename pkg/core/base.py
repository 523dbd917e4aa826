# core/base.py
from abc import ABC, abstractmethod
import logging
import threading
from typing import Any, Dict, Optional
from datetime import datetime

from core.errors import StageError
from core.events import EventBus, EventTypes
from core.logger import log_exception, log_shutdown, log_startup


class BaseStage(ABC):
    """Base class for all pipeline stages

    A stage reads what it needs from the shared run context, writes its
    products back into it and tracks its own status.
    """

    name: str = "stage"

    def __init__(self, logger: Optional[logging.Logger] = None,
                 event_bus: Optional[EventBus] = None):
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.event_bus = event_bus
        self._lock = threading.Lock()
        self._status = {
            'state': 'pending',
            'last_update': datetime.now().isoformat(),
            'error': None
        }

    @abstractmethod
    def _run(self, context: Dict[str, Any]) -> None:
        """Execute the stage - must be implemented by subclasses"""

    def execute(self, context: Dict[str, Any]) -> None:
        """Run the stage, converting any failure into a StageError naming it"""
        log_startup(self.logger, self.name)
        self.update_status('running')
        try:
            self._run(context)
        except Exception as e:
            log_exception(self.logger, f"Error in stage {self.name}: {e}")
            self.update_status('error', str(e))
            if self.event_bus is not None:
                self.event_bus.emit(EventTypes.ERROR, {'stage': self.name, 'error': str(e)})
            raise StageError(self.name, e) from e
        self.update_status('done')
        log_shutdown(self.logger, self.name)

    def update_status(self, state: str, error: Optional[str] = None):
        with self._lock:
            self._status.update({
                'state': state,
                'last_update': datetime.now().isoformat(),
                'error': error
            })
        if self.event_bus is not None:
            self.event_bus.emit(EventTypes.STAGE_STATUS,
                                {'stage': self.name, 'state': state, 'error': error})

    def get_status(self) -> Dict:
        with self._lock:
            return self._status.copy()
