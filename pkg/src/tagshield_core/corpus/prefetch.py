"""
Precarga de Lotes - Hilo Productor con Cola Acotada

Un único hilo productor consume el iterable de lotes y los deja en una cola
de tamaño fijo. El orden de los lotes es el del iterable, así que el flujo
es idéntico con o sin precarga.
"""

import logging
import queue
import threading
from collections.abc import Iterable, Iterator
from types import TracebackType

logger = logging.getLogger(__name__)


class _Done:
    pass


class _Failure:
    def __init__(self, error: BaseException) -> None:
        self.error = error


class Prefetcher[T]:
    """
    Iterador con precarga. Con `depth == 0` se itera de forma síncrona.
    Las excepciones del productor se relanzan en el consumidor.

    Uso:
        with Prefetcher(sampler.epoch(16, rng_a, rng_b), depth=2) as batches:
            for batch in batches:
                ...
    """

    def __init__(self, source: Iterable[T], depth: int = 2) -> None:
        if depth < 0:
            raise ValueError(f"depth debe ser >= 0: {depth}")
        self.source: Iterable[T] = source
        self.depth: int = depth
        self._queue: queue.Queue[T | _Done | _Failure] = queue.Queue(maxsize=max(depth, 1))
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _put(self, item: T | _Done | _Failure) -> bool:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _produce(self) -> None:
        try:
            for item in self.source:
                if not self._put(item):
                    return
            self._put(_Done())
        except BaseException as exc:  # noqa: BLE001
            self._put(_Failure(exc))

    def __iter__(self) -> Iterator[T]:
        if self.depth == 0:
            yield from self.source
            return
        if self._thread is None:
            self._thread = threading.Thread(
                target=self._produce, name="tagshield-prefetch", daemon=True
            )
            self._thread.start()
        while True:
            item = self._queue.get()
            if isinstance(item, _Done):
                return
            if isinstance(item, _Failure):
                raise item.error
            yield item

    def close(self) -> None:
        """Detiene el productor y espera a que termine."""
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            if self._thread.is_alive():
                logger.warning("El hilo de precarga no terminó a tiempo")
            self._thread = None

    def __enter__(self) -> "Prefetcher[T]":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        self.close()
