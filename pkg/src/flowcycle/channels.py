"""Bounded, closable single-producer/single-consumer channels.

A :class:`Channel` carries :class:`Item` objects between exactly two execution
contexts. Values are pickled at send time so the receiver never shares state
with the sender. File sets are copied into a channel-owned staging area on
send and moved into the receiver's directory on receive.

The same class works between threads and between forked processes; the
difference is only in the synchronisation primitives it is built from (see
:class:`ThreadPrimitives` and :class:`ProcessPrimitives`).
"""

from __future__ import annotations

import errno
import itertools
import os
import pickle
import queue
import shutil
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

__all__ = [
    "Cancelled",
    "Channel",
    "ChannelClosed",
    "ChannelClosedAndEmpty",
    "ChannelError",
    "FileSet",
    "Item",
    "MissingFile",
    "ProcessPrimitives",
    "StagingCorrupt",
    "StagingFull",
    "ThreadPrimitives",
]

#: Upper bound between checks of the cancellation callback in blocking calls.
CHECK_INTERVAL = 0.05


class ChannelError(Exception):
    """Base class for channel errors."""


class ChannelClosed(ChannelError):
    """The channel was closed; nothing sent now can ever be consumed."""


class ChannelClosedAndEmpty(ChannelError):
    """The channel is closed and drained; no more data will arrive."""


class Cancelled(ChannelError):
    """A blocking operation was interrupted by the cancellation callback."""


class MissingFile(ChannelError):
    pass


class StagingFull(ChannelError):
    pass


class StagingCorrupt(ChannelError):
    pass


@dataclass(frozen=True)
class Item:
    """A type-tagged payload in flight on a channel.

    Exactly one of ``data`` (pickled value) or ``files`` (names inside the
    staged directory ``staged``) is set.
    """

    type_tag: str
    data: bytes | None = None
    files: tuple[str, ...] | None = None
    staged: str | None = None

    @property
    def is_files(self) -> bool:
        return self.files is not None

    def value(self) -> Any:
        if self.data is None:
            raise TypeError("item carries a file set, not a value")
        return pickle.loads(self.data)

    @classmethod
    def of(cls, value: Any, type_tag: str = "any") -> "Item":
        return cls(type_tag=type_tag, data=pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL))


class FileSet(list):
    """List of paths received from a file-carrying channel."""


# Sentinel used to wake a blocked receiver on close. Never counted as an item.
_WAKE = "__flowcycle_wake__"


class _Counter:
    """Thread-only stand-in for ``multiprocessing.Value``."""

    def __init__(self, value: int = 0) -> None:
        self.value = value
        self._lock = threading.Lock()

    def get_lock(self) -> threading.Lock:
        return self._lock


class ThreadPrimitives:
    """Synchronisation primitives for contexts that are threads of one process."""

    isolated = False

    def queue(self):
        return queue.Queue()

    def event(self):
        return threading.Event()

    def counter(self, value: int = 0):
        return _Counter(value)

    def semaphore(self, n: int):
        return threading.BoundedSemaphore(n)

    def shutdown(self) -> None:
        pass


class ProcessPrimitives:
    """Primitives shareable with forked child processes.

    Queues live in a manager process so that every ``put`` is synchronous;
    this avoids buffered data being lost or blocking interpreter exit when a
    process terminates with unconsumed output.
    """

    isolated = True

    def __init__(self, ctx=None) -> None:
        import multiprocessing

        self.ctx = ctx or multiprocessing.get_context("fork")
        self._manager = None

    @property
    def manager(self):
        if self._manager is None:
            self._manager = self.ctx.Manager()
        return self._manager

    def queue(self):
        return self.manager.Queue()

    def event(self):
        return self.ctx.Event()

    def counter(self, value: int = 0):
        return self.ctx.Value("q", value)

    def semaphore(self, n: int):
        return self.ctx.BoundedSemaphore(n)

    def shutdown(self) -> None:
        if self._manager is not None:
            self._manager.shutdown()
            self._manager = None


_channel_ids = itertools.count()


class Channel:
    """Bounded FIFO conduit between one sender and one receiver.

    Parameters
    ----------
    capacity
        Maximum number of in-flight items; ``send`` blocks while full.
    type_tag
        Tag stamped on every item (the sending port's type).
    staging_dir
        Directory for file payloads, ``<workdir>/<channel-id>``. Created lazily.
    primitives
        :class:`ThreadPrimitives` (default) or :class:`ProcessPrimitives`.
    """

    def __init__(
        self,
        capacity: int = 16,
        *,
        type_tag: str = "any",
        staging_dir: str | os.PathLike | None = None,
        primitives=None,
        name: str | None = None,
    ) -> None:
        if capacity < 1:
            raise ValueError("capacity must be a positive integer")
        prims = primitives or ThreadPrimitives()
        self.capacity = capacity
        self.type_tag = type_tag
        self.name = name or f"channel-{next(_channel_ids)}"
        self.staging_dir = Path(staging_dir) if staging_dir is not None else None
        self._queue = prims.queue()
        self._slots = prims.semaphore(capacity)
        self._closed = prims.event()
        self._sent = prims.counter()
        self._received = prims.counter()
        self._file_seq = prims.counter()
        #: Optional event set on every send and on close, used by multi-input waits.
        self.notify = None

    def __repr__(self) -> str:
        state = "closed" if self.closed else "open"
        return f"Channel({self.name!r}, {state}, queued={self.queued}/{self.capacity})"

    # -- state ---------------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    @property
    def sent(self) -> int:
        return self._sent.value

    @property
    def received(self) -> int:
        return self._received.value

    @property
    def queued(self) -> int:
        return self._sent.value - self._received.value

    @property
    def exhausted(self) -> bool:
        """Closed and drained."""
        return self.closed and self.queued == 0

    def close(self) -> None:
        """Close the channel. Idempotent; queued items remain receivable."""
        if self._closed.is_set():
            return
        self._closed.set()
        self._queue.put(_WAKE)
        self._ping()

    def _ping(self) -> None:
        if self.notify is not None:
            self.notify.set()

    # -- sending -------------------------------------------------------------

    def send(
        self,
        item: Item | Any,
        timeout: float | None = None,
        cancel: Callable[[], bool] | None = None,
        on_block: Callable[[], None] | None = None,
    ) -> None:
        """Enqueue ``item``, blocking while the channel is at capacity.

        Non-:class:`Item` values are wrapped (and thereby serialized).
        Raises :class:`ChannelClosed` if the channel is or becomes closed,
        :class:`Cancelled` if ``cancel()`` turns true while blocked, and
        ``TimeoutError`` once ``timeout`` expires.
        """
        if not isinstance(item, Item):
            item = Item.of(item, self.type_tag)
        self._acquire_slot(timeout, cancel, on_block)
        # Count before enqueueing so a receiver never sees "closed and
        # drained" while this item is still on its way.
        with self._sent.get_lock():
            self._sent.value += 1
        self._queue.put(item)
        self._ping()

    def _acquire_slot(self, timeout, cancel, on_block) -> None:
        deadline = None if timeout is None else time.monotonic() + timeout
        blocked = False
        while True:
            if self.closed:
                raise ChannelClosed(self.name)
            if self._slots.acquire(timeout=0 if not blocked else CHECK_INTERVAL):
                if self.closed:
                    self._slots.release()
                    raise ChannelClosed(self.name)
                return
            if not blocked:
                blocked = True
                if on_block is not None:
                    on_block()
                continue
            if cancel is not None and cancel():
                raise Cancelled(self.name)
            if deadline is not None and time.monotonic() >= deadline:
                raise TimeoutError(f"send on {self.name} timed out")

    def send_files(
        self,
        files: Iterable[str | os.PathLike],
        timeout: float | None = None,
        cancel: Callable[[], bool] | None = None,
        on_block: Callable[[], None] | None = None,
    ) -> None:
        """Stage copies of ``files`` and enqueue them as one item.

        The staged directory only becomes visible (by rename) after every
        copy has completed. The originals are left untouched.
        """
        paths = [Path(f) for f in files]
        for path in paths:
            if not path.is_file():
                raise MissingFile(str(path))
        if self.staging_dir is None:
            raise StagingCorrupt(f"{self.name} has no staging directory")
        with self._file_seq.get_lock():
            seq = self._file_seq.value
            self._file_seq.value += 1
        final = self.staging_dir / str(seq)
        tmp = self.staging_dir / f".tmp-{seq}"
        names = []
        try:
            tmp.mkdir(parents=True, exist_ok=False)
            for path in paths:
                name = path.name
                # Disambiguate equal basenames within one item.
                if name in names:
                    name = f"{len(names)}-{name}"
                shutil.copy2(path, tmp / name)
                names.append(name)
            os.rename(tmp, final)
        except OSError as exc:
            shutil.rmtree(tmp, ignore_errors=True)
            if exc.errno in (errno.ENOSPC, errno.EDQUOT):
                raise StagingFull(str(exc)) from exc
            raise
        item = Item(type_tag=self.type_tag, files=tuple(names), staged=str(seq))
        try:
            self.send(item, timeout=timeout, cancel=cancel, on_block=on_block)
        except BaseException:
            shutil.rmtree(final, ignore_errors=True)
            raise

    # -- receiving -----------------------------------------------------------

    def receive(
        self,
        timeout: float | None = None,
        cancel: Callable[[], bool] | None = None,
        on_block: Callable[[], None] | None = None,
    ) -> Item:
        """Block until an item is available and return it (FIFO).

        Raises :class:`ChannelClosedAndEmpty` once the channel is closed and
        every sent item has been received.
        """
        deadline = None if timeout is None else time.monotonic() + timeout
        blocked = False
        while True:
            item = self._get(0 if not blocked else CHECK_INTERVAL)
            if item is not None:
                return item
            if self.exhausted:
                raise ChannelClosedAndEmpty(self.name)
            if not blocked:
                blocked = True
                if on_block is not None:
                    on_block()
                continue
            if cancel is not None and cancel():
                raise Cancelled(self.name)
            if deadline is not None and time.monotonic() >= deadline:
                raise TimeoutError(f"receive on {self.name} timed out")

    def try_receive(self) -> Item | None:
        """Return the next item without blocking, or ``None`` if there is none."""
        item = self._get(0)
        if item is None and self.exhausted:
            raise ChannelClosedAndEmpty(self.name)
        return item

    def _get(self, wait: float) -> Item | None:
        try:
            if wait <= 0:
                obj = self._queue.get_nowait()
            else:
                obj = self._queue.get(timeout=wait)
        except queue.Empty:
            return None
        if isinstance(obj, str) and obj == _WAKE:
            return None
        with self._received.get_lock():
            self._received.value += 1
        self._slots.release()
        return obj

    def claim_files(self, item: Item, dest: str | os.PathLike) -> FileSet:
        """Move the staged directory of a received file item under ``dest``."""
        if not item.is_files or self.staging_dir is None:
            raise TypeError("item carries a value, not a file set")
        src = self.staging_dir / item.staged
        if not src.is_dir():
            raise StagingCorrupt(f"staged directory {src} is missing")
        dest = Path(dest)
        dest.mkdir(parents=True, exist_ok=True)
        target = dest / f"{self.name}-{item.staged}"
        n = 0
        while target.exists():
            n += 1
            target = dest / f"{self.name}-{item.staged}.{n}"
        try:
            os.rename(src, target)
        except OSError as exc:
            if exc.errno != errno.EXDEV:
                raise
            shutil.copytree(src, target)
            shutil.rmtree(src)
        files = FileSet(target / name for name in item.files)
        for path in files:
            if not path.is_file():
                raise StagingCorrupt(f"staged file {path.name} is missing")
        return files

    def receive_files(
        self,
        dest: str | os.PathLike,
        timeout: float | None = None,
        cancel: Callable[[], bool] | None = None,
        on_block: Callable[[], None] | None = None,
    ) -> FileSet:
        item = self.receive(timeout=timeout, cancel=cancel, on_block=on_block)
        return self.claim_files(item, dest)

    def drain(self) -> list[Item]:
        """Non-blocking: remove and return everything currently queued."""
        items = []
        while True:
            item = self._get(0)
            if item is None:
                if self.queued == 0:
                    return items
                continue
            items.append(item)


def sha256(path: str | os.PathLike) -> str:
    """Hex digest of a file; used by tests and examples to compare copies."""
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()

