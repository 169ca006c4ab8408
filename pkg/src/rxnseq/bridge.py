"""Serve logits from an external model process over JSON lines.

Protocol, one JSON document per line on the child's stdin/stdout::

    -> {"type": "init", "n_bins": N, "vocab_size": V, "image": "<path>"}
    <- {"type": "ready"}
    -> {"type": "step", "prefix": [<token ids>]}
    <- {"type": "logits", "values": [<V floats>]}
    ...

Requests are strictly sequential: each step is answered before the next is
sent. The session ends when the client closes the child's stdin; the child
should exit on end of input. Its stderr is passed through untouched.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .vocab import Vocabulary


class BridgeError(RuntimeError):
    pass


class BridgeSpawnError(BridgeError):
    pass


class BridgeTimeout(BridgeError):
    pass


class BridgeProtocolError(BridgeError):
    pass


class LogitsLengthError(BridgeProtocolError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"model returned {actual} logits, expected {expected} (vocabulary size)")


@dataclass(frozen=True)
class BridgeConfig:
    command: tuple[str, ...]
    handshake_timeout: float = 30.0
    step_timeout: float = 10.0

    def __post_init__(self) -> None:
        cmd = self.command
        object.__setattr__(self, "command", tuple(shlex.split(cmd) if isinstance(cmd, str) else cmd))
        if not self.command:
            raise ValueError("empty model command")
        if self.handshake_timeout <= 0 or self.step_timeout <= 0:
            raise ValueError("timeouts must be positive")


_EOF = object()


class BridgeSource:
    """A logit source backed by a child process. Use as a context manager."""

    def __init__(self, config: BridgeConfig, vocab: Vocabulary, image_path: str, record: bool = False):
        self.config = config
        self.vocab = vocab
        self.transcript: list[tuple[str, str]] | None = [] if record else None
        try:
            self.proc = subprocess.Popen(
                list(config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeSpawnError(f"cannot start model command {config.command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._send({"type": "init", "n_bins": vocab.n_bins, "vocab_size": vocab.size, "image": str(image_path)})
            reply = self._receive(config.handshake_timeout, "handshake")
            if reply.get("type") != "ready":
                raise BridgeProtocolError(f'expected {{"type": "ready"}}, got {reply!r}')
        except BaseException:
            self.close()
            raise

    def _pump(self) -> None:
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _send(self, msg: dict) -> None:
        line = json.dumps(msg, separators=(",", ":"))
        if self.transcript is not None:
            self.transcript.append((">", line))
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise BridgeProtocolError(f"model process closed its input: {exc}") from None

    def _receive(self, timeout: float, what: str) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise BridgeTimeout(f"no {what} reply from model process within {timeout:g} s") from None
        if line is _EOF:
            code = self.proc.poll()
            raise BridgeProtocolError(f"model process exited during {what} (exit code {code})")
        line = line.rstrip("\n")
        if self.transcript is not None:
            self.transcript.append(("<", line))
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise BridgeProtocolError(f"malformed {what} reply: {line[:200]!r}") from None
        if not isinstance(msg, dict):
            raise BridgeProtocolError(f"malformed {what} reply: {line[:200]!r}")
        return msg

    def __call__(self, prefix: Sequence[int]) -> np.ndarray:
        self._send({"type": "step", "prefix": [int(t) for t in prefix]})
        reply = self._receive(self.config.step_timeout, "step")
        values = reply.get("values")
        if reply.get("type") != "logits" or not isinstance(values, list):
            raise BridgeProtocolError(f'expected {{"type": "logits", "values": [...]}}, got {str(reply)[:200]}')
        if len(values) != self.vocab.size:
            raise LogitsLengthError(self.vocab.size, len(values))
        try:
            return np.asarray(values, dtype=np.float64)
        except (TypeError, ValueError):
            raise BridgeProtocolError("logits contain non-numeric values") from None

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except (OSError, ValueError):
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self._reader.join(timeout=1)
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except (OSError, ValueError):
                pass

    def __enter__(self) -> BridgeSource:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_bridge(config: BridgeConfig, vocab: Vocabulary, image_path, record: bool = False) -> BridgeSource:
    return BridgeSource(config, vocab, str(image_path), record=record)
