"""Manager/worker runtime for asynchronous and distributed data augmentation.

One manager and ``k`` workers cycle as follows.  The manager broadcasts the
current parameter snapshot; every worker draws its block of missing data given
that snapshot; the manager waits for ``ceil(r k)`` fresh blocks (or for all
``k`` of them, with probability ``epsilon``), keeps the previous block for
every worker that has not reported, draws a new parameter and broadcasts it.
Workers still busy with an old snapshot abandon that work.

Two schedulers implement the same message semantics:

``virtual``
    Single threaded and deterministic.  Each worker's completion time in an
    iteration is drawn from a :class:`DelayModel` on a dedicated scheduler
    stream; the first ``ceil(r k)`` finishers (ties broken by worker id) are
    accepted and only they run their I step.
``live``
    One thread per worker plus the calling thread as manager, communicating
    through a broadcast mailbox and a payload queue.  Delays from the
    :class:`DelayModel` are injected as interruptible sleeps.

Random streams for a run with seed ``s`` are ``rng_stream(s, 0)`` for the
manager's P step, ``rng_stream(s, i)`` for worker ``i`` (1-based) and
``rng_stream(s, k + 1)`` for the scheduler (epsilon coins and virtual delays).
Live mode additionally gives worker ``i`` the delay stream ``rng_stream(s, k + 1 + i)``.
"""

from __future__ import annotations

import abc
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .distributions import rng_stream
from .errors import ChainError

log = logging.getLogger(__name__)

MODES = ("virtual", "live")


# ---------------------------------------------------------------------------
# messages and records


@dataclass(frozen=True)
class ThetaSnapshot:
    """Parameter broadcast from the manager, stamped with the iteration index."""

    epoch: int
    payload: object


@dataclass(frozen=True)
class MissingBlock:
    """A worker's latent payload computed from the snapshot of ``epoch``."""

    worker_id: int
    epoch: int
    payload: object


@dataclass
class DrawMatrix:
    """Recorded functionals: one row per iteration, one named column per scalar."""

    names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise ValueError(
                f"values of shape {self.values.shape} do not match {len(self.names)} names"
            )

    def __len__(self):
        return self.values.shape[0]

    def columns(self, prefix):
        """Sub-matrix of the columns whose names start with ``prefix``."""
        idx = [j for j, n in enumerate(self.names) if n.startswith(prefix)]
        return DrawMatrix([self.names[j] for j in idx], self.values[:, idx])


@dataclass
class RunStats:
    accept_counts: np.ndarray
    iterations: int
    iter_times: np.ndarray
    full_syncs: int = 0
    discarded: int = 0
    fresh_counts: np.ndarray = None
    drift: np.ndarray = None

    def as_dict(self):
        out = {
            "accept_counts": self.accept_counts.tolist(),
            "iterations": self.iterations,
            "full_syncs": self.full_syncs,
            "discarded": self.discarded,
            "estimated_r": estimated_r(self).tolist(),
            "iter_times": self.iter_times.tolist(),
        }
        return out


# ---------------------------------------------------------------------------
# scheduling policy


@dataclass(frozen=True)
class DelayModel:
    """Per-iteration worker completion time in abstract ticks.

    ``kind`` is ``"constant"`` (always ``value``), ``"exponential"`` (mean
    ``1 / rate``) or ``"lognormal"`` (``exp(N(mu, sigma^2))``).  Each draw is
    multiplied by the worker's block size relative to the mean block size.
    """

    kind: str = "exponential"
    value: float = 1.0
    rate: float = 1.0
    mu: float = 0.0
    sigma: float = 0.5

    def __post_init__(self):
        if self.kind not in ("constant", "exponential", "lognormal"):
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant delay must be positive")
        if self.kind == "exponential" and not self.rate > 0:
            raise ValueError("exponential delay rate must be positive")
        if self.kind == "lognormal" and not self.sigma >= 0:
            raise ValueError("lognormal sigma must be nonnegative")

    def draw(self, rng, size):
        if self.kind == "constant":
            return np.full(size, float(self.value))
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size)
        return rng.lognormal(self.mu, self.sigma, size)

    def as_dict(self):
        return {"kind": self.kind, "value": self.value, "rate": self.rate,
                "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class SelectionPolicy:
    """How many worker payloads the manager awaits in each iteration.

    Parameters
    ----------
    k : int
        Number of workers.
    r : float
        Fraction in (0, 1] of workers awaited in an ordinary iteration.
    epsilon : float
        Probability in [0, 1] that an iteration waits for every worker.
    mode : {"virtual", "live"}
    delays : DelayModel
        Worker completion-time model (virtual ticks, or live sleeps of
        ``tick`` seconds per unit).
    tick : float
        Seconds per delay unit in live mode.
    """

    k: int
    r: float
    epsilon: float = 0.0
    mode: str = "virtual"
    delays: DelayModel = field(default_factory=DelayModel)
    tick: float = 1e-3

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not 0.0 < self.r <= 1.0:
            raise ValueError(f"r must lie in (0, 1], got {self.r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tick > 0:
            raise ValueError("tick must be positive")

    @property
    def r_count(self):
        # round away float noise such as 0.7 * 10 = 7.000000000000001
        return min(self.k, max(1, math.ceil(round(self.r * self.k, 9))))


def select_wait_count(policy, epsilon_coin):
    """Payloads to await: ``k`` if the epsilon coin came up, else ``ceil(r k)``."""
    return policy.k if epsilon_coin else policy.r_count


def estimated_r(stats):
    """Per-worker fraction of iterations in which the manager used its fresh block."""
    if stats.iterations < 1:
        raise ValueError("estimated_r needs at least one iteration")
    return np.asarray(stats.accept_counts, dtype=float) / stats.iterations


# ---------------------------------------------------------------------------
# kernel contract


class DAKernel(abc.ABC):
    """A data augmentation model split across ``k`` workers.

    Subclasses hold the observed data, its partition and the prior.  The
    I step of worker ``i`` must be a draw from the conditional of that
    worker's missing-data block given the parameter; the P step must be a
    draw of the parameter given all ``k`` blocks.
    """

    #: name of the model, used in run metadata
    model = "generic"

    @property
    @abc.abstractmethod
    def k(self):
        """Number of workers (data blocks)."""

    @abc.abstractmethod
    def init_state(self):
        """Deterministic starting ``(theta, [block_1, ..., block_k])``."""

    @abc.abstractmethod
    def i_step(self, worker, theta, rng, cancelled=None):
        """Draw worker ``worker``'s block (0-based) given ``theta``.

        ``cancelled`` is an optional zero-argument callable polled between
        latent draws; when it returns true the draw is abandoned and ``None``
        returned.
        """

    @abc.abstractmethod
    def p_step(self, blocks, rng):
        """Draw the parameter given the current list of blocks."""

    @abc.abstractmethod
    def functional_names(self):
        """Column names of :meth:`functionals`."""

    @abc.abstractmethod
    def functionals(self, theta):
        """Scalar summaries of ``theta`` recorded each iteration."""

    def drift(self, theta, blocks):
        """Drift-function value of the current state (monitoring only)."""
        raise NotImplementedError

    def block_size(self, worker):
        """Amount of latent work held by ``worker``; scales its delays."""
        return 1


# ---------------------------------------------------------------------------
# runners


def _relative_sizes(kernel):
    sizes = np.array([kernel.block_size(i) for i in range(kernel.k)], dtype=float)
    return sizes / sizes.mean()


def _recorder(kernel, record):
    if record is None:
        return kernel.functional_names(), kernel.functionals
    names, fn = record
    return list(names), fn


def run_chain(kernel, policy, iters, seed, record=None, monitor=False):
    """Run ``iters`` ADDA cycles.

    Parameters
    ----------
    kernel : DAKernel
    policy : SelectionPolicy
        ``policy.k`` must equal ``kernel.k``.
    iters : int
        Number of cycles, >= 1.
    seed : int
    record : (names, callable), optional
        Functional of theta to record; defaults to the kernel's functionals.
    monitor : bool
        Also evaluate ``kernel.drift`` after every P step (stored in
        ``stats.drift``).

    Returns
    -------
    DrawMatrix, RunStats
    """
    if int(iters) != iters or iters < 1:
        raise ValueError(f"iters must be a positive integer, got {iters}")
    if policy.k != kernel.k:
        raise ValueError(f"policy has k={policy.k} but the data are split into {kernel.k} blocks")
    if policy.mode == "virtual":
        return _run_virtual(kernel, policy, int(iters), seed, record, monitor)
    return _run_live(kernel, policy, int(iters), seed, record, monitor)


def _run_virtual(kernel, policy, iters, seed, record, monitor):
    k = policy.k
    names, fn = _recorder(kernel, record)
    manager_rng = rng_stream(seed, 0)
    worker_rngs = [rng_stream(seed, i + 1) for i in range(k)]
    sched_rng = rng_stream(seed, k + 1)
    scale = _relative_sizes(kernel)
    ids = np.arange(k)

    theta, blocks = kernel.init_state()
    blocks = list(blocks)
    out = np.empty((iters, len(names)))
    accept = np.zeros(k, dtype=np.int64)
    fresh = np.empty(iters, dtype=np.int64)
    times = np.empty(iters)
    drift = np.empty(iters) if monitor else None
    full_syncs = 0

    for t in range(iters):
        coin = bool(sched_rng.random() < policy.epsilon)
        need = select_wait_count(policy, coin)
        full_syncs += coin
        finish = policy.delays.draw(sched_rng, k) * scale
        order = np.lexsort((ids, finish))
        cutoff = finish[order[need - 1]]
        # everything that has arrived by the decision instant is spliced
        accepted = np.flatnonzero(finish <= cutoff)
        try:
            for i in accepted:
                blocks[i] = kernel.i_step(int(i), theta, worker_rngs[i])
            theta = kernel.p_step(blocks, manager_rng)
            out[t] = fn(theta)
            if monitor:
                drift[t] = kernel.drift(theta, blocks)
        except Exception as exc:
            raise ChainError(f"iteration {t} failed: {exc}", iteration=t) from exc
        accept[accepted] += 1
        fresh[t] = accepted.size
        times[t] = cutoff

    stats = RunStats(accept, iters, times, full_syncs, 0, fresh, drift)
    return DrawMatrix(names, out), stats


class _Mailbox:
    """Latest-snapshot broadcast channel (manager writes, workers read)."""

    def __init__(self):
        self._cond = threading.Condition()
        self._snap = None
        self.closed = False

    @property
    def epoch(self):
        snap = self._snap
        return -1 if snap is None else snap.epoch

    def publish(self, snap):
        with self._cond:
            self._snap = snap
            self._cond.notify_all()

    def close(self):
        with self._cond:
            self.closed = True
            self._cond.notify_all()

    def wait_newer(self, epoch, timeout=None):
        """Block until a snapshot newer than ``epoch`` exists; ``None`` once closed or timed out."""
        with self._cond:
            self._cond.wait_for(lambda: self.closed or self.epoch > epoch, timeout)
            if self.closed or self.epoch <= epoch:
                return None
            return self._snap


@dataclass
class _WorkerFailure:
    worker_id: int
    error: BaseException


def _worker_loop(kernel, i, mailbox, results, rng, delay_rng, delays, scale, tick):
    seen = -1
    while True:
        snap = mailbox.wait_newer(seen)
        if snap is None:
            return
        seen = snap.epoch

        def cancelled(seen=seen):
            return mailbox.closed or mailbox.epoch > seen

        try:
            payload = kernel.i_step(i, snap.payload, rng, cancelled=cancelled)
        except Exception as exc:  # reported to the manager, which aborts the run
            results.put(_WorkerFailure(i, exc))
            return
        if payload is None:
            continue
        pause = float(delays.draw(delay_rng, 1)[0]) * scale * tick
        if pause > 0 and mailbox.wait_newer(seen, timeout=pause) is not None:
            continue  # preempted while the injected delay elapsed
        if mailbox.closed:
            return
        results.put(MissingBlock(i, seen, payload))


def _run_live(kernel, policy, iters, seed, record, monitor):
    k = policy.k
    names, fn = _recorder(kernel, record)
    manager_rng = rng_stream(seed, 0)
    sched_rng = rng_stream(seed, k + 1)
    scale = _relative_sizes(kernel)

    theta, blocks = kernel.init_state()
    blocks = list(blocks)
    out = np.empty((iters, len(names)))
    accept = np.zeros(k, dtype=np.int64)
    fresh = np.empty(iters, dtype=np.int64)
    times = np.empty(iters)
    drift = np.empty(iters) if monitor else None
    full_syncs = 0
    discarded = 0

    mailbox = _Mailbox()
    results = queue.Queue(maxsize=4 * k)
    threads = [
        threading.Thread(
            target=_worker_loop,
            args=(kernel, i, mailbox, results, rng_stream(seed, i + 1),
                  rng_stream(seed, k + 2 + i), policy.delays, scale[i], policy.tick),
            name=f"adda-worker-{i}",
            daemon=True,
        )
        for i in range(k)
    ]
    for th in threads:
        th.start()

    def take(block_or_failure, epoch, got):
        nonlocal discarded
        if isinstance(block_or_failure, _WorkerFailure):
            raise ChainError(
                f"worker {block_or_failure.worker_id} failed: {block_or_failure.error}",
                iteration=epoch, worker=block_or_failure.worker_id,
            ) from block_or_failure.error
        if block_or_failure.epoch != epoch:
            discarded += 1
            return
        got[block_or_failure.worker_id] = block_or_failure.payload

    try:
        for t in range(iters):
            start = time.perf_counter()
            mailbox.publish(ThetaSnapshot(t, theta))
            coin = bool(sched_rng.random() < policy.epsilon)
            need = select_wait_count(policy, coin)
            full_syncs += coin
            got = {}
            while len(got) < need:
                take(results.get(), t, got)
            while True:
                try:
                    take(results.get_nowait(), t, got)
                except queue.Empty:
                    break
            for i, payload in got.items():
                blocks[i] = payload
                accept[i] += 1
            try:
                theta = kernel.p_step(blocks, manager_rng)
                out[t] = fn(theta)
                if monitor:
                    drift[t] = kernel.drift(theta, blocks)
            except Exception as exc:
                raise ChainError(f"iteration {t} failed: {exc}", iteration=t) from exc
            fresh[t] = len(got)
            times[t] = time.perf_counter() - start
    finally:
        mailbox.close()
        # unblock workers stuck on a full queue
        while any(th.is_alive() for th in threads):
            try:
                while True:
                    results.get_nowait()
            except queue.Empty:
                pass
            for th in threads:
                th.join(timeout=0.01)

    stats = RunStats(accept, iters, times, full_syncs, discarded, fresh, drift)
    return DrawMatrix(names, out), stats
