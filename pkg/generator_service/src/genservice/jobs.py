"""Fine-tune job lifecycle: queued -> running -> done (or failed).

One worker thread executes jobs strictly one at a time; model ids are
unique forever, so duplicate submissions are rejected rather than queued.
"""

from __future__ import annotations

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .backend import TfidfRetrievalBackend
from .corpus import read_corpus

QUESTION_TARGET_CAP = 30
ANSWER_TARGET_CAP = 50
DEFAULT_SOURCE_CAP = 128
DEFAULT_EPOCHS = 5


class DuplicateModelError(ValueError):
    pass


class UnknownJobError(KeyError):
    pass


@dataclass
class Job:
    job_id: str
    model_id: str
    mode: str
    status: str = "queued"  # queued | running | done | failed
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "model_id": self.model_id,
            "mode": self.mode,
            "status": self.status,
            "error": self.error,
        }


def target_cap_for_mode(mode: str) -> int:
    return QUESTION_TARGET_CAP if mode == "question" else ANSWER_TARGET_CAP


class JobRegistry:
    """Tracks jobs and the fitted models they produce.

    ``inline`` runs jobs synchronously (used in tests); ``fit_delay_s``
    stretches the running phase so lifecycle transitions are observable.
    """

    def __init__(self, inline: bool = False, fit_delay_s: float = 0.0):
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._jobs_by_model: dict[str, Job] = {}
        self._models: dict[str, TfidfRetrievalBackend] = {}
        self._inline = inline
        self._fit_delay_s = fit_delay_s
        self._worker = None if inline else ThreadPoolExecutor(max_workers=1)

    def submit(
        self,
        mode: str,
        corpus_path: str,
        model_id: str,
        epochs: int = DEFAULT_EPOCHS,
        max_source_len: int = DEFAULT_SOURCE_CAP,
        max_target_len: int | None = None,
    ) -> Job:
        # read before registering so a malformed corpus never creates a job
        records = read_corpus(corpus_path)
        with self._lock:
            if model_id in self._jobs_by_model:
                raise DuplicateModelError(f"model_id {model_id!r} already exists")
            job = Job(job_id=uuid.uuid4().hex, model_id=model_id, mode=mode)
            self._jobs[job.job_id] = job
            self._jobs_by_model[model_id] = job
        backend = TfidfRetrievalBackend(
            max_source_len=max_source_len,
            max_target_len=(
                max_target_len if max_target_len is not None else target_cap_for_mode(mode)
            ),
            epochs=epochs,
        )
        if self._inline:
            self._run(job, backend, records)
        else:
            self._worker.submit(self._run, job, backend, records)
        return job

    def _run(self, job: Job, backend: TfidfRetrievalBackend, records) -> None:
        with self._lock:
            job.status = "running"
        try:
            if self._fit_delay_s:
                time.sleep(self._fit_delay_s)
            backend.fit(records)
        except Exception as exc:
            with self._lock:
                job.status = "failed"
                job.error = str(exc)
            return
        with self._lock:
            self._models[job.model_id] = backend
            job.status = "done"

    def job(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJobError(job_id)
            return self._jobs[job_id]

    def model_state(self, model_id: str) -> str:
        """'ready', 'loading', 'failed', or 'unknown'."""
        with self._lock:
            if model_id in self._models:
                return "ready"
            job = self._jobs_by_model.get(model_id)
            if job is None:
                return "unknown"
            if job.status == "failed":
                return "failed"
            return "loading"

    def model(self, model_id: str) -> TfidfRetrievalBackend:
        with self._lock:
            return self._models[model_id]

    def shutdown(self) -> None:
        if self._worker is not None:
            self._worker.shutdown(wait=True)
