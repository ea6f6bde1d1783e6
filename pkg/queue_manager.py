import logging
import queue
import threading


class Job:
    def __init__(self, job_id, name, func, args, kwargs):
        self.id = job_id
        self.name = name
        self.func = func
        self.args = args
        self.kwargs = kwargs
        self.status = "PENDING"
        self.result = None
        self.error = None


class QueueManager:
    """Run independent jobs on worker threads and collect results in submission order

    Jobs must not share mutable state; each derives its own random stream, so
    results do not depend on the number of workers.
    """

    def __init__(self, workers=1, logger=None):
        self.workers = max(1, int(workers))
        self.logger = logger or logging.getLogger('SEHSSL')
        self.job_queue = queue.Queue()
        self.jobs = []

    def add_job(self, name, func, *args, **kwargs):
        """Add a new job to the queue"""
        job = Job(f"job_{len(self.jobs)}", name, func, args, kwargs)
        self.jobs.append(job)
        self.job_queue.put(job)
        self.logger.debug(f"Added job {job.id} to queue: {name}")
        return job

    def run(self):
        """Process every queued job and return their results in submission order

        Raises the error of the earliest failed job after all jobs have finished.
        """
        threads = [threading.Thread(target=self._process_queue, daemon=True)
                   for _ in range(min(self.workers, max(1, self.job_queue.qsize())))]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        for job in self.jobs:
            if job.status == "ERROR":
                raise job.error
        return [job.result for job in self.jobs]

    def _process_queue(self):
        """Process jobs from the queue until it is empty"""
        while True:
            try:
                job = self.job_queue.get_nowait()
            except queue.Empty:
                return

            job.status = "PROCESSING"
            try:
                job.result = job.func(*job.args, **job.kwargs)
                job.status = "COMPLETED"
            except Exception as e:
                job.error = e
                job.status = "ERROR"
                self.logger.error(f"Error processing job {job.id} ({job.name}): {str(e)}")
